#pragma once

// Forward kernels shared by the autodiff graph and the plain model forward
// passes. Both paths call exactly these functions in the same order, which is
// what makes graph values and direct evaluations bitwise identical.

#include "cluekit/tensor.hpp"

namespace cluekit::kernels {

/// y = x W^T + b. x is (in) or (n, in); W is (out, in); b is (out).
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor matmul(const Tensor& a, const Tensor& b);

/// Same shape, or a rank-2 left operand with a rank-1 right operand
/// broadcast over rows.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor shift(const Tensor& a, double s);

Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
/// x log x with 0 log 0 := 0.
Tensor xlogx(const Tensor& a);
Tensor reciprocal(const Tensor& a);

/// Row-wise softmax / log-softmax through log-sum-exp.
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);

double sum(const Tensor& a);
double norm_l1(const Tensor& a);
double squared_norm_l2(const Tensor& a);
double norm_l2(const Tensor& a);

double sigmoid(double x);

/// ||a - b||_1 and ||a - b||_2 over flat spans.
double distance_l1(std::span<const double> a, std::span<const double> b);
double distance_l2(std::span<const double> a, std::span<const double> b);

struct LuResult {
  Tensor lu;                       // packed L (unit diagonal) and U
  std::vector<std::size_t> perm;   // row permutation
  int sign = 1;                    // permutation parity
  bool singular = false;           // an exactly zero pivot was met
  double det = 0.0;
};

/// LU decomposition with partial pivoting of a square matrix.
LuResult lu_decompose(const Tensor& a);
double determinant(const Tensor& a);
/// Cofactor matrix C with C_ij = (-1)^(i+j) det(minor_ij); the gradient of det.
Tensor cofactor_matrix(const Tensor& a);

}  // namespace cluekit::kernels
