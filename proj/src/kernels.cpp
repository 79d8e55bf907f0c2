#include "cluekit/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace cluekit::kernels {
namespace {

template <typename F>
Tensor unary(const Tensor& a, F f) {
  Tensor out(a.shape());
  auto src = a.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

template <typename F>
Tensor binary(const char* name, const Tensor& a, const Tensor& b, F f) {
  if (a.shape() == b.shape()) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
    return out;
  }
  if (a.rank() == 2 && b.rank() == 1 && a.cols() == b.size()) {
    Tensor out(a.shape());
    const auto c = a.cols();
    for (std::size_t r = 0; r < a.rows(); ++r)
      for (std::size_t j = 0; j < c; ++j) out[r * c + j] = f(a[r * c + j], b[j]);
    return out;
  }
  throw ShapeError(std::string(name) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                   shape_string(b.shape()));
}

using v2 = double __attribute__((vector_size(16)));

inline v2 load2(const double* p) {
  v2 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

// Four interleaved partial sums, combined in a fixed order. Deterministic,
// but not the same rounding as a left-to-right sum.
inline double dot(const double* __restrict a, const double* __restrict b, std::size_t n) {
  v2 lo = {0.0, 0.0}, hi = {0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    lo += load2(a + i) * load2(b + i);
    hi += load2(a + i + 2) * load2(b + i + 2);
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((lo[0] + hi[0]) + (lo[1] + hi[1])) + tail;
}

// Four rows of w against one x. Each row keeps the partial-sum layout of dot().
inline void dot4(const double* __restrict a, const double* __restrict w, std::size_t n, const double* bias,
                 double* out) {
  const double* w0 = w;
  const double* w1 = w + n;
  const double* w2 = w + 2 * n;
  const double* w3 = w + 3 * n;
  v2 lo0 = {0.0, 0.0}, hi0 = lo0, lo1 = lo0, hi1 = lo0, lo2 = lo0, hi2 = lo0, lo3 = lo0, hi3 = lo0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const v2 al = load2(a + i), ah = load2(a + i + 2);
    lo0 += al * load2(w0 + i);
    hi0 += ah * load2(w0 + i + 2);
    lo1 += al * load2(w1 + i);
    hi1 += ah * load2(w1 + i + 2);
    lo2 += al * load2(w2 + i);
    hi2 += ah * load2(w2 + i + 2);
    lo3 += al * load2(w3 + i);
    hi3 += ah * load2(w3 + i + 2);
  }
  double t0 = 0.0, t1 = 0.0, t2 = 0.0, t3 = 0.0;
  for (; i < n; ++i) {
    t0 += a[i] * w0[i];
    t1 += a[i] * w1[i];
    t2 += a[i] * w2[i];
    t3 += a[i] * w3[i];
  }
  out[0] = (((lo0[0] + hi0[0]) + (lo0[1] + hi0[1])) + t0) + bias[0];
  out[1] = (((lo1[0] + hi1[0]) + (lo1[1] + hi1[1])) + t1) + bias[1];
  out[2] = (((lo2[0] + hi2[0]) + (lo2[1] + hi2[1])) + t2) + bias[2];
  out[3] = (((lo3[0] + hi3[0]) + (lo3[1] + hi3[1])) + t3) + bias[3];
}

}  // namespace

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (w.rank() != 2 || b.rank() != 1 || b.size() != w.rows() || (x.rank() != 1 && x.rank() != 2) ||
      x.cols() != w.cols()) {
    throw ShapeError("affine: x " + shape_string(x.shape()) + ", W " + shape_string(w.shape()) + ", b " +
                     shape_string(b.shape()));
  }
  const auto n = x.rows();
  const auto in = w.cols();
  const auto out_dim = w.rows();
  Tensor y(x.rank() == 1 ? Shape{out_dim} : Shape{n, out_dim});
  const double* wd = w.data().data();
  for (std::size_t r = 0; r < n; ++r) {
    const double* xr = x.data().data() + r * in;
    double* yr = y.data().data() + r * out_dim;
    std::size_t o = 0;
    for (; o + 4 <= out_dim; o += 4) dot4(xr, wd + o * in, in, b.data().data() + o, yr + o);
    for (; o < out_dim; ++o) yr[o] = dot(xr, wd + o * in, in) + b[o];
  }
  return y;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  const auto n = a.rows(), k = a.cols(), m = b.cols();
  Tensor out(Shape{n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      for (std::size_t j = 0; j < m; ++j) out[i * m + j] += av * b[p * m + j];
    }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return binary("add", a, b, [](double x, double y) { return x + y; }); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary("sub", a, b, [](double x, double y) { return x - y; }); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary("mul", a, b, [](double x, double y) { return x * y; }); }
Tensor scale(const Tensor& a, double s) { return unary(a, [s](double x) { return x * s; }); }
Tensor shift(const Tensor& a, double s) { return unary(a, [s](double x) { return x + s; }); }

Tensor tanh(const Tensor& a) { return unary(a, [](double x) { return std::tanh(x); }); }
Tensor relu(const Tensor& a) { return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& a) { return unary(a, [](double x) { return sigmoid(x); }); }
Tensor exp(const Tensor& a) { return unary(a, [](double x) { return std::exp(x); }); }
Tensor log(const Tensor& a) { return unary(a, [](double x) { return std::log(x); }); }
Tensor xlogx(const Tensor& a) { return unary(a, [](double x) { return x == 0.0 ? 0.0 : x * std::log(x); }); }
Tensor reciprocal(const Tensor& a) { return unary(a, [](double x) { return 1.0 / x; }); }

Tensor log_softmax(const Tensor& a) {
  Tensor out(a.shape());
  const auto c = a.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto in = a.row(r);
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : in) mx = std::max(mx, v);
    double s = 0.0;
    for (double v : in) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] = in[j] - lse;
  }
  return out;
}

Tensor softmax(const Tensor& a) {
  Tensor out(a.shape());
  const auto c = a.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto in = a.row(r);
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : in) mx = std::max(mx, v);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      out[r * c + j] = std::exp(in[j] - mx);
      s += out[r * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] /= s;
  }
  return out;
}

double sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return s;
}

double norm_l1(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += std::abs(v);
  return s;
}

double squared_norm_l2(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return s;
}

double norm_l2(const Tensor& a) { return std::sqrt(squared_norm_l2(a)); }

double distance_l1(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("distance_l1: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

double distance_l2(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("distance_l2: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

LuResult lu_decompose(const Tensor& a) {
  if (a.rank() != 2 || a.rows() != a.cols()) throw ShapeError("lu: matrix " + shape_string(a.shape()) + " is not square");
  const auto n = a.rows();
  LuResult res;
  res.lu = a;
  res.perm.resize(n);
  for (std::size_t i = 0; i < n; ++i) res.perm[i] = i;
  auto& m = res.lu;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::abs(m.at(k, k));
    for (std::size_t r = k + 1; r < n; ++r) {
      if (std::abs(m.at(r, k)) > best) {
        best = std::abs(m.at(r, k));
        piv = r;
      }
    }
    if (best == 0.0) {
      res.singular = true;
      continue;
    }
    if (piv != k) {
      for (std::size_t c = 0; c < n; ++c) std::swap(m.at(k, c), m.at(piv, c));
      std::swap(res.perm[k], res.perm[piv]);
      res.sign = -res.sign;
    }
    for (std::size_t r = k + 1; r < n; ++r) {
      const double f = m.at(r, k) / m.at(k, k);
      m.at(r, k) = f;
      for (std::size_t c = k + 1; c < n; ++c) m.at(r, c) -= f * m.at(k, c);
    }
  }
  if (res.singular) {
    res.det = 0.0;
  } else {
    double d = res.sign;
    for (std::size_t k = 0; k < n; ++k) d *= m.at(k, k);
    res.det = d;
  }
  return res;
}

double determinant(const Tensor& a) {
  if (a.rows() == 0) return 1.0;
  return lu_decompose(a).det;
}

Tensor cofactor_matrix(const Tensor& a) {
  const auto n = a.rows();
  Tensor cof(Shape{n, n});
  if (n == 1) {
    cof[0] = 1.0;
    return cof;
  }
  Tensor minor(Shape{n - 1, n - 1});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t rr = 0;
      for (std::size_t r = 0; r < n; ++r) {
        if (r == i) continue;
        std::size_t cc = 0;
        for (std::size_t c = 0; c < n; ++c) {
          if (c == j) continue;
          minor.at(rr, cc++) = a.at(r, c);
        }
        ++rr;
      }
      const double sgn = ((i + j) % 2 == 0) ? 1.0 : -1.0;
      cof.at(i, j) = sgn * determinant(minor);
    }
  }
  return cof;
}

}  // namespace cluekit::kernels
