#include "cluekit/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cluekit/kernels.hpp"

namespace cluekit::ad {
namespace {

// d/dx x log x at 0 is -inf; the smallest normal's slope keeps gradients finite.
const double kXLogXSlopeAtZero = std::log(std::numeric_limits<double>::min()) + 1.0;

void accumulate(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Adds a (maybe row-broadcast) contribution into an operand's gradient.
void accumulate_broadcast(Tensor& dst, const Tensor& g, double sign) {
  if (dst.size() == g.size()) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += sign * g[i];
    return;
  }
  const auto c = dst.size();
  for (std::size_t r = 0; r < g.rows(); ++r)
    for (std::size_t j = 0; j < c; ++j) dst[j] += sign * g[r * c + j];
}

bool broadcast_compatible(const Shape& a, const Shape& b) {
  return a == b || (a.size() == 2 && b.size() == 1 && a[1] == b[0]);
}

Tensor inverse_transpose_times(const kernels::LuResult& lu, double det) {
  // Returns det * inv(A)^T from the packed LU factors: solve A X = I.
  const auto n = lu.lu.rows();
  Tensor out(Shape{n, n});
  std::vector<double> col(n);
  for (std::size_t e = 0; e < n; ++e) {
    for (std::size_t i = 0; i < n; ++i) col[i] = lu.perm[i] == e ? 1.0 : 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < i; ++k) col[i] -= lu.lu.at(i, k) * col[k];
    for (std::size_t ii = n; ii-- > 0;) {
      for (std::size_t k = ii + 1; k < n; ++k) col[ii] -= lu.lu.at(ii, k) * col[k];
      col[ii] /= lu.lu.at(ii, ii);
    }
    // col is column e of inv(A); it lands in row e of inv(A)^T.
    for (std::size_t i = 0; i < n; ++i) out.at(e, i) = det * col[i];
  }
  return out;
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::Constant: return "constant";
    case Op::Affine: return "affine";
    case Op::MatMul: return "matmul";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::Shift: return "shift";
    case Op::Tanh: return "tanh";
    case Op::Relu: return "relu";
    case Op::Sigmoid: return "sigmoid";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::XLogX: return "xlogx";
    case Op::Reciprocal: return "reciprocal";
    case Op::Softmax: return "softmax";
    case Op::LogSoftmax: return "log_softmax";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::NormL1: return "norm_l1";
    case Op::SquaredNormL2: return "squared_norm_l2";
    case Op::NormL2: return "norm_l2";
    case Op::Concat: return "concat";
    case Op::Reshape: return "reshape";
    case Op::Det: return "det";
    case Op::ElementMax: return "element_max";
    case Op::Pick: return "pick";
    case Op::CrossEntropy: return "cross_entropy";
    case Op::BceWithLogits: return "bce_with_logits";
  }
  return "?";
}

const Shape& Var::shape() const { return graph_->shape(*this); }
const Tensor& Var::value() const { return graph_->value(*this); }
const Tensor& Var::grad() const { return graph_->grad(*this); }

Graph::Graph() { scopes_.emplace_back(); }

Graph::Scope::Scope(Graph& g, std::string label) : g_(g), previous_(g.current_scope_) {
  g_.scopes_.push_back(std::move(label));
  g_.current_scope_ = static_cast<std::uint16_t>(g_.scopes_.size() - 1);
}

Graph::Scope::~Scope() { g_.current_scope_ = previous_; }

Var Graph::make(Op op, std::vector<std::uint32_t> inputs, Shape shape, double attr, std::vector<std::size_t> iattr) {
  Node n;
  n.op = op;
  n.shape = std::move(shape);
  n.attr = attr;
  n.iattr = std::move(iattr);
  n.scope = current_scope_;
  for (auto id : inputs) n.requires_grad = n.requires_grad || nodes_[id].requires_grad;
  n.inputs = std::move(inputs);
  nodes_.push_back(std::move(n));
  forwarded_ = false;
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Graph::input(std::string name, Shape shape, bool differentiable) {
  Var v = make(Op::Input, {}, std::move(shape));
  nodes_[v.id()].requires_grad = differentiable;
  nodes_[v.id()].name = std::move(name);
  return v;
}

Var Graph::constant(Tensor value) {
  Var v = make(Op::Constant, {}, value.shape());
  nodes_[v.id()].value = std::move(value);
  nodes_[v.id()].bound = true;
  return v;
}

const Graph::Node& Graph::node(Var v) const {
  if (v.graph_ != this || v.id_ >= nodes_.size()) throw Error("graph: variable does not belong to this graph");
  return nodes_[v.id_];
}

void Graph::bind(Var input, Tensor value) {
  const auto& n = node(input);
  if (n.op != Op::Input) throw Error("graph: bind target is not an input");
  if (value.shape() != n.shape) {
    throw ShapeError("graph: input '" + n.name + "' expects " + shape_string(n.shape) + ", got " +
                     shape_string(value.shape()));
  }
  auto& m = nodes_[input.id_];
  m.value = std::move(value);
  m.bound = true;
  forwarded_ = false;
}

void Graph::forward(std::initializer_list<std::pair<Var, Tensor>> bindings) {
  for (const auto& [v, t] : bindings) bind(v, t);
  forward();
}

void Graph::forward(const std::map<std::string, Tensor>& bindings) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].op != Op::Input) continue;
    auto it = bindings.find(nodes_[i].name);
    if (it != bindings.end()) bind(Var(this, static_cast<std::uint32_t>(i)), it->second);
  }
  forward();
}

void Graph::forward() {
  for (auto& n : nodes_) {
    if (n.op == Op::Input) {
      if (!n.bound) throw Error("graph: input '" + n.name + "' is not bound");
      continue;
    }
    if (n.op == Op::Constant) continue;
    eval(n);
    if (!n.value.all_finite()) {
      std::string msg = std::string(op_name(n.op)) + " produced non-finite values";
      if (!scopes_[n.scope].empty()) msg += " in " + scopes_[n.scope];
      throw NumericalError(msg);
    }
  }
  forwarded_ = true;
}

void Graph::backward(Var output) {
  const auto& n = node(output);
  backward(output, Tensor(n.shape, 1.0));
}

void Graph::backward(Var output, const Tensor& seed) {
  if (!forwarded_) throw Error("graph: backward called before forward");
  node(output);
  if (seed.shape() != nodes_[output.id_].shape) throw ShapeError("graph: backward seed shape mismatch");
  for (auto& n : nodes_) {
    if (!n.requires_grad) continue;
    if (n.grad.shape() != n.shape || n.grad.size() != shape_size(n.shape)) n.grad = Tensor(n.shape);
    else n.grad.fill(0.0);
  }
  if (!nodes_[output.id_].requires_grad) return;
  accumulate(nodes_[output.id_].grad, seed);
  for (std::size_t i = output.id_ + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.requires_grad || n.op == Op::Input || n.op == Op::Constant) continue;
    backprop(n);
  }
}

const Tensor& Graph::value(Var v) const {
  const auto& n = node(v);
  if (!n.bound && n.op != Op::Constant && !forwarded_) throw Error("graph: value requested before forward");
  return n.value;
}

const Tensor& Graph::grad(Var v) const {
  const auto& n = node(v);
  if (!n.requires_grad) throw Error("graph: node is not tracked for gradients");
  return n.grad;
}

const Shape& Graph::shape(Var v) const { return node(v).shape; }
bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

void Graph::eval(Node& n) {
  auto in = [&](std::size_t k) -> const Tensor& { return nodes_[n.inputs[k]].value; };
  switch (n.op) {
    case Op::Affine: n.value = kernels::affine(in(0), in(1), in(2)); break;
    case Op::MatMul: n.value = kernels::matmul(in(0), in(1)); break;
    case Op::Add: n.value = kernels::add(in(0), in(1)); break;
    case Op::Sub: n.value = kernels::sub(in(0), in(1)); break;
    case Op::Mul: n.value = kernels::mul(in(0), in(1)); break;
    case Op::Scale: n.value = kernels::scale(in(0), n.attr); break;
    case Op::Shift: n.value = kernels::shift(in(0), n.attr); break;
    case Op::Tanh: n.value = kernels::tanh(in(0)); break;
    case Op::Relu: n.value = kernels::relu(in(0)); break;
    case Op::Sigmoid: n.value = kernels::sigmoid(in(0)); break;
    case Op::Exp: n.value = kernels::exp(in(0)); break;
    case Op::Log: n.value = kernels::log(in(0)); break;
    case Op::XLogX: n.value = kernels::xlogx(in(0)); break;
    case Op::Reciprocal: n.value = kernels::reciprocal(in(0)); break;
    case Op::Softmax: n.value = kernels::softmax(in(0)); break;
    case Op::LogSoftmax: n.value = kernels::log_softmax(in(0)); break;
    case Op::Sum: n.value = Tensor::scalar(kernels::sum(in(0))); break;
    case Op::Mean: n.value = Tensor::scalar(kernels::sum(in(0)) / static_cast<double>(in(0).size())); break;
    case Op::NormL1: n.value = Tensor::scalar(kernels::norm_l1(in(0))); break;
    case Op::SquaredNormL2: n.value = Tensor::scalar(kernels::squared_norm_l2(in(0))); break;
    case Op::NormL2: n.value = Tensor::scalar(kernels::norm_l2(in(0))); break;
    case Op::Concat: {
      std::vector<double> data;
      data.reserve(shape_size(n.shape));
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        auto d = in(k).data();
        data.insert(data.end(), d.begin(), d.end());
      }
      n.value = Tensor(n.shape, std::move(data));
      break;
    }
    case Op::Reshape: n.value = Tensor(n.shape, in(0).values()); break;
    case Op::Det: n.value = Tensor::scalar(kernels::determinant(in(0))); break;
    case Op::ElementMax: {
      n.value = in(0);
      n.aux.assign(n.value.size(), 0);
      for (std::size_t k = 1; k < n.inputs.size(); ++k) {
        const auto& t = in(k);
        for (std::size_t i = 0; i < t.size(); ++i) {
          if (t[i] > n.value[i]) {
            n.value[i] = t[i];
            n.aux[i] = k;
          }
        }
      }
      break;
    }
    case Op::Pick: n.value = Tensor::scalar(in(0)[n.iattr[0]]); break;
    case Op::CrossEntropy: {
      const auto ls = kernels::log_softmax(in(0));
      double s = 0.0;
      for (std::size_t r = 0; r < ls.rows(); ++r) s -= ls.at(r, n.iattr[r]);
      n.value = Tensor::scalar(s / static_cast<double>(ls.rows()));
      break;
    }
    case Op::BceWithLogits: {
      const auto& l = in(0);
      const auto& t = in(1);
      double s = 0.0;
      for (std::size_t i = 0; i < l.size(); ++i) {
        const double x = l[i];
        s += std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))) - t[i] * x;
      }
      n.value = Tensor::scalar(s);
      break;
    }
    case Op::Input:
    case Op::Constant: break;
  }
}

void Graph::backprop(Node& n) {
  const Tensor& g = n.grad;
  auto in = [&](std::size_t k) -> const Tensor& { return nodes_[n.inputs[k]].value; };
  auto want = [&](std::size_t k) { return tracked(n.inputs[k]); };
  auto dst = [&](std::size_t k) -> Tensor& { return grad_of(n.inputs[k]); };

  auto unary = [&](auto f) {
    if (!want(0)) return;
    auto& d = dst(0);
    const auto& x = in(0);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * f(x[i], n.value[i]);
  };

  switch (n.op) {
    case Op::Affine: {
      const auto& x = in(0);
      const auto& w = in(1);
      const auto rows = x.rows(), in_dim = w.cols(), out_dim = w.rows();
      if (want(0)) {
        double* __restrict dx = dst(0).data().data();
        const double* __restrict wp = w.data().data();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t o = 0; o < out_dim; ++o) {
            const double go = g[r * out_dim + o];
            if (go == 0.0) continue;
            double* __restrict dxr = dx + r * in_dim;
            const double* __restrict wo = wp + o * in_dim;
            for (std::size_t i = 0; i < in_dim; ++i) dxr[i] += go * wo[i];
          }
      }
      if (want(1)) {
        double* __restrict dw = dst(1).data().data();
        const double* __restrict xp = x.data().data();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t o = 0; o < out_dim; ++o) {
            const double go = g[r * out_dim + o];
            if (go == 0.0) continue;
            double* __restrict dwo = dw + o * in_dim;
            const double* __restrict xr = xp + r * in_dim;
            for (std::size_t i = 0; i < in_dim; ++i) dwo[i] += go * xr[i];
          }
      }
      if (want(2)) accumulate_broadcast(dst(2), g, 1.0);
      break;
    }
    case Op::MatMul: {
      const auto& a = in(0);
      const auto& b = in(1);
      const auto rows = a.rows(), k = a.cols(), m = b.cols();
      if (want(0)) {
        auto& da = dst(0);
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) s += g[i * m + j] * b[p * m + j];
            da[i * k + p] += s;
          }
      }
      if (want(1)) {
        auto& db = dst(1);
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            for (std::size_t j = 0; j < m; ++j) db[p * m + j] += av * g[i * m + j];
          }
      }
      break;
    }
    case Op::Add:
      if (want(0)) accumulate(dst(0), g);
      if (want(1)) accumulate_broadcast(dst(1), g, 1.0);
      break;
    case Op::Sub:
      if (want(0)) accumulate(dst(0), g);
      if (want(1)) accumulate_broadcast(dst(1), g, -1.0);
      break;
    case Op::Mul: {
      const auto& a = in(0);
      const auto& b = in(1);
      const bool bc = a.size() != b.size();
      const auto c = b.size();
      if (want(0)) {
        auto& da = dst(0);
        for (std::size_t i = 0; i < da.size(); ++i) da[i] += g[i] * b[bc ? i % c : i];
      }
      if (want(1)) {
        auto& db = dst(1);
        for (std::size_t i = 0; i < g.size(); ++i) db[bc ? i % c : i] += g[i] * a[i];
      }
      break;
    }
    case Op::Scale: unary([&](double, double) { return n.attr; }); break;
    case Op::Shift: unary([](double, double) { return 1.0; }); break;
    case Op::Tanh: unary([](double, double y) { return 1.0 - y * y; }); break;
    case Op::Relu: unary([](double x, double) { return x > 0.0 ? 1.0 : 0.0; }); break;
    case Op::Sigmoid: unary([](double, double y) { return y * (1.0 - y); }); break;
    case Op::Exp: unary([](double, double y) { return y; }); break;
    case Op::Log: unary([](double x, double) { return 1.0 / x; }); break;
    case Op::XLogX: unary([](double x, double) { return x == 0.0 ? kXLogXSlopeAtZero : std::log(x) + 1.0; }); break;
    case Op::Reciprocal: unary([](double x, double) { return -1.0 / (x * x); }); break;
    case Op::Softmax: {
      if (!want(0)) break;
      auto& d = dst(0);
      const auto c = n.value.cols();
      for (std::size_t r = 0; r < n.value.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += g[r * c + j] * n.value[r * c + j];
        for (std::size_t j = 0; j < c; ++j) d[r * c + j] += n.value[r * c + j] * (g[r * c + j] - dot);
      }
      break;
    }
    case Op::LogSoftmax: {
      if (!want(0)) break;
      auto& d = dst(0);
      const auto c = n.value.cols();
      for (std::size_t r = 0; r < n.value.rows(); ++r) {
        double gs = 0.0;
        for (std::size_t j = 0; j < c; ++j) gs += g[r * c + j];
        for (std::size_t j = 0; j < c; ++j) d[r * c + j] += g[r * c + j] - std::exp(n.value[r * c + j]) * gs;
      }
      break;
    }
    case Op::Sum: {
      if (!want(0)) break;
      auto& d = dst(0);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[0];
      break;
    }
    case Op::Mean: {
      if (!want(0)) break;
      auto& d = dst(0);
      const double s = g[0] / static_cast<double>(d.size());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += s;
      break;
    }
    case Op::NormL1: {
      if (!want(0)) break;
      auto& d = dst(0);
      const auto& x = in(0);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[0] * (x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0));
      break;
    }
    case Op::SquaredNormL2: {
      if (!want(0)) break;
      auto& d = dst(0);
      const auto& x = in(0);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += 2.0 * g[0] * x[i];
      break;
    }
    case Op::NormL2: {
      if (!want(0)) break;
      const double nv = n.value[0];
      if (nv == 0.0) break;
      auto& d = dst(0);
      const auto& x = in(0);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[0] * x[i] / nv;
      break;
    }
    case Op::Concat: {
      std::size_t off = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const auto len = in(k).size();
        if (want(k)) {
          auto& d = dst(k);
          for (std::size_t i = 0; i < len; ++i) d[i] += g[off + i];
        }
        off += len;
      }
      break;
    }
    case Op::Reshape:
      if (want(0)) accumulate(dst(0), g);
      break;
    case Op::Det: {
      if (!want(0)) break;
      const auto& a = in(0);
      const auto lu = kernels::lu_decompose(a);
      Tensor cof = (lu.singular || std::abs(lu.det) < 1e-12) ? kernels::cofactor_matrix(a)
                                                               : inverse_transpose_times(lu, lu.det);
      auto& d = dst(0);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[0] * cof[i];
      break;
    }
    case Op::ElementMax: {
      for (std::size_t i = 0; i < g.size(); ++i) {
        const auto k = n.aux[i];
        if (want(k)) dst(k)[i] += g[i];
      }
      break;
    }
    case Op::Pick:
      if (want(0)) dst(0)[n.iattr[0]] += g[0];
      break;
    case Op::CrossEntropy: {
      if (!want(0)) break;
      const auto sm = kernels::softmax(in(0));
      auto& d = dst(0);
      const auto c = sm.cols();
      const double s = g[0] / static_cast<double>(sm.rows());
      for (std::size_t r = 0; r < sm.rows(); ++r)
        for (std::size_t j = 0; j < c; ++j)
          d[r * c + j] += s * (sm[r * c + j] - (j == n.iattr[r] ? 1.0 : 0.0));
      break;
    }
    case Op::BceWithLogits: {
      const auto& l = in(0);
      const auto& t = in(1);
      if (want(0)) {
        auto& d = dst(0);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[0] * (kernels::sigmoid(l[i]) - t[i]);
      }
      if (want(1)) {
        auto& d = dst(1);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] -= g[0] * l[i];
      }
      break;
    }
    case Op::Input:
    case Op::Constant: break;
  }
}

// ---- op constructors -------------------------------------------------------

namespace {

Graph& same_graph(Var a, Var b) {
  if (&a.graph() != &b.graph()) throw Error("graph: operands belong to different graphs");
  return a.graph();
}

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
}

Var unary_op(Op op, Var a) { return a.graph().make(op, {a.id()}, a.shape()); }

Var scalar_op(Op op, Var a) { return a.graph().make(op, {a.id()}, Shape{}); }

}  // namespace

Var affine(Var x, Var w, Var b) {
  auto& g = same_graph(x, w);
  same_graph(w, b);
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  const auto& bs = b.shape();
  if (ws.size() != 2 || bs.size() != 1 || bs[0] != ws[0] || xs.empty() || xs.size() > 2 || xs.back() != ws[1]) {
    throw ShapeError("affine: x " + shape_string(xs) + ", W " + shape_string(ws) + ", b " + shape_string(bs));
  }
  Shape out = xs.size() == 1 ? Shape{ws[0]} : Shape{xs[0], ws[0]};
  return g.make(Op::Affine, {x.id(), w.id(), b.id()}, out);
}

Var matmul(Var a, Var b) {
  auto& g = same_graph(a, b);
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0]) {
    shape_fail("matmul", a.shape(), b.shape());
  }
  return g.make(Op::MatMul, {a.id(), b.id()}, Shape{a.shape()[0], b.shape()[1]});
}

Var operator+(Var a, Var b) {
  auto& g = same_graph(a, b);
  if (!broadcast_compatible(a.shape(), b.shape())) shape_fail("add", a.shape(), b.shape());
  return g.make(Op::Add, {a.id(), b.id()}, a.shape());
}

Var operator-(Var a, Var b) {
  auto& g = same_graph(a, b);
  if (!broadcast_compatible(a.shape(), b.shape())) shape_fail("sub", a.shape(), b.shape());
  return g.make(Op::Sub, {a.id(), b.id()}, a.shape());
}

Var operator*(Var a, Var b) {
  auto& g = same_graph(a, b);
  if (!broadcast_compatible(a.shape(), b.shape())) shape_fail("mul", a.shape(), b.shape());
  return g.make(Op::Mul, {a.id(), b.id()}, a.shape());
}

Var operator*(double s, Var a) { return a.graph().make(Op::Scale, {a.id()}, a.shape(), s); }
Var operator+(Var a, double s) { return a.graph().make(Op::Shift, {a.id()}, a.shape(), s); }
Var operator-(Var a) { return -1.0 * a; }

Var tanh(Var a) { return unary_op(Op::Tanh, a); }
Var relu(Var a) { return unary_op(Op::Relu, a); }
Var sigmoid(Var a) { return unary_op(Op::Sigmoid, a); }
Var exp(Var a) { return unary_op(Op::Exp, a); }
Var log(Var a) { return unary_op(Op::Log, a); }
Var xlogx(Var a) { return unary_op(Op::XLogX, a); }
Var reciprocal(Var a) { return unary_op(Op::Reciprocal, a); }

Var softmax(Var a) {
  if (a.shape().empty() || a.shape().size() > 2) throw ShapeError("softmax: expects rank 1 or 2, got " + shape_string(a.shape()));
  return unary_op(Op::Softmax, a);
}

Var log_softmax(Var a) {
  if (a.shape().empty() || a.shape().size() > 2) throw ShapeError("log_softmax: expects rank 1 or 2, got " + shape_string(a.shape()));
  return unary_op(Op::LogSoftmax, a);
}

Var sum(Var a) { return scalar_op(Op::Sum, a); }
Var mean(Var a) {
  if (shape_size(a.shape()) == 0) throw ShapeError("mean: empty tensor");
  return scalar_op(Op::Mean, a);
}
Var norm_l1(Var a) { return scalar_op(Op::NormL1, a); }
Var squared_norm_l2(Var a) { return scalar_op(Op::SquaredNormL2, a); }
Var norm_l2(Var a) { return scalar_op(Op::NormL2, a); }

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  std::vector<std::uint32_t> ids;
  std::size_t total = 0;
  for (auto p : parts) {
    same_graph(parts.front(), p);
    ids.push_back(p.id());
    total += shape_size(p.shape());
  }
  return parts.front().graph().make(Op::Concat, std::move(ids), Shape{total});
}

Var reshape(Var a, Shape shape) {
  if (shape_size(shape) != shape_size(a.shape())) shape_fail("reshape", a.shape(), shape);
  return a.graph().make(Op::Reshape, {a.id()}, std::move(shape));
}

Var det(Var a) {
  const auto& s = a.shape();
  if (s.size() != 2 || s[0] != s[1]) throw ShapeError("det: matrix " + shape_string(s) + " is not square");
  return scalar_op(Op::Det, a);
}

Var element_max(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("element_max: no operands");
  std::vector<std::uint32_t> ids;
  for (auto p : parts) {
    same_graph(parts.front(), p);
    if (p.shape() != parts.front().shape()) shape_fail("element_max", parts.front().shape(), p.shape());
    ids.push_back(p.id());
  }
  return parts.front().graph().make(Op::ElementMax, std::move(ids), parts.front().shape());
}

Var pick(Var a, std::size_t index) {
  if (index >= shape_size(a.shape())) throw ShapeError("pick: index out of range for " + shape_string(a.shape()));
  return a.graph().make(Op::Pick, {a.id()}, Shape{}, 0.0, {index});
}

Var cross_entropy(Var logits, const std::vector<int>& labels) {
  const auto& s = logits.shape();
  const std::size_t rows = s.size() == 2 ? s[0] : 1;
  const std::size_t classes = s.empty() ? 0 : s.back();
  if (s.empty() || s.size() > 2 || labels.size() != rows) {
    throw ShapeError("cross_entropy: logits " + shape_string(s) + " with " + std::to_string(labels.size()) + " labels");
  }
  std::vector<std::size_t> idx;
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) throw ShapeError("cross_entropy: label out of range");
    idx.push_back(static_cast<std::size_t>(l));
  }
  return logits.graph().make(Op::CrossEntropy, {logits.id()}, Shape{}, 0.0, std::move(idx));
}

Var bce_with_logits(Var logits, Var target) {
  auto& g = same_graph(logits, target);
  if (logits.shape() != target.shape()) shape_fail("bce_with_logits", logits.shape(), target.shape());
  return g.make(Op::BceWithLogits, {logits.id(), target.id()}, Shape{});
}

}  // namespace cluekit::ad
