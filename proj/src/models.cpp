#include "cluekit/models.hpp"

#include <cmath>

#include "cluekit/kernels.hpp"

namespace cluekit {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "?";
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "sigmoid") return Activation::Sigmoid;
  throw ConfigError("unknown activation '" + name + "'");
}

Tensor apply_activation(Activation a, const Tensor& x) {
  switch (a) {
    case Activation::Identity: return x;
    case Activation::Tanh: return kernels::tanh(x);
    case Activation::Relu: return kernels::relu(x);
    case Activation::Sigmoid: return kernels::sigmoid(x);
  }
  return x;
}

Mlp Mlp::glorot(std::span<const std::size_t> sizes, Activation hidden, Activation output, Rng& rng) {
  Mlp m;
  m.hidden = hidden;
  m.output = output;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const auto in = sizes[l], out = sizes[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    Dense d{Tensor(Shape{out, in}), Tensor(Shape{out})};
    for (auto& w : d.weight.data()) w = u(rng);
    m.layers.push_back(std::move(d));
  }
  return m;
}

Mlp Mlp::zeros(std::span<const std::size_t> sizes, Activation hidden, Activation output) {
  Mlp m;
  m.hidden = hidden;
  m.output = output;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    m.layers.push_back(Dense{Tensor(Shape{sizes[l + 1], sizes[l]}), Tensor(Shape{sizes[l + 1]})});
  }
  return m;
}

namespace {

void activate_in_place(Activation a, Tensor& t) {
  auto d = t.data();
  switch (a) {
    case Activation::Identity: return;
    case Activation::Tanh: for (auto& v : d) v = std::tanh(v); return;
    case Activation::Relu: for (auto& v : d) v = v > 0.0 ? v : 0.0; return;
    case Activation::Sigmoid: for (auto& v : d) v = kernels::sigmoid(v); return;
  }
}

}  // namespace

Tensor Mlp::forward(const Tensor& x) const {
  Tensor h = kernels::affine(x, layers[0].weight, layers[0].bias);
  activate_in_place(layers.size() == 1 ? output : hidden, h);
  for (std::size_t l = 1; l < layers.size(); ++l) {
    h = kernels::affine(h, layers[l].weight, layers[l].bias);
    activate_in_place(l + 1 == layers.size() ? output : hidden, h);
  }
  return h;
}

namespace {

void check_dense(const Dense& d, std::size_t in, std::size_t out, const char* what) {
  if (d.weight.rank() != 2 || d.weight.rows() != out || d.weight.cols() != in || d.bias.size() != out) {
    throw ShapeError(std::string("bundle: ") + what + " has weight " + shape_string(d.weight.shape()) +
                     ", expected (" + std::to_string(out) + "," + std::to_string(in) + ")");
  }
}

void check_chain(const Mlp& m, std::size_t in, std::size_t out, const char* what) {
  if (m.layers.empty()) throw ShapeError(std::string("bundle: ") + what + " has no layers");
  std::size_t cur = in;
  for (const auto& l : m.layers) {
    check_dense(l, cur, l.out_dim(), what);
    cur = l.out_dim();
  }
  if (cur != out) throw ShapeError(std::string("bundle: ") + what + " output dimension mismatch");
}

void check_len(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw ShapeError(std::string(what) + ": expected length " + std::to_string(want) + ", got " + std::to_string(got));
  }
}

Tensor encode_tensor(const ModelBundle& b, const Tensor& x) {
  const Tensor h = b.encoder.trunk.forward(x);
  return kernels::affine(h, b.encoder.mean.weight, b.encoder.mean.bias);
}

Tensor predict_tensor(const ModelBundle& b, const Tensor& x, std::vector<Tensor>* members) {
  Tensor acc;
  for (std::size_t e = 0; e < b.ensemble.size(); ++e) {
    Tensor p = kernels::softmax(b.ensemble[e].forward(x));
    if (e == 0) {
      acc = p;
    } else {
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += p[i];
    }
    if (members) members->push_back(std::move(p));
  }
  const double inv = 1.0 / static_cast<double>(b.ensemble.size());
  for (auto& v : acc.data()) v *= inv;
  return acc;
}

thread_local EvalCounters tl_counters;

}  // namespace

void ModelBundle::validate() const {
  if (dims.input == 0 || dims.latent == 0 || dims.classes < 2 || dims.members == 0) {
    throw ShapeError("bundle: invalid dims");
  }
  const auto trunk_out = encoder.trunk.output_dim();
  check_chain(encoder.trunk, dims.input, trunk_out, "encoder trunk");
  check_dense(encoder.mean, trunk_out, dims.latent, "encoder mean head");
  check_dense(encoder.logvar, trunk_out, dims.latent, "encoder log-variance head");
  check_chain(decoder, dims.latent, dims.input, "decoder");
  if (ensemble.size() != dims.members) throw ShapeError("bundle: ensemble size does not match dims");
  for (const auto& m : ensemble) {
    check_chain(m, dims.input, dims.classes, "ensemble member");
    if (m.layers.size() != ensemble.front().layers.size()) throw ShapeError("bundle: ensemble members differ in depth");
  }
}

EvalCounters& eval_counters() { return tl_counters; }
void reset_eval_counters() { tl_counters = EvalCounters{}; }

Vec encode(const ModelBundle& bundle, std::span<const double> x) {
  check_len(x.size(), bundle.dims.input, "encode");
  ++tl_counters.encode;
  return encode_tensor(bundle, Tensor::vector(Vec(x.begin(), x.end()))).values();
}

Vec decode(const ModelBundle& bundle, std::span<const double> z) {
  check_len(z.size(), bundle.dims.latent, "decode");
  ++tl_counters.decode;
  return kernels::sigmoid(bundle.decoder.forward(Tensor::vector(Vec(z.begin(), z.end())))).values();
}

Posterior predict(const ModelBundle& bundle, std::span<const double> x) {
  check_len(x.size(), bundle.dims.input, "predict");
  ++tl_counters.predict;
  std::vector<Tensor> members;
  Posterior p;
  p.probs = predict_tensor(bundle, Tensor::vector(Vec(x.begin(), x.end())), &members).values();
  for (auto& m : members) p.member_probs.push_back(m.values());
  return p;
}

Vec predict_probs(const ModelBundle& bundle, std::span<const double> x) {
  check_len(x.size(), bundle.dims.input, "predict");
  ++tl_counters.predict;
  return predict_tensor(bundle, Tensor::vector(Vec(x.begin(), x.end())), nullptr).values();
}

Tensor encode_batch(const ModelBundle& bundle, const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("encode_batch: expects a matrix");
  check_len(x.cols(), bundle.dims.input, "encode_batch");
  return encode_tensor(bundle, x);
}

Tensor decode_batch(const ModelBundle& bundle, const Tensor& z) {
  if (z.rank() != 2) throw ShapeError("decode_batch: expects a matrix");
  check_len(z.cols(), bundle.dims.latent, "decode_batch");
  return kernels::sigmoid(bundle.decoder.forward(z));
}

Tensor predict_batch(const ModelBundle& bundle, const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("predict_batch: expects a matrix");
  check_len(x.cols(), bundle.dims.input, "predict_batch");
  return predict_tensor(bundle, x, nullptr);
}

double entropy(std::span<const double> probs) {
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || p > 1.0 + 1e-12) throw Error("entropy: probabilities must lie in [0,1]");
    total += p;
  }
  if (probs.empty() || std::abs(total - 1.0) > 1e-9) throw Error("entropy: probabilities do not sum to 1");
  return -kernels::sum(kernels::xlogx(Tensor::vector(Vec(probs.begin(), probs.end()))));
}

double entropy(const Posterior& p) { return entropy(p.probs); }

std::vector<double> entropy_rows(const Tensor& probs) {
  std::vector<double> out;
  out.reserve(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) out.push_back(entropy(probs.row(r)));
  return out;
}

int argmax(std::span<const double> v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

// ---- graph forms ----------------------------------------------------------

ad::Var activate(Activation a, ad::Var x) {
  switch (a) {
    case Activation::Identity: return x;
    case Activation::Tanh: return ad::tanh(x);
    case Activation::Relu: return ad::relu(x);
    case Activation::Sigmoid: return ad::sigmoid(x);
  }
  return x;
}

MlpVars bind_mlp(ad::Graph& g, const Mlp& mlp, bool trainable) {
  MlpVars v;
  v.hidden = mlp.hidden;
  v.output = mlp.output;
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    const auto& d = mlp.layers[l];
    if (trainable) {
      auto w = g.input("w" + std::to_string(l), d.weight.shape(), true);
      auto b = g.input("b" + std::to_string(l), d.bias.shape(), true);
      g.bind(w, d.weight);
      g.bind(b, d.bias);
      v.weights.push_back(w);
      v.biases.push_back(b);
    } else {
      v.weights.push_back(g.constant(d.weight));
      v.biases.push_back(g.constant(d.bias));
    }
  }
  return v;
}

ad::Var forward(const MlpVars& mlp, ad::Var x) {
  ad::Var h = x;
  for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
    h = ad::affine(h, mlp.weights[l], mlp.biases[l]);
    h = activate(l + 1 == mlp.weights.size() ? mlp.output : mlp.hidden, h);
  }
  return h;
}

BundleGraph::BundleGraph(ad::Graph& g, const ModelBundle& bundle) : g_(&g), bundle_(&bundle) {
  trunk_ = bind_mlp(g, bundle.encoder.trunk, false);
  mean_w_ = g.constant(bundle.encoder.mean.weight);
  mean_b_ = g.constant(bundle.encoder.mean.bias);
  decoder_ = bind_mlp(g, bundle.decoder, false);
  for (const auto& m : bundle.ensemble) members_.push_back(bind_mlp(g, m, false));
}

ad::Var BundleGraph::encode(ad::Var x) const { return ad::affine(forward(trunk_, x), mean_w_, mean_b_); }

ad::Var BundleGraph::decode(ad::Var z) const { return ad::sigmoid(forward(decoder_, z)); }

ad::Var BundleGraph::predict(ad::Var x) const {
  ad::Var acc;
  for (std::size_t e = 0; e < members_.size(); ++e) {
    ad::Var p = ad::softmax(forward(members_[e], x));
    acc = e == 0 ? p : acc + p;
  }
  return (1.0 / static_cast<double>(members_.size())) * acc;
}

ad::Var BundleGraph::entropy(ad::Var probs) { return -ad::sum(ad::xlogx(probs)); }

}  // namespace cluekit
