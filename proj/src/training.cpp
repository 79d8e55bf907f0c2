#include "cluekit/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cluekit/kernels.hpp"

namespace cluekit {
namespace {

std::vector<std::size_t> hidden_sizes(std::size_t in, std::size_t hidden, std::size_t layers, std::size_t out) {
  std::vector<std::size_t> s{in};
  for (std::size_t i = 0; i < layers; ++i) s.push_back(hidden);
  s.push_back(out);
  return s;
}

Tensor gather_rows(const Tensor& m, std::span<const std::size_t> idx) {
  const auto c = m.cols();
  Tensor out(Shape{idx.size(), c});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    auto src = m.row(idx[r]);
    std::copy(src.begin(), src.end(), out.data().begin() + static_cast<std::ptrdiff_t>(r * c));
  }
  return out;
}

struct TrainableMlp {
  MlpVars vars;
  void collect(std::vector<ad::Var>& out) const {
    for (std::size_t l = 0; l < vars.weights.size(); ++l) {
      out.push_back(vars.weights[l]);
      out.push_back(vars.biases[l]);
    }
  }
};

void collect_params(Mlp& m, std::vector<Tensor*>& out) {
  for (auto& l : m.layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
}

}  // namespace

Adam::Adam(double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(eps) {}

void Adam::step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
  if (params.size() != grads.size()) throw Error("adam: parameter/gradient count mismatch");
  if (m_.empty()) {
    for (auto* p : params) {
      m_.emplace_back(p->shape());
      v_.emplace_back(p->shape());
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    const auto& g = *grads[k];
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1_ * m[i] + (1.0 - b1_) * g[i];
      v[i] = b2_ * v[i] + (1.0 - b2_) * g[i] * g[i];
      p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

nlohmann::json VaeReport::to_json() const {
  return {{"loss_curve", loss_curve},
          {"reconstruction_l1", reconstruction_l1},
          {"latent_roundtrip_l2", latent_roundtrip_l2}};
}

nlohmann::json EnsembleReport::to_json() const {
  return {{"loss_curves", loss_curves},
          {"heldout_accuracy", heldout_accuracy},
          {"heldout_median_entropy", heldout_median_entropy},
          {"histogram_edges", histogram_edges},
          {"entropy_histogram", entropy_histogram}};
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error("percentile: empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

VaeModel train_vae(const Tensor& inputs, const VaeHyper& hyper, std::uint64_t seed) {
  if (inputs.rank() != 2 || inputs.rows() == 0) throw ConfigError("train_vae: dataset is empty");
  for (double v : inputs.data())
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("train_vae: inputs must lie in [0,1]");
  if (hyper.latent == 0 || hyper.batch == 0 || hyper.epochs == 0) throw ConfigError("train_vae: invalid hyperparameters");

  const auto n = inputs.rows();
  const auto d = inputs.cols();
  const auto m = hyper.latent;
  auto init = make_rng(seed, Stream::VaeInit);
  VaeModel model;
  // The trunk's sizes exclude the heads, so it is built from {d, hidden...}.
  std::vector<std::size_t> trunk_sizes{d};
  for (std::size_t i = 0; i < hyper.hidden_layers; ++i) trunk_sizes.push_back(hyper.hidden);
  model.encoder.trunk = Mlp::glorot(trunk_sizes, Activation::Tanh, Activation::Tanh, init);
  const std::size_t head_sizes[] = {trunk_sizes.back(), m};
  model.encoder.mean = Mlp::glorot(head_sizes, Activation::Identity, Activation::Identity, init).layers[0];
  model.encoder.logvar = Mlp::glorot(head_sizes, Activation::Identity, Activation::Identity, init).layers[0];
  const auto dec_sizes = hidden_sizes(m, hyper.hidden, hyper.hidden_layers, d);
  model.decoder = Mlp::glorot(dec_sizes, Activation::Tanh, Activation::Identity, init);

  std::vector<Tensor*> params;
  collect_params(model.encoder.trunk, params);
  params.push_back(&model.encoder.mean.weight);
  params.push_back(&model.encoder.mean.bias);
  params.push_back(&model.encoder.logvar.weight);
  params.push_back(&model.encoder.logvar.bias);
  collect_params(model.decoder, params);

  Adam adam(hyper.learning_rate);
  auto rng = make_rng(seed, Stream::VaeTrain);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += hyper.batch) {
      const auto bsz = std::min(hyper.batch, n - start);
      const Tensor xb = gather_rows(inputs, std::span<const std::size_t>(order).subspan(start, bsz));
      Tensor eps(Shape{bsz, m});
      for (auto& e : eps.data()) e = normal(rng);

      ad::Graph g;
      auto x = g.constant(xb);
      auto noise = g.constant(eps);
      TrainableMlp trunk{bind_mlp(g, model.encoder.trunk, true)};
      auto mw = g.input("mean.w", model.encoder.mean.weight.shape());
      auto mb = g.input("mean.b", model.encoder.mean.bias.shape());
      auto lw = g.input("logvar.w", model.encoder.logvar.weight.shape());
      auto lb = g.input("logvar.b", model.encoder.logvar.bias.shape());
      g.bind(mw, model.encoder.mean.weight);
      g.bind(mb, model.encoder.mean.bias);
      g.bind(lw, model.encoder.logvar.weight);
      g.bind(lb, model.encoder.logvar.bias);
      TrainableMlp dec{bind_mlp(g, model.decoder, true)};

      auto h = forward(trunk.vars, x);
      auto mu = ad::affine(h, mw, mb);
      auto lv = ad::affine(h, lw, lb);
      auto z = mu + ad::exp(0.5 * lv) * noise;
      auto logits = forward(dec.vars, z);
      ad::Var recon;
      if (hyper.reconstruction == Reconstruction::Bernoulli) {
        recon = ad::bce_with_logits(logits, x);
      } else {
        recon = (0.5 / (hyper.gaussian_sigma * hyper.gaussian_sigma)) * ad::squared_norm_l2(ad::sigmoid(logits) - x);
      }
      auto kl = 0.5 * (ad::squared_norm_l2(mu) + ad::sum(ad::exp(lv)) - ad::sum(lv)) +
                (-0.5 * static_cast<double>(bsz * m));
      auto loss = (1.0 / static_cast<double>(bsz)) * (recon + hyper.beta * kl);

      try {
        g.forward();
      } catch (const NumericalError& e) {
        throw NumericalError("vae training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      g.backward(loss);
      epoch_loss += loss.value().item() * static_cast<double>(bsz);

      std::vector<ad::Var> vars;
      trunk.collect(vars);
      vars.insert(vars.end(), {mw, mb, lw, lb});
      dec.collect(vars);
      std::vector<const Tensor*> grads;
      for (auto v : vars) grads.push_back(&v.grad());
      adam.step(params, grads);
    }
    const double mean_loss = epoch_loss / static_cast<double>(n);
    if (!std::isfinite(mean_loss)) {
      throw NumericalError("vae training diverged at epoch " + std::to_string(epoch) + ": non-finite loss");
    }
    model.report.loss_curve.push_back(mean_loss);
  }

  // Reconstruction statistics through the deterministic (mean) path.
  const Tensor h = model.encoder.trunk.forward(inputs);
  const Tensor z = kernels::affine(h, model.encoder.mean.weight, model.encoder.mean.bias);
  const Tensor xr = kernels::sigmoid(model.decoder.forward(z));
  const Tensor zr = kernels::affine(model.encoder.trunk.forward(xr), model.encoder.mean.weight, model.encoder.mean.bias);
  double l1 = 0.0, l2 = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    l1 += kernels::distance_l1(xr.row(r), inputs.row(r));
    l2 += kernels::distance_l2(zr.row(r), z.row(r));
  }
  model.report.reconstruction_l1 = l1 / static_cast<double>(n);
  model.report.latent_roundtrip_l2 = l2 / static_cast<double>(n);
  return model;
}

EnsembleModel train_ensemble(const Tensor& inputs, const std::vector<int>& labels, std::size_t classes,
                             const EnsembleHyper& hyper, std::uint64_t seed, const Tensor* heldout_inputs,
                             const std::vector<int>* heldout_labels) {
  if (inputs.rank() != 2 || inputs.rows() == 0) throw ConfigError("train_ensemble: dataset is empty");
  if (labels.size() != inputs.rows()) throw ShapeError("train_ensemble: label count does not match inputs");
  if (classes < 2) throw ConfigError("train_ensemble: need at least 2 classes");
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= classes) throw ConfigError("train_ensemble: label out of range");
  if (hyper.members == 0 || hyper.batch == 0 || hyper.epochs == 0) throw ConfigError("train_ensemble: invalid hyperparameters");

  const auto n = inputs.rows();
  const auto sizes = hidden_sizes(inputs.cols(), hyper.hidden, hyper.hidden_layers, classes);
  EnsembleModel out;
  for (std::size_t e = 0; e < hyper.members; ++e) {
    auto init = make_rng(seed, Stream::EnsembleInit, {e});
    auto rng = make_rng(seed, Stream::EnsembleTrain, {e});
    Mlp member = Mlp::glorot(sizes, Activation::Relu, Activation::Identity, init);
    std::vector<Tensor*> params;
    collect_params(member, params);
    Adam adam(hyper.learning_rate);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> curve;
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      double epoch_loss = 0.0;
      for (std::size_t start = 0; start < n; start += hyper.batch) {
        const auto bsz = std::min(hyper.batch, n - start);
        auto idx = std::span<const std::size_t>(order).subspan(start, bsz);
        std::vector<int> yb;
        for (auto i : idx) yb.push_back(labels[i]);
        ad::Graph g;
        auto x = g.constant(gather_rows(inputs, idx));
        TrainableMlp net{bind_mlp(g, member, true)};
        auto loss = ad::cross_entropy(forward(net.vars, x), yb);
        try {
          g.forward();
        } catch (const NumericalError& err) {
          throw NumericalError("ensemble member " + std::to_string(e) + " diverged at epoch " +
                               std::to_string(epoch) + ": " + err.what());
        }
        g.backward(loss);
        epoch_loss += loss.value().item() * static_cast<double>(bsz);
        std::vector<ad::Var> vars;
        net.collect(vars);
        std::vector<const Tensor*> grads;
        for (auto v : vars) grads.push_back(&v.grad());
        adam.step(params, grads);
      }
      curve.push_back(epoch_loss / static_cast<double>(n));
    }
    out.report.loss_curves.push_back(std::move(curve));
    out.members.push_back(std::move(member));
  }

  if (heldout_inputs && heldout_labels && heldout_inputs->rows() > 0) {
    Tensor acc;
    for (std::size_t e = 0; e < out.members.size(); ++e) {
      Tensor p = kernels::softmax(out.members[e].forward(*heldout_inputs));
      acc = e == 0 ? p : kernels::add(acc, p);
    }
    const Tensor probs = kernels::scale(acc, 1.0 / static_cast<double>(out.members.size()));
    std::size_t correct = 0;
    std::vector<double> ent;
    for (std::size_t r = 0; r < probs.rows(); ++r) {
      if (argmax(probs.row(r)) == (*heldout_labels)[r]) ++correct;
      ent.push_back(entropy(probs.row(r)));
    }
    out.report.heldout_accuracy = static_cast<double>(correct) / static_cast<double>(probs.rows());
    out.report.heldout_median_entropy = percentile(ent, 50.0);
    const std::size_t bins = 10;
    const double top = std::log(static_cast<double>(classes));
    out.report.entropy_histogram.assign(bins, 0);
    for (std::size_t b = 0; b <= bins; ++b) out.report.histogram_edges.push_back(top * static_cast<double>(b) / bins);
    for (double h : ent) {
      auto b = static_cast<std::size_t>(h / top * static_cast<double>(bins));
      out.report.entropy_histogram[std::min(b, bins - 1)]++;
    }
  }
  return out;
}

ModelBundle assemble_bundle(VaeModel vae, EnsembleModel ensemble, std::size_t classes) {
  ModelBundle b;
  b.dims.input = vae.decoder.output_dim();
  b.dims.latent = vae.encoder.mean.out_dim();
  b.dims.classes = classes;
  b.dims.members = ensemble.members.size();
  b.encoder = std::move(vae.encoder);
  b.decoder = std::move(vae.decoder);
  b.ensemble = std::move(ensemble.members);
  b.report["vae"] = vae.report.to_json();
  b.report["ensemble"] = ensemble.report.to_json();
  b.validate();
  return b;
}

void record_entropy_stats(ModelBundle& bundle, const Tensor& train_inputs) {
  const auto h = entropy_rows(predict_batch(bundle, train_inputs));
  bundle.report["train_median_entropy"] = percentile(h, 50.0);
  bundle.report["tau_low"] = percentile(h, 20.0);
  bundle.report["tau_high"] = percentile(h, 80.0);
}

}  // namespace cluekit
