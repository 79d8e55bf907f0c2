#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "cluekit/models.hpp"

namespace cluekit {

enum class Reconstruction { Bernoulli, Gaussian };

struct VaeHyper {
  std::size_t latent = 8;
  std::size_t hidden = 64;
  std::size_t hidden_layers = 2;
  std::size_t epochs = 60;
  std::size_t batch = 64;
  double learning_rate = 3e-3;
  double beta = 0.1;  // KL weight
  Reconstruction reconstruction = Reconstruction::Bernoulli;
  double gaussian_sigma = 0.1;  // observation noise for Gaussian reconstruction
};

struct VaeReport {
  std::vector<double> loss_curve;     // mean negative ELBO per sample, per epoch
  double reconstruction_l1 = 0.0;     // mean ||decode(encode(x)) - x||_1 over the training set
  double latent_roundtrip_l2 = 0.0;   // mean ||encode(decode(z)) - z||_2 over encoded training points
  nlohmann::json to_json() const;
};

struct VaeModel {
  Encoder encoder;
  Mlp decoder;
  VaeReport report;
};

struct EnsembleHyper {
  std::size_t members = 5;
  std::size_t hidden = 32;
  std::size_t hidden_layers = 2;
  std::size_t epochs = 30;
  std::size_t batch = 64;
  double learning_rate = 1e-3;
};

struct EnsembleReport {
  std::vector<std::vector<double>> loss_curves;  // per member, per epoch
  double heldout_accuracy = 0.0;
  double heldout_median_entropy = 0.0;
  std::vector<double> histogram_edges;
  std::vector<std::size_t> entropy_histogram;     // held-out entropies
  nlohmann::json to_json() const;
};

struct EnsembleModel {
  std::vector<Mlp> members;
  EnsembleReport report;
};

/// Minimal Adam optimizer over a fixed list of parameter tensors.
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads);

 private:
  double lr_, b1_, b2_, eps_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

/// ELBO training with the reparameterization trick. Throws NumericalError
/// naming the epoch when the loss becomes non-finite.
VaeModel train_vae(const Tensor& inputs, const VaeHyper& hyper, std::uint64_t seed);

/// Each member starts from its own seed-derived initialization and shuffle
/// order. The held-out set, when given, fills the report.
EnsembleModel train_ensemble(const Tensor& inputs, const std::vector<int>& labels, std::size_t classes,
                             const EnsembleHyper& hyper, std::uint64_t seed, const Tensor* heldout_inputs = nullptr,
                             const std::vector<int>* heldout_labels = nullptr);

ModelBundle assemble_bundle(VaeModel vae, EnsembleModel ensemble, std::size_t classes);

/// Records train_median_entropy, tau_low (20th) and tau_high (80th
/// percentile) of the training entropies in the bundle report.
void record_entropy_stats(ModelBundle& bundle, const Tensor& train_inputs);

double percentile(std::vector<double> values, double q);

}  // namespace cluekit
