#pragma once

// Desk-scale differentiable models: a VAE (encoder mean/log-variance heads and
// a sigmoid-output decoder) and an ensemble of MLP classifiers whose averaged
// softmax gives the predictive posterior. Every model exists in two forms: a
// plain forward pass on Tensors and a graph form for differentiation. Both run
// the same kernels in the same order and agree bitwise.

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "cluekit/graph.hpp"
#include "cluekit/rng.hpp"
#include "cluekit/tensor.hpp"

namespace cluekit {

enum class Activation { Identity, Tanh, Relu, Sigmoid };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct Dense {
  Tensor weight;  // (out, in)
  Tensor bias;    // (out)

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
};

struct Mlp {
  std::vector<Dense> layers;
  Activation hidden = Activation::Tanh;
  Activation output = Activation::Identity;

  /// Glorot-uniform weights, zero biases. sizes = {in, h1, ..., out}.
  static Mlp glorot(std::span<const std::size_t> sizes, Activation hidden, Activation output, Rng& rng);
  static Mlp zeros(std::span<const std::size_t> sizes, Activation hidden, Activation output);

  std::size_t input_dim() const { return layers.front().in_dim(); }
  std::size_t output_dim() const { return layers.back().out_dim(); }
  Tensor forward(const Tensor& x) const;
};

Tensor apply_activation(Activation a, const Tensor& x);

struct Encoder {
  Mlp trunk;  // every layer activated
  Dense mean;
  Dense logvar;
};

struct BundleDims {
  std::size_t input = 0;
  std::size_t latent = 0;
  std::size_t classes = 0;
  std::size_t members = 0;
};

struct ModelBundle {
  BundleDims dims;
  Encoder encoder;
  Mlp decoder;                 // emits logits; decode() squashes through a sigmoid
  std::vector<Mlp> ensemble;   // each emits class logits
  nlohmann::json report = nlohmann::json::object();

  /// Checks that every tensor agrees with dims.
  void validate() const;
};

struct Posterior {
  Vec probs;                     // member average
  std::vector<Vec> member_probs; // (members, classes)
};

/// Per-thread evaluation counters, bumped by the plain encode/decode/predict
/// entry points. Used to audit how many model evaluations a method performs.
struct EvalCounters {
  std::size_t encode = 0;
  std::size_t decode = 0;
  std::size_t predict = 0;
  std::size_t total() const { return encode + decode + predict; }
};
EvalCounters& eval_counters();
void reset_eval_counters();

/// Encoder mean; no sampling.
Vec encode(const ModelBundle& bundle, std::span<const double> x);
Vec decode(const ModelBundle& bundle, std::span<const double> z);
Posterior predict(const ModelBundle& bundle, std::span<const double> x);
/// Member-averaged probabilities only.
Vec predict_probs(const ModelBundle& bundle, std::span<const double> x);

/// Row-wise batch versions; row r equals the single-vector call on row r.
Tensor encode_batch(const ModelBundle& bundle, const Tensor& x);
Tensor decode_batch(const ModelBundle& bundle, const Tensor& z);
Tensor predict_batch(const ModelBundle& bundle, const Tensor& x);

/// Shannon entropy in nats with 0 log 0 := 0. Throws on a non-simplex.
double entropy(std::span<const double> probs);
double entropy(const Posterior& p);
std::vector<double> entropy_rows(const Tensor& probs);

/// Index of the largest entry, lowest index on ties.
int argmax(std::span<const double> v);

// ---- graph forms ----------------------------------------------------------

struct MlpVars {
  std::vector<ad::Var> weights;
  std::vector<ad::Var> biases;
  Activation hidden = Activation::Tanh;
  Activation output = Activation::Identity;
};

/// Adds the MLP's tensors to g, as differentiable inputs (bound to the current
/// values) when trainable, as constants otherwise.
MlpVars bind_mlp(ad::Graph& g, const Mlp& mlp, bool trainable);
ad::Var forward(const MlpVars& mlp, ad::Var x);
ad::Var activate(Activation a, ad::Var x);

/// A bundle's tensors embedded as constants in a graph.
class BundleGraph {
 public:
  BundleGraph(ad::Graph& g, const ModelBundle& bundle);

  ad::Var encode(ad::Var x) const;
  ad::Var decode(ad::Var z) const;
  ad::Var predict(ad::Var x) const;
  static ad::Var entropy(ad::Var probs);

  ad::Graph& graph() const { return *g_; }
  const ModelBundle& bundle() const { return *bundle_; }

 private:
  ad::Graph* g_;
  const ModelBundle* bundle_;
  MlpVars trunk_;
  ad::Var mean_w_, mean_b_;
  MlpVars decoder_;
  std::vector<MlpVars> members_;
};

}  // namespace cluekit
