#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cluekit/models.hpp"

namespace cluekit {

enum class Scheme { S1 = 1, S2, S3, S4, S5 };

std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct ExperimentConfig {
  double delta = kInf;        // latent ball radius
  std::size_t k = 1;          // candidates
  double r = 0.0;             // initialization radius
  Scheme scheme = Scheme::S1;
  double lambda_x = 0.0;
  double lambda_y = 0.0;
  double lambda_d = 0.0;      // diversity weight
  std::size_t n_i = 0;        // diversity pre-search steps
  double lr = 0.1;
  std::size_t iters = 30;
  /// Unset means the bundle's median training entropy.
  std::optional<double> h_threshold;
  std::uint64_t seed = 0;
  bool trace = false;         // keep per-step trajectories
  std::size_t threads = 1;    // parallel descents

  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  /// Applies the keys present in j over this config.
  void update(const nlohmann::json& j);
};

/// The H_threshold in effect: config value, else the bundle's recorded median
/// training entropy, else +inf.
double resolve_h_threshold(const ExperimentConfig& cfg, const ModelBundle& bundle);

struct CandidateCE {
  std::size_t index = 0;      // start index i
  Vec z;
  Vec x;
  Vec probs;
  double H = 0.0;
  double d_x = 0.0;           // ||x - x0||_1
  double d_y = 0.0;           // -log p(original label)
  double rho = 0.0;           // ||z - z0||_2
  double cost = 0.0;          // H + lambda_x d_x (+ lambda_y d_y)
  int label = 0;
  bool accepted = false;
  Vec z_start;
  double start_objective = 0.0;
  double final_objective = 0.0;
  std::vector<Vec> trajectory;      // z after every step, start first (when traced)
  std::vector<double> objective_trace;

  nlohmann::json to_json(bool with_trajectory) const;
};

struct CESet {
  ExperimentConfig config;
  double h_threshold = kInf;  // resolved value
  Vec x0;
  Vec z0;
  int original_label = 0;
  double original_entropy = 0.0;
  std::vector<CandidateCE> candidates;

  std::vector<const CandidateCE*> accepted() const;
  nlohmann::json to_json(bool with_trajectories = true) const;
  static CESet from_json(const nlohmann::json& j);
};

/// Fills every derived field of a candidate from its latent point.
CandidateCE make_candidate(const ModelBundle& bundle, std::span<const double> z, std::span<const double> x0,
                           std::span<const double> z0, int original_label, double lambda_x, double lambda_y);

/// L(z) = H(predict(decode(z))) + lambda_x ||decode(z) - x0||_1
///        + lambda_y (-log p(label | decode(z)))   [only when lambda_y > 0]
/// built once as a graph and re-evaluated for each z.
class ClueObjective {
 public:
  ClueObjective(const ModelBundle& bundle, std::span<const double> x0, int label, double lambda_x, double lambda_y);
  ClueObjective(const ClueObjective&) = delete;
  ClueObjective& operator=(const ClueObjective&) = delete;

  struct Terms {
    double loss, entropy, distance, prediction_distance;
  };
  /// Forward only.
  Terms evaluate(std::span<const double> z);
  /// Forward and backward; returns dL/dz.
  Vec gradient(std::span<const double> z, double* loss = nullptr);

 private:
  ad::Graph g_;
  ad::Var z_, loss_, h_, dx_, dy_;
  std::size_t latent_;
  bool use_dy_;
};

/// Eq-style objective value and gradient in one call.
struct ObjectiveValue {
  double loss;
  Vec grad;
};
ObjectiveValue objective(const ModelBundle& bundle, std::span<const double> z, std::span<const double> x0,
                         double lambda_x, double lambda_y);

/// Radial projection onto the closed l2 ball of radius delta around z0.
Vec project_to_ball(std::span<const double> z, std::span<const double> z0, double delta);

/// Data the path-based schemes need.
struct InitContext {
  const ModelBundle* bundle = nullptr;     // S5
  const Tensor* certain_latents = nullptr; // S2: (n, m') encodings of certain training points
  const std::vector<int>* certain_labels = nullptr;
  std::size_t s5_steps = 64;               // ascent steps spanning the full radius
};

/// Start point i of k. rng drives S1, S3 and S4; S2 and S5 are deterministic.
Vec init_scheme(Scheme scheme, std::span<const double> z0, double r, std::size_t i, std::size_t k,
                const InitContext& ctx, Rng& rng);

/// The k start points used by delta_clue for this config.
std::vector<Vec> initial_points(const ExperimentConfig& cfg, std::span<const double> z0, const InitContext& ctx,
                                std::size_t classes);

/// Fixed-step projected gradient descent from one start point. Every iterate
/// is projected when delta is finite; the start is projected too.
CandidateCE descend(const ModelBundle& bundle, std::span<const double> x0, std::span<const double> z0,
                    int original_label, std::span<const double> start, std::size_t index, const ExperimentConfig& cfg);

/// Original unconstrained CLUE: one descent from encode(x0).
CESet clue(std::span<const double> x0, const ModelBundle& bundle, const ExperimentConfig& cfg);

CESet delta_clue(std::span<const double> x0, const ModelBundle& bundle, const ExperimentConfig& cfg,
                 const InitContext& ctx = {});

/// Starts shared by delta_clue and the diversity variants. Also resolves the
/// threshold and fills the CESet header.
CESet prepare_set(std::span<const double> x0, const ModelBundle& bundle, const ExperimentConfig& cfg);

/// 1/(min cost per class)^2 over accepted candidates, normalized. A class with
/// zero minimum cost takes all mass (split evenly when several do).
Vec label_distribution(const CESet& set, std::size_t classes);

}  // namespace cluekit
