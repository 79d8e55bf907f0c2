#pragma once

#include <string>
#include <vector>

#include "cluekit/clue.hpp"
#include "cluekit/diversity.hpp"

namespace cluekit {

enum class DivMethod { Simultaneous, Sequential, Penalty };
std::string div_method_name(DivMethod m);

struct DivRunRecord {
  DivMethod method = DivMethod::Simultaneous;
  ExperimentConfig config;
  DiversitySpec spec;
  std::vector<double> joint_loss;   // one entry per iteration
  CESet set;                        // candidates carry trajectories when traced
  std::vector<MetricRow> metrics;   // over accepted candidates

  nlohmann::json to_json() const;
};

/// Diversity of a set of latent points, mapped into the spec's space.
/// Holds one graph reused across evaluations.
class LatentDiversity {
 public:
  LatentDiversity(const ModelBundle& bundle, const DiversitySpec& spec, std::size_t k, std::span<const double> x0,
                  std::span<const double> z0);
  LatentDiversity(const LatentDiversity&) = delete;
  LatentDiversity& operator=(const LatentDiversity&) = delete;

  double value(const std::vector<Vec>& zs);
  /// Returns D and fills dD/dz_i.
  double gradient(const std::vector<Vec>& zs, std::vector<Vec>& grads);

 private:
  ad::Graph g_;
  std::vector<ad::Var> z_;
  ad::Var d_;
};

/// Joint descent on -lambda_D D(z_1..z_k) + (1/k) sum L(z_i). The step for
/// z_i uses k times the joint gradient, so each candidate moves exactly as in
/// delta_clue when lambda_D = 0.
DivRunRecord nabla_clue_simultaneous(std::span<const double> x0, const ModelBundle& bundle,
                                     const ExperimentConfig& cfg, const DiversitySpec& spec,
                                     const InitContext& ctx = {});

/// Candidates one at a time, each minimizing L(z) - lambda_D D(found + {z})
/// with respect to the new point only.
DivRunRecord nabla_clue_sequential(std::span<const double> x0, const ModelBundle& bundle,
                                   const ExperimentConfig& cfg, const DiversitySpec& spec,
                                   const InitContext& ctx = {});

/// Sequential with the repulsion sum_found lambda_D / max(||z - z_f||_2, eps).
DivRunRecord nabla_clue_penalty(std::span<const double> x0, const ModelBundle& bundle, const ExperimentConfig& cfg,
                                const InitContext& ctx = {}, double eps = 1e-6);

/// n_i ascent steps on D over the start points, each projected onto the
/// radius-r ball around z0.
std::vector<Vec> diversity_presearch(const std::vector<Vec>& starts, const DiversitySpec& spec, std::size_t n_i,
                                     double r, std::span<const double> z0, double lr, const ModelBundle& bundle,
                                     std::span<const double> x0);

/// Rows (lambda_d, metric, space, value, mean_H, mean_d_x).
std::string ablation_csv(const std::vector<DivRunRecord>& runs);

}  // namespace cluekit
