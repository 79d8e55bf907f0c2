#pragma once

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cluekit/clue.hpp"

namespace cluekit {

struct MapperHyper {
  double lr = 0.05;
  std::size_t steps = 200;
  double lambda_theta = 0.1;
  std::size_t max_certain = 1000;  // scan set bound; larger sets are subsampled evenly

  void validate() const;
  nlohmann::json to_json() const;
};

/// A latent translation from source group i to target group j.
struct MapperParams {
  int source = 0;
  int target = 0;
  Vec theta;
  double lambda_theta = 0.0;
  Vec theta_init;                 // the latent difference between means
  std::vector<double> loss_curve; // loss before each step, then the final loss
  double train_ms = 0.0;
  std::string variant = "glam";

  nlohmann::json to_json() const;
  static MapperParams from_json(const nlohmann::json& j);
};

/// Latent difference between means, mean(encode(X_c)) - mean(encode(X_u)).
Vec latent_dbm(const ModelBundle& bundle, const Tensor& x_uncertain, const Tensor& x_certain);

/// Mean of the squared distance from decode(z + theta) to the nearest row of
/// x_certain over the rows z of z_uncertain, plus lambda ||theta||_1.
/// Also returns the gradient with the nearest rows held fixed.
struct MapperLoss {
  double loss;
  Vec grad;
};
MapperLoss mapper_loss(const ModelBundle& bundle, const Tensor& z_uncertain, const Tensor& x_certain,
                       std::span<const double> theta, double lambda_theta);

/// Proximal gradient descent on theta starting at the latent DBM.
MapperParams train_mapper(const Tensor& x_uncertain, const Tensor& x_certain, const ModelBundle& bundle,
                          const MapperHyper& hyper, int source = 0, int target = 0);

/// One encode, one add, one decode, one predict.
CandidateCE apply_mapper(const MapperParams& mapper, std::span<const double> x, const ModelBundle& bundle,
                         double lambda_x = 0.0);

/// Tries every mapper (or only those whose source is among the classifier's
/// top_n classes when top_n > 0) and keeps the lowest-cost result.
CandidateCE apply_best_mapper(const std::vector<MapperParams>& mappers, std::span<const double> x,
                              const ModelBundle& bundle, double lambda_x, std::size_t top_n = 0);

enum class BaselineKind { DbmInput, DbmLatent, NnInput, NnLatent };
std::string baseline_name(BaselineKind k);
BaselineKind baseline_from_name(const std::string& s);

struct Baseline {
  BaselineKind kind = BaselineKind::DbmLatent;
  int source = 0;
  int target = 0;
  Vec shift;          // DBM translation (input or latent)
  Tensor certain;     // NN search set: inputs or latents
  Tensor certain_x;   // NN inputs (for latent NN the decoded CE is used)

  nlohmann::json to_json() const;
};

Baseline dbm_baseline(BaselineKind kind, const Tensor& x_uncertain, const Tensor& x_certain, const ModelBundle& bundle,
                      int source = 0, int target = 0);
Baseline nn_baseline(BaselineKind kind, const Tensor& x_certain, const ModelBundle& bundle, int source = 0,
                     int target = 0);
CandidateCE apply_baseline(const Baseline& b, std::span<const double> x, const ModelBundle& bundle,
                           double lambda_x = 0.0);

/// Index of the nearest row in l2, lowest index on ties.
std::size_t nearest_row(const Tensor& rows, std::span<const double> q);

/// Targets for GLAM 2/3: for every set, its lowest-cost accepted candidate,
/// kept when that candidate's label is `group` (rows of the returned matrix).
Tensor ce_targets(const std::vector<CESet>& sets, int group);

struct SchemeRow {
  std::string scheme;
  std::size_t point = 0;
  int group = 0;
  double H = 0.0;
  double d_x = 0.0;
  double cost = 0.0;
  int label = 0;
  double time_ms = 0.0;
};

struct SchemeSummary {
  std::string scheme;
  std::size_t n = 0;
  double mean_H = 0.0;
  double mean_d_x = 0.0;
  double mean_cost = 0.0;
  double valid_fraction = 0.0;   // label equals the target group
  double median_time_ms = 0.0;   // per CE
  double train_ms = 0.0;
};

struct ComparisonTable {
  std::vector<SchemeRow> rows;
  std::vector<SchemeSummary> summary;
  const SchemeSummary& find(const std::string& scheme) const;
  std::string csv() const;
};

/// Produces one CE for input x whose group is g.
using SchemeFn = std::function<CandidateCE(std::span<const double> x, int group)>;
struct NamedScheme {
  std::string name;
  SchemeFn fn;
  double train_ms = 0.0;
};

/// Runs every scheme over the rows of inputs `repetitions` times. Per-CE time
/// is the median over repetitions; cost is recomputed as H + lambda_x d_x.
ComparisonTable evaluate_schemes(const Tensor& inputs, const std::vector<int>& groups,
                                 const std::vector<NamedScheme>& schemes, double lambda_x,
                                 std::size_t repetitions = 5);

/// Spearman rank correlation with average ranks on ties.
double spearman(std::span<const double> a, std::span<const double> b);
double median(std::vector<double> v);

}  // namespace cluekit
