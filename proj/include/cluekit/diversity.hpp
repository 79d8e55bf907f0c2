#pragma once

#include <span>
#include <string>
#include <vector>

#include "cluekit/clue.hpp"
#include "cluekit/graph.hpp"

namespace cluekit {

enum class Metric { DPP, APD, Coverage, PredictionCoverage, DistinctLabels, LabelEntropy };
enum class Space { Input, Latent, Prediction };
enum class BaseDistance { L1, L2 };

std::string metric_name(Metric m);
std::string space_name(Space s);
Metric metric_from_name(const std::string& s);
Space space_from_name(const std::string& s);

struct DiversitySpec {
  Metric metric = Metric::DPP;
  Space space = Space::Latent;
  BaseDistance distance = BaseDistance::L2;

  bool differentiable() const;
  /// Throws when the metric cannot live in the requested space.
  void validate() const;
  nlohmann::json to_json() const;
  static DiversitySpec from_json(const nlohmann::json& j);
};

double base_distance(std::span<const double> a, std::span<const double> b, BaseDistance d);

/// det(K), K_ij = 1/(1 + d(p_i, p_j)), clamped to [0,1]; 0 for k <= 1.
double dpp(std::span<const Vec> points, BaseDistance d = BaseDistance::L2);
/// Mean pairwise distance; 0 for k <= 1.
double apd(std::span<const Vec> points, BaseDistance d = BaseDistance::L2);
/// (1/d') sum_i [max_j (p_j - x0)_i + max_j (x0 - p_j)_i].
double coverage(std::span<const Vec> points, std::span<const double> x0);
/// (S+ - S-)/d' for per-coordinate ranges [lo_i, hi_i].
double coverage_max(std::span<const double> lo, std::span<const double> hi);
/// (1/c') sum_i max_j y_j[i].
double prediction_coverage(std::span<const Vec> posteriors);
double distinct_labels(std::span<const int> labels, std::size_t classes);
/// Entropy of the label histogram divided by log c'.
double label_entropy(std::span<const int> labels, std::size_t classes);

/// Value of a spec on explicit points already in the spec's space. Label
/// metrics take argmax labels of the points (posteriors).
double diversity_value(const DiversitySpec& spec, std::span<const Vec> points, std::span<const double> anchor = {});

/// Graph form of the differentiable metrics over point variables. anchor is
/// only used by Coverage.
ad::Var diversity_term(ad::Graph& g, const DiversitySpec& spec, const std::vector<ad::Var>& points,
                       ad::Var anchor = {});

/// d D / d p_i for every point.
std::vector<Vec> diversity_grad(const DiversitySpec& spec, std::span<const Vec> points,
                                std::span<const double> anchor = {});

struct MetricRow {
  std::string metric;
  std::string space;
  std::size_t k = 0;
  double value = 0.0;
};

/// All six metrics in every applicable space over the given candidates.
std::vector<MetricRow> evaluate_metrics(std::span<const CandidateCE* const> cands, std::span<const double> x0,
                                        std::span<const double> z0, std::size_t classes);
std::vector<MetricRow> evaluate_metrics(const CESet& set, std::size_t classes);
nlohmann::json metrics_json(const std::vector<MetricRow>& rows);
std::string metrics_csv(const std::vector<MetricRow>& rows);

}  // namespace cluekit
