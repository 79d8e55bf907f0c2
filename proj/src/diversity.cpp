#include "cluekit/diversity.hpp"

#include <algorithm>
#include <cmath>

#include "cluekit/io.hpp"
#include "cluekit/kernels.hpp"

namespace cluekit {

std::string metric_name(Metric m) {
  switch (m) {
    case Metric::DPP: return "dpp";
    case Metric::APD: return "apd";
    case Metric::Coverage: return "coverage";
    case Metric::PredictionCoverage: return "prediction_coverage";
    case Metric::DistinctLabels: return "distinct_labels";
    case Metric::LabelEntropy: return "label_entropy";
  }
  return "?";
}

std::string space_name(Space s) {
  switch (s) {
    case Space::Input: return "input";
    case Space::Latent: return "latent";
    case Space::Prediction: return "prediction";
  }
  return "?";
}

Metric metric_from_name(const std::string& s) {
  for (Metric m : {Metric::DPP, Metric::APD, Metric::Coverage, Metric::PredictionCoverage, Metric::DistinctLabels,
                   Metric::LabelEntropy})
    if (metric_name(m) == s) return m;
  throw ConfigError("unknown diversity metric '" + s + "'");
}

Space space_from_name(const std::string& s) {
  for (Space sp : {Space::Input, Space::Latent, Space::Prediction})
    if (space_name(sp) == s) return sp;
  throw ConfigError("unknown space '" + s + "'");
}

bool DiversitySpec::differentiable() const {
  return metric == Metric::DPP || metric == Metric::APD || metric == Metric::Coverage;
}

void DiversitySpec::validate() const {
  const bool label_based = metric == Metric::PredictionCoverage || metric == Metric::DistinctLabels ||
                           metric == Metric::LabelEntropy;
  if (label_based && space != Space::Prediction) throw ConfigError(metric_name(metric) + " lives in prediction space");
  if (metric == Metric::Coverage && space == Space::Prediction) {
    throw ConfigError("coverage applies to input or latent space");
  }
}

nlohmann::json DiversitySpec::to_json() const {
  return {{"metric", metric_name(metric)}, {"space", space_name(space)}, {"distance", distance == BaseDistance::L1 ? "l1" : "l2"}};
}

DiversitySpec DiversitySpec::from_json(const nlohmann::json& j) {
  DiversitySpec s;
  if (j.contains("metric")) s.metric = metric_from_name(j["metric"]);
  if (j.contains("space")) s.space = space_from_name(j["space"]);
  if (j.contains("distance")) {
    const auto d = j["distance"].get<std::string>();
    if (d == "l1") s.distance = BaseDistance::L1;
    else if (d == "l2") s.distance = BaseDistance::L2;
    else throw ConfigError("unknown base distance '" + d + "'");
  }
  s.validate();
  return s;
}

double base_distance(std::span<const double> a, std::span<const double> b, BaseDistance d) {
  return d == BaseDistance::L1 ? kernels::distance_l1(a, b) : kernels::distance_l2(a, b);
}

double dpp(std::span<const Vec> points, BaseDistance d) {
  const auto k = points.size();
  if (k <= 1) return 0.0;
  Tensor K(Shape{k, k});
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double dist = i == j ? 0.0 : base_distance(points[i], points[j], d);
      if (!std::isfinite(dist)) throw NumericalError("dpp: non-finite distance");
      K.at(i, j) = 1.0 / (1.0 + dist);
    }
  // K is positive semidefinite for these distances, so anything outside
  // [0,1] is roundoff.
  return std::clamp(kernels::determinant(K), 0.0, 1.0);
}

double apd(std::span<const Vec> points, BaseDistance d) {
  const auto k = points.size();
  if (k <= 1) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) s += base_distance(points[i], points[j], d);
  return s / (static_cast<double>(k * (k - 1)) / 2.0);
}

double coverage(std::span<const Vec> points, std::span<const double> x0) {
  if (points.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    double up = -kInf, down = -kInf;
    for (const auto& p : points) {
      if (p.size() != x0.size()) throw ShapeError("coverage: point and x0 differ in length");
      up = std::max(up, p[i] - x0[i]);
      down = std::max(down, x0[i] - p[i]);
    }
    total += up + down;
  }
  return total / static_cast<double>(x0.size());
}

double coverage_max(std::span<const double> lo, std::span<const double> hi) {
  if (lo.size() != hi.size() || lo.empty()) throw ShapeError("coverage_max: range vectors differ in length");
  double s_plus = 0.0, s_minus = 0.0;
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (hi[i] < lo[i]) throw ConfigError("coverage_max: max below min");
    s_plus += hi[i];
    s_minus += lo[i];
  }
  return (s_plus - s_minus) / static_cast<double>(lo.size());
}

double prediction_coverage(std::span<const Vec> posteriors) {
  if (posteriors.empty()) return 0.0;
  const auto c = posteriors.front().size();
  double total = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    double m = 0.0;
    for (const auto& y : posteriors) m = std::max(m, y[i]);
    total += m;
  }
  return total / static_cast<double>(c);
}

double distinct_labels(std::span<const int> labels, std::size_t classes) {
  std::vector<bool> seen(classes, false);
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) throw ConfigError("distinct_labels: label out of range");
    seen[static_cast<std::size_t>(l)] = true;
  }
  return static_cast<double>(std::count(seen.begin(), seen.end(), true)) / static_cast<double>(classes);
}

double label_entropy(std::span<const int> labels, std::size_t classes) {
  if (labels.empty() || classes < 2) return 0.0;
  std::vector<double> counts(classes, 0.0);
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) throw ConfigError("label_entropy: label out of range");
    counts[static_cast<std::size_t>(l)] += 1.0;
  }
  double h = 0.0;
  const double k = static_cast<double>(labels.size());
  for (double n : counts)
    if (n > 0.0) h -= (n / k) * std::log(n / k);
  return h / std::log(static_cast<double>(classes));
}

double diversity_value(const DiversitySpec& spec, std::span<const Vec> points, std::span<const double> anchor) {
  spec.validate();
  std::vector<int> labels;
  for (const auto& p : points) labels.push_back(argmax(p));
  const std::size_t classes = points.empty() ? 0 : points.front().size();
  switch (spec.metric) {
    case Metric::DPP: return dpp(points, spec.distance);
    case Metric::APD: return apd(points, spec.distance);
    case Metric::Coverage: return coverage(points, anchor);
    case Metric::PredictionCoverage: return prediction_coverage(points);
    case Metric::DistinctLabels: return points.empty() ? 0.0 : distinct_labels(labels, classes);
    case Metric::LabelEntropy: return points.empty() ? 0.0 : label_entropy(labels, classes);
  }
  return 0.0;
}

namespace {

ad::Var pair_distance(ad::Var a, ad::Var b, BaseDistance d) {
  return d == BaseDistance::L1 ? ad::norm_l1(a - b) : ad::norm_l2(a - b);
}

}  // namespace

ad::Var diversity_term(ad::Graph& g, const DiversitySpec& spec, const std::vector<ad::Var>& points, ad::Var anchor) {
  spec.validate();
  if (!spec.differentiable()) {
    throw ConfigError(metric_name(spec.metric) + " is evaluation-only and has no gradient");
  }
  const auto k = points.size();
  ad::Graph::Scope scope(g, "diversity term");
  if (spec.metric == Metric::Coverage) {
    if (!anchor.valid()) throw ConfigError("coverage term needs an anchor point");
    if (k == 0) return g.constant(Tensor::scalar(0.0));
    std::vector<ad::Var> up, down;
    for (const auto& p : points) {
      up.push_back(p - anchor);
      down.push_back(anchor - p);
    }
    const double dim = static_cast<double>(shape_size(anchor.shape()));
    return (1.0 / dim) * (ad::sum(ad::element_max(up)) + ad::sum(ad::element_max(down)));
  }
  if (k <= 1) return g.constant(Tensor::scalar(0.0));
  if (spec.metric == Metric::APD) {
    ad::Var total;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i + 1; j < k; ++j) {
        auto d = pair_distance(points[i], points[j], spec.distance);
        total = total.valid() ? total + d : d;
      }
    return (1.0 / (static_cast<double>(k * (k - 1)) / 2.0)) * total;
  }
  // DPP: assemble K entry by entry, then differentiate through det.
  std::vector<std::vector<ad::Var>> off(k, std::vector<ad::Var>(k));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      off[i][j] = ad::reciprocal(pair_distance(points[i], points[j], spec.distance) + 1.0);
      off[j][i] = off[i][j];
    }
  auto one = g.constant(Tensor::scalar(1.0));
  std::vector<ad::Var> entries;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) entries.push_back(i == j ? one : off[i][j]);
  return ad::det(ad::reshape(ad::concat(entries), {k, k}));
}

std::vector<Vec> diversity_grad(const DiversitySpec& spec, std::span<const Vec> points, std::span<const double> anchor) {
  ad::Graph g;
  std::vector<ad::Var> vars;
  for (std::size_t i = 0; i < points.size(); ++i) vars.push_back(g.input("p" + std::to_string(i), {points[i].size()}));
  ad::Var a;
  if (spec.metric == Metric::Coverage) a = g.constant(Tensor::vector(Vec(anchor.begin(), anchor.end())));
  auto d = diversity_term(g, spec, vars, a);
  for (std::size_t i = 0; i < points.size(); ++i) g.bind(vars[i], Tensor::vector(points[i]));
  g.forward();
  std::vector<Vec> out;
  if (!g.requires_grad(d)) {
    for (const auto& p : points) out.emplace_back(p.size(), 0.0);
    return out;
  }
  g.backward(d);
  for (auto& v : vars) out.push_back(v.grad().values());
  return out;
}

std::vector<MetricRow> evaluate_metrics(std::span<const CandidateCE* const> cands, std::span<const double> x0,
                                        std::span<const double> z0, std::size_t classes) {
  std::vector<Vec> xs, zs, ys;
  std::vector<int> labels;
  for (const auto* c : cands) {
    xs.push_back(c->x);
    zs.push_back(c->z);
    ys.push_back(c->probs);
    labels.push_back(c->label);
  }
  const auto k = cands.size();
  std::vector<MetricRow> rows;
  auto add = [&](Metric m, Space s, double v) { rows.push_back({metric_name(m), space_name(s), k, v}); };
  add(Metric::DPP, Space::Input, dpp(xs));
  add(Metric::DPP, Space::Latent, dpp(zs));
  add(Metric::DPP, Space::Prediction, dpp(ys));
  add(Metric::APD, Space::Input, apd(xs));
  add(Metric::APD, Space::Latent, apd(zs));
  add(Metric::APD, Space::Prediction, apd(ys));
  add(Metric::Coverage, Space::Input, coverage(xs, x0));
  add(Metric::Coverage, Space::Latent, coverage(zs, z0));
  add(Metric::PredictionCoverage, Space::Prediction, prediction_coverage(ys));
  add(Metric::DistinctLabels, Space::Prediction, k == 0 ? 0.0 : distinct_labels(labels, classes));
  add(Metric::LabelEntropy, Space::Prediction, k == 0 ? 0.0 : label_entropy(labels, classes));
  return rows;
}

std::vector<MetricRow> evaluate_metrics(const CESet& set, std::size_t classes) {
  const auto acc = set.accepted();
  return evaluate_metrics(acc, set.x0, set.z0, classes);
}

nlohmann::json metrics_json(const std::vector<MetricRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) out.push_back({{"metric", r.metric}, {"space", r.space}, {"k", r.k}, {"value", r.value}});
  return out;
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  CsvWriter w({"metric", "space", "k", "value"});
  for (const auto& r : rows) {
    w.cell(r.metric).cell(r.space).cell(r.k).cell(r.value);
    w.end_row();
  }
  return w.str();
}

}  // namespace cluekit
