#include "cluekit/glam.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "cluekit/io.hpp"
#include "cluekit/kernels.hpp"

namespace cluekit {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void require_rows(const Tensor& t, const std::string& what) {
  if (t.rank() != 2 || t.rows() == 0) throw ConfigError(what + " is empty");
}

Vec row_mean(const Tensor& t) {
  Vec m(t.cols(), 0.0);
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[c] += t.at(r, c);
  for (auto& v : m) v /= static_cast<double>(t.rows());
  return m;
}

Tensor subsample(const Tensor& t, std::size_t max_rows) {
  if (t.rows() <= max_rows) return t;
  Tensor out(Shape{max_rows, t.cols()});
  for (std::size_t i = 0; i < max_rows; ++i) {
    const auto src = t.row(i * t.rows() / max_rows);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Vec to_vec(const nlohmann::json& j) {
  Vec v;
  for (const auto& e : j) v.push_back(json_to_double(e));
  return v;
}

nlohmann::json from_vec(std::span<const double> v) {
  auto a = nlohmann::json::array();
  for (double x : v) a.push_back(json_number(x));
  return a;
}

// Candidate whose input is given directly rather than decoded.
CandidateCE candidate_from_input(const ModelBundle& bundle, Vec x, Vec z, std::span<const double> x0,
                                 std::span<const double> z0, int group, double lambda_x) {
  CandidateCE c;
  c.z = std::move(z);
  c.x = std::move(x);
  c.probs = predict_probs(bundle, c.x);
  c.H = entropy(c.probs);
  c.d_x = kernels::distance_l1(c.x, x0);
  c.d_y = -std::log(std::max(c.probs[static_cast<std::size_t>(group)], 1e-300));
  c.rho = z0.empty() ? 0.0 : kernels::distance_l2(c.z, z0);
  c.cost = c.H + lambda_x * c.d_x;
  c.label = argmax(c.probs);
  return c;
}

}  // namespace

void MapperHyper::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("mapper lr must be finite and > 0");
  if (!(lambda_theta >= 0.0) || !std::isfinite(lambda_theta)) throw ConfigError("lambda_theta must be finite and >= 0");
  if (max_certain < 1) throw ConfigError("max_certain must be >= 1");
}

nlohmann::json MapperHyper::to_json() const {
  return {{"lr", lr}, {"steps", steps}, {"lambda_theta", lambda_theta}, {"max_certain", max_certain}};
}

nlohmann::json MapperParams::to_json() const {
  return {{"variant", variant},
          {"source", source},
          {"target", target},
          {"lambda_theta", lambda_theta},
          {"theta", from_vec(theta)},
          {"theta_init", from_vec(theta_init)},
          {"report", {{"loss_curve", from_vec(loss_curve)}, {"train_ms", train_ms}}}};
}

MapperParams MapperParams::from_json(const nlohmann::json& j) {
  try {
    MapperParams m;
    m.variant = j.value("variant", "glam");
    m.source = j.at("source").get<int>();
    m.target = j.at("target").get<int>();
    m.lambda_theta = json_to_double(j.at("lambda_theta"));
    m.theta = to_vec(j.at("theta"));
    if (j.contains("theta_init")) m.theta_init = to_vec(j["theta_init"]);
    if (j.contains("report")) {
      m.loss_curve = to_vec(j["report"].value("loss_curve", nlohmann::json::array()));
      m.train_ms = j["report"].value("train_ms", 0.0);
    }
    for (double v : m.theta)
      if (!std::isfinite(v)) throw NumericalError("mapper theta is not finite");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("mapper json: ") + e.what());
  }
}

Vec latent_dbm(const ModelBundle& bundle, const Tensor& x_uncertain, const Tensor& x_certain) {
  require_rows(x_uncertain, "uncertain group");
  require_rows(x_certain, "certain group");
  const Vec mu = row_mean(encode_batch(bundle, x_uncertain));
  const Vec mc = row_mean(encode_batch(bundle, x_certain));
  Vec d(mu.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = mc[i] - mu[i];
  return d;
}

std::size_t nearest_row(const Tensor& rows, std::span<const double> q) {
  require_rows(rows, "search set");
  if (rows.cols() != q.size()) throw ShapeError("nearest_row: query length mismatch");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    const auto row = rows.row(r);
    double d = 0.0;
    for (std::size_t c = 0; c < q.size(); ++c) d += (row[c] - q[c]) * (row[c] - q[c]);
    if (d < best_d) {
      best_d = d;
      best = r;
    }
  }
  return best;
}

namespace {

class MapperGraph {
 public:
  // lambda_theta = 0 leaves the l1 term out of the graph.
  MapperGraph(const ModelBundle& bundle, const Tensor& z_uncertain, std::size_t input_dim, double lambda_theta) {
    BundleGraph bg(g_, bundle);
    theta_ = g_.input("theta", {z_uncertain.cols()});
    target_ = g_.input("nearest certain rows", {z_uncertain.rows(), input_dim}, false);
    auto zc = g_.constant(z_uncertain);
    auto x = bg.decode(zc + theta_);
    ad::Var fit;
    {
      ad::Graph::Scope s(g_, "reconstruction term");
      fit = (1.0 / static_cast<double>(z_uncertain.rows())) * ad::squared_norm_l2(x - target_);
    }
    loss_ = lambda_theta > 0.0 ? fit + lambda_theta * ad::norm_l1(theta_) : fit;
  }

  MapperLoss run(const Tensor& target, std::span<const double> theta) {
    g_.bind(theta_, Tensor::vector(Vec(theta.begin(), theta.end())));
    g_.bind(target_, target);
    g_.forward();
    g_.backward(loss_);
    return {loss_.value().item(), theta_.grad().values()};
  }

 private:
  ad::Graph g_;
  ad::Var theta_, target_, loss_;
};

Tensor nearest_targets(const ModelBundle& bundle, const Tensor& z_uncertain, const Tensor& x_certain,
                       std::span<const double> theta) {
  Tensor shifted = z_uncertain;
  for (std::size_t r = 0; r < shifted.rows(); ++r)
    for (std::size_t c = 0; c < shifted.cols(); ++c) shifted.at(r, c) += theta[c];
  const Tensor decoded = decode_batch(bundle, shifted);
  Tensor target(Shape{z_uncertain.rows(), x_certain.cols()});
  for (std::size_t r = 0; r < decoded.rows(); ++r) {
    const auto src = x_certain.row(nearest_row(x_certain, decoded.row(r)));
    std::copy(src.begin(), src.end(), target.row(r).begin());
  }
  return target;
}

}  // namespace

MapperLoss mapper_loss(const ModelBundle& bundle, const Tensor& z_uncertain, const Tensor& x_certain,
                       std::span<const double> theta, double lambda_theta) {
  require_rows(z_uncertain, "uncertain group");
  require_rows(x_certain, "certain group");
  MapperGraph mg(bundle, z_uncertain, x_certain.cols(), lambda_theta);
  return mg.run(nearest_targets(bundle, z_uncertain, x_certain, theta), theta);
}

MapperParams train_mapper(const Tensor& x_uncertain, const Tensor& x_certain, const ModelBundle& bundle,
                          const MapperHyper& hyper, int source, int target) {
  hyper.validate();
  if (x_uncertain.rank() != 2 || x_uncertain.rows() == 0)
    throw ConfigError("uncertain group " + std::to_string(source) + " is empty");
  if (x_certain.rank() != 2 || x_certain.rows() == 0)
    throw ConfigError("certain group " + std::to_string(target) + " is empty");
  if (x_uncertain.cols() != bundle.dims.input || x_certain.cols() != bundle.dims.input)
    throw ShapeError("train_mapper: inputs do not match the bundle's input dimension");
  const auto t0 = Clock::now();
  MapperParams m;
  m.source = source;
  m.target = target;
  m.lambda_theta = hyper.lambda_theta;
  m.theta_init = latent_dbm(bundle, x_uncertain, x_certain);
  m.theta = m.theta_init;
  const Tensor zu = encode_batch(bundle, x_uncertain);
  const Tensor xc = subsample(x_certain, hyper.max_certain);
  // Proximal gradient: a plain step on the reconstruction term, then
  // soft-thresholding for the l1 term.
  MapperGraph mg(bundle, zu, xc.cols(), 0.0);
  const double shrink = hyper.lr * hyper.lambda_theta;
  for (std::size_t s = 0; s <= hyper.steps; ++s) {
    auto res = mg.run(nearest_targets(bundle, zu, xc, m.theta), m.theta);
    const double loss = res.loss + hyper.lambda_theta * kernels::norm_l1(Tensor::vector(m.theta));
    if (!std::isfinite(loss))
      throw NumericalError("mapper " + std::to_string(source) + "->" + std::to_string(target) +
                           ": loss is not finite at step " + std::to_string(s));
    m.loss_curve.push_back(loss);
    if (s == hyper.steps) break;
    for (std::size_t i = 0; i < m.theta.size(); ++i) {
      const double u = m.theta[i] - hyper.lr * res.grad[i];
      m.theta[i] = std::copysign(std::max(std::abs(u) - shrink, 0.0), u);
    }
  }
  m.train_ms = ms_since(t0);
  return m;
}

CandidateCE apply_mapper(const MapperParams& mapper, std::span<const double> x, const ModelBundle& bundle,
                         double lambda_x) {
  if (x.size() != bundle.dims.input) throw ShapeError("apply_mapper: input has the wrong length");
  if (mapper.theta.size() != bundle.dims.latent) throw ShapeError("apply_mapper: theta has the wrong length");
  const Vec z0 = encode(bundle, x);
  Vec z = z0;
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += mapper.theta[i];
  return make_candidate(bundle, z, x, z0, mapper.source, lambda_x, 0.0);
}

CandidateCE apply_best_mapper(const std::vector<MapperParams>& mappers, std::span<const double> x,
                              const ModelBundle& bundle, double lambda_x, std::size_t top_n) {
  if (mappers.empty()) throw ConfigError("no mappers to apply");
  std::vector<int> allowed;
  if (top_n > 0) {
    const auto probs = predict(bundle, x).probs;
    std::vector<int> order(probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return probs[a] > probs[b]; });
    allowed.assign(order.begin(), order.begin() + std::min(top_n, order.size()));
  }
  CandidateCE best;
  bool have = false;
  for (const auto& m : mappers) {
    if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), m.source) == allowed.end()) continue;
    auto c = apply_mapper(m, x, bundle, lambda_x);
    if (!have || c.cost < best.cost) {
      best = std::move(c);
      have = true;
    }
  }
  if (!have) throw ConfigError("no mapper matches the top-n predicted classes");
  return best;
}

std::string baseline_name(BaselineKind k) {
  switch (k) {
    case BaselineKind::DbmInput: return "dbm-input";
    case BaselineKind::DbmLatent: return "dbm-latent";
    case BaselineKind::NnInput: return "nn-input";
    case BaselineKind::NnLatent: return "nn-latent";
  }
  return "?";
}

BaselineKind baseline_from_name(const std::string& s) {
  for (auto k : {BaselineKind::DbmInput, BaselineKind::DbmLatent, BaselineKind::NnInput, BaselineKind::NnLatent})
    if (baseline_name(k) == s) return k;
  throw ConfigError("unknown baseline '" + s + "'");
}

nlohmann::json Baseline::to_json() const {
  nlohmann::json j = {{"kind", baseline_name(kind)}, {"source", source}, {"target", target}};
  if (kind == BaselineKind::DbmInput || kind == BaselineKind::DbmLatent) j["shift"] = from_vec(shift);
  else j["search_set_size"] = certain.rows();
  return j;
}

Baseline dbm_baseline(BaselineKind kind, const Tensor& x_uncertain, const Tensor& x_certain, const ModelBundle& bundle,
                      int source, int target) {
  if (x_uncertain.rank() != 2 || x_uncertain.rows() == 0)
    throw ConfigError("uncertain group " + std::to_string(source) + " is empty");
  if (x_certain.rank() != 2 || x_certain.rows() == 0)
    throw ConfigError("certain group " + std::to_string(target) + " is empty");
  Baseline b;
  b.kind = kind;
  b.source = source;
  b.target = target;
  if (kind == BaselineKind::DbmLatent) {
    b.shift = latent_dbm(bundle, x_uncertain, x_certain);
  } else if (kind == BaselineKind::DbmInput) {
    const Vec mu = row_mean(x_uncertain), mc = row_mean(x_certain);
    b.shift.resize(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) b.shift[i] = mc[i] - mu[i];
  } else {
    throw ConfigError("dbm_baseline: " + baseline_name(kind) + " is not a DBM baseline");
  }
  return b;
}

Baseline nn_baseline(BaselineKind kind, const Tensor& x_certain, const ModelBundle& bundle, int source, int target) {
  if (x_certain.rank() != 2 || x_certain.rows() == 0)
    throw ConfigError("certain group " + std::to_string(target) + " is empty");
  Baseline b;
  b.kind = kind;
  b.source = source;
  b.target = target;
  b.certain_x = x_certain;
  if (kind == BaselineKind::NnInput) b.certain = x_certain;
  else if (kind == BaselineKind::NnLatent) b.certain = encode_batch(bundle, x_certain);
  else throw ConfigError("nn_baseline: " + baseline_name(kind) + " is not a nearest-neighbour baseline");
  return b;
}

CandidateCE apply_baseline(const Baseline& b, std::span<const double> x, const ModelBundle& bundle,
                           double lambda_x) {
  if (x.size() != bundle.dims.input) throw ShapeError("apply_baseline: input has the wrong length");
  const Vec z0 = encode(bundle, x);
  switch (b.kind) {
    case BaselineKind::DbmLatent: {
      Vec z = z0;
      for (std::size_t i = 0; i < z.size(); ++i) z[i] += b.shift[i];
      return make_candidate(bundle, z, x, z0, b.source, lambda_x, 0.0);
    }
    case BaselineKind::DbmInput: {
      Vec xs(x.begin(), x.end());
      for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = std::clamp(xs[i] + b.shift[i], 0.0, 1.0);
      return make_candidate(bundle, encode(bundle, xs), x, z0, b.source, lambda_x, 0.0);
    }
    case BaselineKind::NnInput: {
      const auto r = nearest_row(b.certain, x);
      Vec xc(b.certain.row(r).begin(), b.certain.row(r).end());
      Vec zc = encode(bundle, xc);
      return candidate_from_input(bundle, std::move(xc), std::move(zc), x, z0, b.source, lambda_x);
    }
    case BaselineKind::NnLatent: {
      const auto r = nearest_row(b.certain, z0);
      return make_candidate(bundle, b.certain.row(r), x, z0, b.source, lambda_x, 0.0);
    }
  }
  throw ConfigError("unknown baseline");
}

Tensor ce_targets(const std::vector<CESet>& sets, int group) {
  std::vector<double> flat;
  std::size_t rows = 0, cols = 0;
  for (const auto& s : sets) {
    const CandidateCE* best = nullptr;
    for (const auto* c : s.accepted())
      if (!best || c->cost < best->cost) best = c;
    if (!best || best->label != group) continue;
    cols = best->x.size();
    flat.insert(flat.end(), best->x.begin(), best->x.end());
    ++rows;
  }
  if (rows == 0) return Tensor();
  return Tensor::matrix(rows, cols, std::move(flat));
}

const SchemeSummary& ComparisonTable::find(const std::string& scheme) const {
  for (const auto& s : summary)
    if (s.scheme == scheme) return s;
  throw ConfigError("no scheme '" + scheme + "' in the comparison table");
}

std::string ComparisonTable::csv() const {
  CsvWriter w({"scheme", "point", "group", "H", "d_x", "cost", "label", "time_ms", "valid_fraction", "train_ms"});
  for (const auto& r : rows) {
    w.cell(r.scheme).cell(r.point).cell(r.group).cell(r.H).cell(r.d_x).cell(r.cost).cell(r.label).cell(r.time_ms);
    w.cell("").cell("");
    w.end_row();
  }
  for (const auto& s : summary) {
    w.cell(s.scheme).cell("summary").cell("").cell(s.mean_H).cell(s.mean_d_x).cell(s.mean_cost).cell("");
    w.cell(s.median_time_ms).cell(s.valid_fraction).cell(s.train_ms);
    w.end_row();
  }
  return w.str();
}

ComparisonTable evaluate_schemes(const Tensor& inputs, const std::vector<int>& groups,
                                 const std::vector<NamedScheme>& schemes, double lambda_x, std::size_t repetitions) {
  if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
  const std::size_t n = inputs.size() == 0 ? 0 : inputs.rows();
  if (groups.size() != n) throw ShapeError("evaluate_schemes: one group per input required");
  ComparisonTable table;
  for (const auto& s : schemes) {
    std::vector<std::vector<double>> times(n);
    std::vector<double> per_ce;
    std::vector<CandidateCE> out(n);
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
      const auto all0 = Clock::now();
      for (std::size_t i = 0; i < n; ++i) {
        const auto t0 = Clock::now();
        auto c = s.fn(inputs.row(i), groups[i]);
        times[i].push_back(ms_since(t0));
        if (rep == 0) out[i] = std::move(c);
      }
      if (n > 0) per_ce.push_back(ms_since(all0) / static_cast<double>(n));
    }
    SchemeSummary sum;
    sum.scheme = s.name;
    sum.n = n;
    sum.train_ms = s.train_ms;
    std::size_t valid = 0;
    for (std::size_t i = 0; i < n; ++i) {
      SchemeRow r;
      r.scheme = s.name;
      r.point = i;
      r.group = groups[i];
      r.H = out[i].H;
      r.d_x = out[i].d_x;
      r.cost = r.H + lambda_x * r.d_x;
      r.label = out[i].label;
      r.time_ms = median(times[i]);
      sum.mean_H += r.H;
      sum.mean_d_x += r.d_x;
      sum.mean_cost += r.cost;
      if (r.label == r.group) ++valid;
      table.rows.push_back(r);
    }
    if (n > 0) {
      sum.mean_H /= static_cast<double>(n);
      sum.mean_d_x /= static_cast<double>(n);
      sum.mean_cost /= static_cast<double>(n);
      sum.valid_fraction = static_cast<double>(valid) / static_cast<double>(n);
      sum.median_time_ms = median(per_ce);
    }
    table.summary.push_back(sum);
  }
  return table;
}

double median(std::vector<double> v) {
  if (v.empty()) throw ConfigError("median of an empty set");
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace {
std::vector<double> ranks(std::span<const double> a) {
  std::vector<std::size_t> idx(a.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto x, auto y) { return a[x] < a[y]; });
  std::vector<double> r(a.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && a[idx[j + 1]] == a[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
    i = j + 1;
  }
  return r;
}
}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw ConfigError("spearman needs two equal-length series of >= 2 values");
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace cluekit
