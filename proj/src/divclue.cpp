#include "cluekit/divclue.hpp"

#include <cmath>

#include "cluekit/io.hpp"

namespace cluekit {

std::string div_method_name(DivMethod m) {
  switch (m) {
    case DivMethod::Simultaneous: return "simultaneous";
    case DivMethod::Sequential: return "sequential";
    case DivMethod::Penalty: return "penalty";
  }
  return "?";
}

nlohmann::json DivRunRecord::to_json() const {
  nlohmann::json jl = nlohmann::json::array();
  for (double v : joint_loss) jl.push_back(json_number(v));
  return {{"method", div_method_name(method)},
          {"config", config.to_json()},
          {"spec", spec.to_json()},
          {"joint_loss", jl},
          {"ceset", set.to_json(true)},
          {"metrics", metrics_json(metrics)}};
}

LatentDiversity::LatentDiversity(const ModelBundle& bundle, const DiversitySpec& spec, std::size_t k,
                                 std::span<const double> x0, std::span<const double> z0) {
  spec.validate();
  if (!spec.differentiable()) throw ConfigError(metric_name(spec.metric) + " is evaluation-only and has no gradient");
  BundleGraph bg(g_, bundle);
  std::vector<ad::Var> points;
  for (std::size_t i = 0; i < k; ++i) {
    auto z = g_.input("z" + std::to_string(i), {bundle.dims.latent});
    z_.push_back(z);
    switch (spec.space) {
      case Space::Latent: points.push_back(z); break;
      case Space::Input: points.push_back(bg.decode(z)); break;
      case Space::Prediction: points.push_back(bg.predict(bg.decode(z))); break;
    }
  }
  ad::Var anchor;
  if (spec.metric == Metric::Coverage) {
    anchor = spec.space == Space::Latent ? g_.constant(Tensor::vector(Vec(z0.begin(), z0.end())))
                                         : g_.constant(Tensor::vector(Vec(x0.begin(), x0.end())));
  }
  d_ = diversity_term(g_, spec, points, anchor);
}

double LatentDiversity::value(const std::vector<Vec>& zs) {
  for (std::size_t i = 0; i < z_.size(); ++i) g_.bind(z_[i], Tensor::vector(zs[i]));
  g_.forward();
  return d_.value().item();
}

double LatentDiversity::gradient(const std::vector<Vec>& zs, std::vector<Vec>& grads) {
  const double v = value(zs);
  grads.assign(z_.size(), Vec());
  if (!g_.requires_grad(d_)) {
    for (std::size_t i = 0; i < z_.size(); ++i) grads[i].assign(zs[i].size(), 0.0);
    return v;
  }
  g_.backward(d_);
  for (std::size_t i = 0; i < z_.size(); ++i) grads[i] = z_[i].grad().values();
  return v;
}

namespace {

Vec project_r(std::span<const double> z, std::span<const double> z0, double r) {
  if (r == 0.0) return Vec(z0.begin(), z0.end());
  return project_to_ball(z, z0, r);
}

std::vector<Vec> prepared_starts(const ExperimentConfig& cfg, const CESet& set, const ModelBundle& bundle,
                                 const InitContext& ctx, const DiversitySpec* spec) {
  InitContext c = ctx;
  if (!c.bundle) c.bundle = &bundle;
  auto starts = initial_points(cfg, set.z0, c, bundle.dims.classes);
  if (cfg.n_i > 0 && spec) starts = diversity_presearch(starts, *spec, cfg.n_i, cfg.r, set.z0, cfg.lr, bundle, set.x0);
  return starts;
}

void finish(DivRunRecord& rec, const ModelBundle& bundle) {
  for (auto& c : rec.set.candidates) c.accepted = c.H < rec.set.h_threshold;
  rec.metrics = evaluate_metrics(rec.set, bundle.dims.classes);
}

// Shared sequential loop; `extra` adds a term for the new point given the
// points found so far, returning its value and adding its gradient to grad.
template <typename Extra>
DivRunRecord sequential_loop(DivMethod method, std::span<const double> x0, const ModelBundle& bundle,
                             const ExperimentConfig& cfg, const DiversitySpec& spec, const InitContext& ctx,
                             bool use_presearch, Extra extra) {
  DivRunRecord rec;
  rec.method = method;
  rec.config = cfg;
  rec.spec = spec;
  rec.set = prepare_set(x0, bundle, cfg);
  const auto& z0 = rec.set.z0;
  const auto starts = prepared_starts(cfg, rec.set, bundle, ctx, use_presearch ? &spec : nullptr);
  const bool constrained = std::isfinite(cfg.delta);
  ClueObjective obj(bundle, x0, rec.set.original_label, cfg.lambda_x, cfg.lambda_y);
  std::vector<Vec> found;
  std::vector<double> loss_sum(cfg.iters, 0.0);
  for (std::size_t t = 0; t < cfg.k; ++t) {
    Vec z = constrained ? project_to_ball(starts[t], z0, cfg.delta) : starts[t];
    CandidateCE c;
    if (cfg.trace) c.trajectory.push_back(z);
    double start_loss = 0.0;
    for (std::size_t it = 0; it < cfg.iters; ++it) {
      double loss = 0.0;
      Vec g = obj.gradient(z, &loss);
      if (cfg.lambda_d > 0.0) loss += extra(found, z, g);
      if (it == 0) start_loss = loss;
      if (cfg.trace) c.objective_trace.push_back(loss);
      loss_sum[it] += loss;
      for (std::size_t j = 0; j < z.size(); ++j) z[j] -= cfg.lr * g[j];
      if (constrained) z = project_to_ball(z, z0, cfg.delta);
      if (cfg.trace) c.trajectory.push_back(z);
    }
    double final_loss = obj.evaluate(z).loss;
    if (cfg.lambda_d > 0.0) {
      Vec scratch(z.size(), 0.0);
      final_loss += extra(found, z, scratch);
    }
    if (cfg.trace) c.objective_trace.push_back(final_loss);
    CandidateCE full = make_candidate(bundle, z, x0, z0, rec.set.original_label, cfg.lambda_x, cfg.lambda_y);
    full.index = t;
    full.z_start = constrained ? project_to_ball(starts[t], z0, cfg.delta) : starts[t];
    full.start_objective = start_loss;
    full.final_objective = final_loss;
    full.trajectory = std::move(c.trajectory);
    full.objective_trace = std::move(c.objective_trace);
    rec.set.candidates.push_back(std::move(full));
    found.push_back(z);
  }
  for (auto& v : loss_sum) v /= static_cast<double>(cfg.k);
  rec.joint_loss = std::move(loss_sum);
  finish(rec, bundle);
  return rec;
}

}  // namespace

std::vector<Vec> diversity_presearch(const std::vector<Vec>& starts, const DiversitySpec& spec, std::size_t n_i,
                                     double r, std::span<const double> z0, double lr, const ModelBundle& bundle,
                                     std::span<const double> x0) {
  if (!spec.differentiable()) throw ConfigError(metric_name(spec.metric) + " cannot drive the pre-search");
  if (n_i == 0 || starts.size() <= 1) return starts;
  LatentDiversity div(bundle, spec, starts.size(), x0, z0);
  std::vector<Vec> zs = starts;
  std::vector<Vec> grads;
  for (std::size_t s = 0; s < n_i; ++s) {
    div.gradient(zs, grads);
    for (std::size_t i = 0; i < zs.size(); ++i) {
      for (std::size_t j = 0; j < zs[i].size(); ++j) zs[i][j] += lr * grads[i][j];
      zs[i] = project_r(zs[i], z0, r);
    }
  }
  return zs;
}

DivRunRecord nabla_clue_simultaneous(std::span<const double> x0, const ModelBundle& bundle,
                                     const ExperimentConfig& cfg, const DiversitySpec& spec, const InitContext& ctx) {
  spec.validate();
  if (!spec.differentiable()) throw ConfigError(metric_name(spec.metric) + " cannot be optimized");
  DivRunRecord rec;
  rec.method = DivMethod::Simultaneous;
  rec.config = cfg;
  rec.spec = spec;
  rec.set = prepare_set(x0, bundle, cfg);
  const auto& z0 = rec.set.z0;
  const auto starts = prepared_starts(cfg, rec.set, bundle, ctx, &spec);
  const bool constrained = std::isfinite(cfg.delta);
  const std::size_t k = cfg.k;
  const bool diverse = cfg.lambda_d > 0.0;

  std::vector<Vec> zs;
  for (const auto& s : starts) zs.push_back(constrained ? project_to_ball(s, z0, cfg.delta) : s);
  std::vector<std::unique_ptr<ClueObjective>> objs;
  for (std::size_t i = 0; i < k; ++i) {
    objs.push_back(std::make_unique<ClueObjective>(bundle, x0, rec.set.original_label, cfg.lambda_x, cfg.lambda_y));
  }
  std::unique_ptr<LatentDiversity> div;
  if (diverse) div = std::make_unique<LatentDiversity>(bundle, spec, k, x0, z0);

  std::vector<std::vector<Vec>> traj(k);
  std::vector<std::vector<double>> losses(k);
  std::vector<double> start_loss(k, 0.0);
  if (cfg.trace)
    for (std::size_t i = 0; i < k; ++i) traj[i].push_back(zs[i]);
  std::vector<Vec> dgrad;
  for (std::size_t it = 0; it < cfg.iters; ++it) {
    std::vector<Vec> grads(k);
    double mean_loss = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      double loss = 0.0;
      grads[i] = objs[i]->gradient(zs[i], &loss);
      if (it == 0) start_loss[i] = loss;
      if (cfg.trace) losses[i].push_back(loss);
      mean_loss += loss;
    }
    mean_loss /= static_cast<double>(k);
    double d = 0.0;
    if (diverse) d = div->gradient(zs, dgrad);
    rec.joint_loss.push_back(diverse ? mean_loss - cfg.lambda_d * d : mean_loss);
    const double w = static_cast<double>(k) * cfg.lambda_d;
    for (std::size_t i = 0; i < k; ++i) {
      auto& z = zs[i];
      if (diverse) {
        for (std::size_t j = 0; j < z.size(); ++j) z[j] -= cfg.lr * (grads[i][j] - w * dgrad[i][j]);
      } else {
        for (std::size_t j = 0; j < z.size(); ++j) z[j] -= cfg.lr * grads[i][j];
      }
      if (constrained) z = project_to_ball(z, z0, cfg.delta);
      if (cfg.trace) traj[i].push_back(z);
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    const double final_loss = objs[i]->evaluate(zs[i]).loss;
    if (cfg.trace) losses[i].push_back(final_loss);
    CandidateCE c = make_candidate(bundle, zs[i], x0, z0, rec.set.original_label, cfg.lambda_x, cfg.lambda_y);
    c.index = i;
    c.z_start = constrained ? project_to_ball(starts[i], z0, cfg.delta) : starts[i];
    c.start_objective = start_loss[i];
    c.final_objective = final_loss;
    c.trajectory = std::move(traj[i]);
    c.objective_trace = std::move(losses[i]);
    rec.set.candidates.push_back(std::move(c));
  }
  finish(rec, bundle);
  return rec;
}

DivRunRecord nabla_clue_sequential(std::span<const double> x0, const ModelBundle& bundle,
                                   const ExperimentConfig& cfg, const DiversitySpec& spec, const InitContext& ctx) {
  spec.validate();
  if (!spec.differentiable()) throw ConfigError(metric_name(spec.metric) + " cannot be optimized");
  const Vec z0 = encode(bundle, x0);
  // One diversity graph per set size, built on first use.
  std::vector<std::unique_ptr<LatentDiversity>> graphs(cfg.k + 1);
  auto extra = [&](const std::vector<Vec>& found, const Vec& z, Vec& g) {
    if (found.empty()) return 0.0;
    const auto n = found.size() + 1;
    if (!graphs[n]) graphs[n] = std::make_unique<LatentDiversity>(bundle, spec, n, x0, z0);
    std::vector<Vec> all = found;
    all.push_back(z);
    std::vector<Vec> dg;
    const double d = graphs[n]->gradient(all, dg);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] -= cfg.lambda_d * dg.back()[j];
    return -cfg.lambda_d * d;
  };
  return sequential_loop(DivMethod::Sequential, x0, bundle, cfg, spec, ctx, true, extra);
}

DivRunRecord nabla_clue_penalty(std::span<const double> x0, const ModelBundle& bundle, const ExperimentConfig& cfg,
                                const InitContext& ctx, double eps) {
  if (!(eps > 0.0)) throw ConfigError("penalty clamp must be > 0");
  DiversitySpec spec;  // recorded for the evaluation table only
  auto extra = [&](const std::vector<Vec>& found, const Vec& z, Vec& g) {
    double total = 0.0;
    for (const auto& f : found) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < z.size(); ++j) d2 += (z[j] - f[j]) * (z[j] - f[j]);
      const double d = std::sqrt(d2);
      if (d <= eps) {
        total += cfg.lambda_d / eps;
        continue;
      }
      total += cfg.lambda_d / d;
      // d/dz (lambda/d) = -lambda (z - f) / d^3
      const double s = -cfg.lambda_d / (d * d * d);
      for (std::size_t j = 0; j < z.size(); ++j) g[j] += s * (z[j] - f[j]);
    }
    return total;
  };
  return sequential_loop(DivMethod::Penalty, x0, bundle, cfg, spec, ctx, false, extra);
}

std::string ablation_csv(const std::vector<DivRunRecord>& runs) {
  CsvWriter w({"lambda_d", "metric", "space", "value", "mean_H", "mean_d_x"});
  for (const auto& r : runs) {
    const auto acc = r.set.accepted();
    double mh = 0.0, md = 0.0;
    for (const auto* c : acc) {
      mh += c->H;
      md += c->d_x;
    }
    if (!acc.empty()) {
      mh /= static_cast<double>(acc.size());
      md /= static_cast<double>(acc.size());
    }
    for (const auto& m : r.metrics) {
      w.cell(r.config.lambda_d).cell(m.metric).cell(m.space).cell(m.value).cell(mh).cell(md);
      w.end_row();
    }
  }
  return w.str();
}

}  // namespace cluekit
