#include "cluekit/clue.hpp"

#include <algorithm>
#include <map>
#include <thread>

#include "cluekit/io.hpp"
#include "cluekit/kernels.hpp"

namespace cluekit {

std::string scheme_name(Scheme s) { return "S" + std::to_string(static_cast<int>(s)); }

Scheme scheme_from_name(const std::string& name) {
  if (name.size() == 2 && (name[0] == 'S' || name[0] == 's') && name[1] >= '1' && name[1] <= '5') {
    return static_cast<Scheme>(name[1] - '0');
  }
  throw ConfigError("unknown initialization scheme '" + name + "' (expected S1..S5)");
}

void ExperimentConfig::validate() const {
  if (!(delta > 0.0)) throw ConfigError("delta must be > 0 (inf allowed)");
  if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("r must be finite and >= 0");
  if (k < 1) throw ConfigError("k must be >= 1");
  if (!(lambda_x >= 0.0) || !(lambda_y >= 0.0) || !(lambda_d >= 0.0)) throw ConfigError("lambda weights must be >= 0");
  if (!std::isfinite(lambda_x) || !std::isfinite(lambda_y) || !std::isfinite(lambda_d)) {
    throw ConfigError("lambda weights must be finite");
  }
  if (iters < 1) throw ConfigError("iters must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be finite and > 0");
  if (h_threshold && std::isnan(*h_threshold)) throw ConfigError("h_threshold must not be NaN");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

nlohmann::json ExperimentConfig::to_json() const {
  return {{"delta", json_number(delta)},
          {"k", k},
          {"r", r},
          {"scheme", scheme_name(scheme)},
          {"lambda_x", lambda_x},
          {"lambda_y", lambda_y},
          {"lambda_d", lambda_d},
          {"n_i", n_i},
          {"lr", lr},
          {"iters", iters},
          {"h_threshold", h_threshold ? json_number(*h_threshold) : nlohmann::json(nullptr)},
          {"seed", seed}};
}

void ExperimentConfig::update(const nlohmann::json& j) {
  static const char* known[] = {"delta", "k",     "r",           "scheme", "lambda_x", "lambda_y", "lambda_d",
                                "n_i",   "lr",    "iters",       "h_threshold", "seed", "trace", "threads"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return it.key() == k; }) == std::end(known)) {
      throw ConfigError("unknown experiment key '" + it.key() + "'");
    }
  }
  try {
    if (j.contains("delta")) delta = json_to_double(j["delta"]);
    if (j.contains("k")) k = j["k"].get<std::size_t>();
    if (j.contains("r")) r = json_to_double(j["r"]);
    if (j.contains("scheme")) scheme = scheme_from_name(j["scheme"].get<std::string>());
    if (j.contains("lambda_x")) lambda_x = json_to_double(j["lambda_x"]);
    if (j.contains("lambda_y")) lambda_y = json_to_double(j["lambda_y"]);
    if (j.contains("lambda_d")) lambda_d = json_to_double(j["lambda_d"]);
    if (j.contains("n_i")) n_i = j["n_i"].get<std::size_t>();
    if (j.contains("lr")) lr = json_to_double(j["lr"]);
    if (j.contains("iters")) iters = j["iters"].get<std::size_t>();
    if (j.contains("h_threshold")) {
      if (j["h_threshold"].is_null()) h_threshold.reset();
      else h_threshold = json_to_double(j["h_threshold"]);
    }
    if (j.contains("seed")) seed = j["seed"].get<std::uint64_t>();
    if (j.contains("trace")) trace = j["trace"].get<bool>();
    if (j.contains("threads")) threads = j["threads"].get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.update(j);
  return c;
}

double resolve_h_threshold(const ExperimentConfig& cfg, const ModelBundle& bundle) {
  if (cfg.h_threshold) return *cfg.h_threshold;
  if (bundle.report.contains("train_median_entropy")) return bundle.report["train_median_entropy"].get<double>();
  return kInf;
}

// ---- candidates -------------------------------------------------------------

nlohmann::json CandidateCE::to_json(bool with_trajectory) const {
  nlohmann::json j = {{"index", index},
                      {"z", z},
                      {"x", x},
                      {"posterior", probs},
                      {"H", H},
                      {"d_x", d_x},
                      {"d_y", d_y},
                      {"rho", rho},
                      {"cost", cost},
                      {"label", label},
                      {"accepted", accepted},
                      {"z_start", z_start},
                      {"start_objective", start_objective},
                      {"final_objective", final_objective}};
  if (with_trajectory && !trajectory.empty()) {
    j["trajectory"] = trajectory;
    j["objective_trace"] = objective_trace;
  }
  return j;
}

std::vector<const CandidateCE*> CESet::accepted() const {
  std::vector<const CandidateCE*> out;
  for (const auto& c : candidates)
    if (c.accepted) out.push_back(&c);
  return out;
}

nlohmann::json CESet::to_json(bool with_trajectories) const {
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& c : candidates) cands.push_back(c.to_json(with_trajectories));
  return {{"config", config.to_json()},
          {"h_threshold", json_number(h_threshold)},
          {"x0", x0},
          {"z0", z0},
          {"original_label", original_label},
          {"original_entropy", original_entropy},
          {"candidates", cands}};
}

CESet CESet::from_json(const nlohmann::json& j) {
  CESet s;
  s.config = ExperimentConfig::from_json(j.at("config"));
  s.h_threshold = json_to_double(j.at("h_threshold"));
  s.x0 = j.at("x0").get<Vec>();
  s.z0 = j.at("z0").get<Vec>();
  s.original_label = j.at("original_label");
  s.original_entropy = j.at("original_entropy");
  for (const auto& c : j.at("candidates")) {
    CandidateCE ce;
    ce.index = c.at("index");
    ce.z = c.at("z").get<Vec>();
    ce.x = c.at("x").get<Vec>();
    ce.probs = c.at("posterior").get<Vec>();
    ce.H = c.at("H");
    ce.d_x = c.at("d_x");
    ce.d_y = c.at("d_y");
    ce.rho = c.at("rho");
    ce.cost = c.at("cost");
    ce.label = c.at("label");
    ce.accepted = c.at("accepted");
    ce.z_start = c.at("z_start").get<Vec>();
    ce.start_objective = c.at("start_objective");
    ce.final_objective = c.at("final_objective");
    if (c.contains("trajectory")) {
      ce.trajectory = c["trajectory"].get<std::vector<Vec>>();
      ce.objective_trace = c["objective_trace"].get<std::vector<double>>();
    }
    s.candidates.push_back(std::move(ce));
  }
  return s;
}

CandidateCE make_candidate(const ModelBundle& bundle, std::span<const double> z, std::span<const double> x0,
                           std::span<const double> z0, int original_label, double lambda_x, double lambda_y) {
  CandidateCE c;
  c.z.assign(z.begin(), z.end());
  c.x = decode(bundle, z);
  c.probs = predict_probs(bundle, c.x);
  c.H = entropy(c.probs);
  c.d_x = kernels::distance_l1(c.x, x0);
  c.d_y = -std::log(std::max(c.probs[static_cast<std::size_t>(original_label)], 1e-300));
  c.rho = kernels::distance_l2(z, z0);
  c.cost = c.H + lambda_x * c.d_x;
  if (lambda_y > 0.0) c.cost += lambda_y * c.d_y;
  c.label = argmax(c.probs);
  return c;
}

// ---- objective --------------------------------------------------------------

ClueObjective::ClueObjective(const ModelBundle& bundle, std::span<const double> x0, int label, double lambda_x,
                             double lambda_y)
    : latent_(bundle.dims.latent), use_dy_(lambda_y > 0.0) {
  if (x0.size() != bundle.dims.input) throw ShapeError("objective: x0 has the wrong length");
  BundleGraph bg(g_, bundle);
  z_ = g_.input("z", {latent_});
  auto x0c = g_.constant(Tensor::vector(Vec(x0.begin(), x0.end())));
  ad::Var x, p;
  {
    ad::Graph::Scope s(g_, "entropy term");
    x = bg.decode(z_);
    p = bg.predict(x);
    h_ = BundleGraph::entropy(p);
  }
  {
    ad::Graph::Scope s(g_, "input distance term");
    dx_ = ad::norm_l1(x - x0c);
  }
  loss_ = h_ + lambda_x * dx_;
  if (use_dy_) {
    ad::Graph::Scope s(g_, "prediction distance term");
    dy_ = -ad::log(ad::pick(p, static_cast<std::size_t>(label)));
    loss_ = loss_ + lambda_y * dy_;
  }
}

ClueObjective::Terms ClueObjective::evaluate(std::span<const double> z) {
  if (z.size() != latent_) throw ShapeError("objective: z has the wrong length");
  g_.forward({{z_, Tensor::vector(Vec(z.begin(), z.end()))}});
  return {loss_.value().item(), h_.value().item(), dx_.value().item(), use_dy_ ? dy_.value().item() : 0.0};
}

Vec ClueObjective::gradient(std::span<const double> z, double* loss) {
  const auto t = evaluate(z);
  if (loss) *loss = t.loss;
  g_.backward(loss_);
  return z_.grad().values();
}

ObjectiveValue objective(const ModelBundle& bundle, std::span<const double> z, std::span<const double> x0,
                         double lambda_x, double lambda_y) {
  const int label = argmax(predict(bundle, x0).probs);
  ClueObjective obj(bundle, x0, label, lambda_x, lambda_y);
  ObjectiveValue v;
  v.grad = obj.gradient(z, &v.loss);
  return v;
}

Vec project_to_ball(std::span<const double> z, std::span<const double> z0, double delta) {
  if (z.size() != z0.size()) throw ShapeError("project_to_ball: z and z0 differ in length");
  const double dist = kernels::distance_l2(z, z0);
  if (dist <= delta) return Vec(z.begin(), z.end());
  Vec out(z.size());
  double s = delta / dist;
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z0[i] + s * (z[i] - z0[i]);
  // Rounding can leave the result a hair outside, so a second projection
  // would move it again; shrink the scale until it lands inside.
  for (double step = 0x1p-52; kernels::distance_l2(out, z0) > delta; step *= 2.0) {
    s *= 1.0 - step;
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = z0[i] + s * (z[i] - z0[i]);
  }
  return out;
}

// ---- initialization ---------------------------------------------------------

namespace {

Vec along(std::span<const double> z0, std::span<const double> dir, double radius) {
  Vec z(z0.begin(), z0.end());
  for (std::size_t j = 0; j < z.size(); ++j) z[j] += radius * dir[j];
  return z;
}

// Point at arc length `target` along normalized ascent on p(cls | decode(z)).
Vec ascent_path_point(const ModelBundle& bundle, std::span<const double> z0, int cls, double r, double target,
                      std::size_t steps) {
  ad::Graph g;
  BundleGraph bg(g, bundle);
  auto z = g.input("z", {bundle.dims.latent});
  auto p = ad::pick(bg.predict(bg.decode(z)), static_cast<std::size_t>(cls));
  const double h = r / static_cast<double>(steps);
  Vec cur(z0.begin(), z0.end());
  double travelled = 0.0;
  while (travelled < target) {
    g.forward({{z, Tensor::vector(cur)}});
    g.backward(p);
    const Vec grad = z.grad().values();
    const double n = kernels::norm_l2(Tensor::vector(grad));
    if (n == 0.0) break;
    const double step = std::min(h, target - travelled);
    for (std::size_t j = 0; j < cur.size(); ++j) cur[j] += step * grad[j] / n;
    travelled += step;
  }
  return project_to_ball(cur, z0, r);
}

}  // namespace

Vec init_scheme(Scheme scheme, std::span<const double> z0, double r, std::size_t i, std::size_t k,
                const InitContext& ctx, Rng& rng) {
  if (!(r >= 0.0)) throw ConfigError("init_scheme: r must be >= 0");
  if (r == 0.0) return Vec(z0.begin(), z0.end());
  const auto m = z0.size();
  switch (scheme) {
    case Scheme::S1: {
      std::uniform_real_distribution<double> u(0.0, r);
      const double radius = u(rng);
      return along(z0, random_direction(rng, m), radius);
    }
    case Scheme::S3: {
      std::normal_distribution<double> normal(0.0, r / 2.0);
      double radius;
      do radius = std::abs(normal(rng));
      while (radius > r);
      return along(z0, random_direction(rng, m), radius);
    }
    case Scheme::S4: {
      std::uniform_real_distribution<double> u(-r, r);
      Vec d(m);
      while (true) {
        for (auto& v : d) v = u(rng);
        if (kernels::norm_l2(Tensor::vector(d)) <= r) break;
      }
      Vec z(z0.begin(), z0.end());
      for (std::size_t j = 0; j < m; ++j) z[j] += d[j];
      return z;
    }
    case Scheme::S2:
    case Scheme::S5: {
      if (!ctx.bundle) throw ConfigError("init_scheme: path schemes need the bundle in the context");
      const std::size_t classes = ctx.bundle->dims.classes;
      const auto cls = static_cast<int>(i % classes);
      const double j = static_cast<double>(i / classes + 1);
      const double paths = static_cast<double>(std::max<std::size_t>(1, (k + classes - 1) / classes));
      const double frac = j / paths;
      if (scheme == Scheme::S5) return ascent_path_point(*ctx.bundle, z0, cls, r, frac * r, ctx.s5_steps);
      if (!ctx.certain_latents || !ctx.certain_labels) throw ConfigError("init_scheme: S2 needs certain training latents");
      const Tensor& lat = *ctx.certain_latents;
      std::size_t best = lat.rows();
      double best_d = kInf;
      for (std::size_t n = 0; n < lat.rows(); ++n) {
        if ((*ctx.certain_labels)[n] != cls) continue;
        const double d = kernels::distance_l2(lat.row(n), z0);
        if (d < best_d) {
          best_d = d;
          best = n;
        }
      }
      if (best == lat.rows()) {
        throw ConfigError("init_scheme: S2 found no certain training point of class " + std::to_string(cls));
      }
      if (best_d == 0.0) return Vec(z0.begin(), z0.end());
      Vec dir(m);
      for (std::size_t t = 0; t < m; ++t) dir[t] = (lat.at(best, t) - z0[t]) / best_d;
      return along(z0, dir, r * frac);
    }
  }
  throw ConfigError("init_scheme: unknown scheme");
}

std::vector<Vec> initial_points(const ExperimentConfig& cfg, std::span<const double> z0, const InitContext& ctx,
                                std::size_t /*classes*/) {
  std::vector<Vec> out;
  for (std::size_t i = 0; i < cfg.k; ++i) {
    auto rng = make_rng(cfg.seed, Stream::Start, {i});
    out.push_back(init_scheme(cfg.scheme, z0, cfg.r, i, cfg.k, ctx, rng));
  }
  return out;
}

// ---- descent ----------------------------------------------------------------

CandidateCE descend(const ModelBundle& bundle, std::span<const double> x0, std::span<const double> z0,
                    int original_label, std::span<const double> start, std::size_t index, const ExperimentConfig& cfg) {
  ClueObjective obj(bundle, x0, original_label, cfg.lambda_x, cfg.lambda_y);
  const bool constrained = std::isfinite(cfg.delta);
  Vec z = constrained ? project_to_ball(start, z0, cfg.delta) : Vec(start.begin(), start.end());
  std::vector<Vec> traj;
  std::vector<double> losses;
  if (cfg.trace) traj.push_back(z);
  double start_loss = 0.0;
  for (std::size_t t = 0; t < cfg.iters; ++t) {
    double loss = 0.0;
    const Vec g = obj.gradient(z, &loss);
    if (t == 0) start_loss = loss;
    if (cfg.trace) losses.push_back(loss);
    for (std::size_t j = 0; j < z.size(); ++j) z[j] -= cfg.lr * g[j];
    if (constrained) z = project_to_ball(z, z0, cfg.delta);
    if (cfg.trace) traj.push_back(z);
  }
  const double final_loss = obj.evaluate(z).loss;
  if (cfg.trace) losses.push_back(final_loss);
  CandidateCE c = make_candidate(bundle, z, x0, z0, original_label, cfg.lambda_x, cfg.lambda_y);
  c.index = index;
  c.z_start = traj.empty() ? (constrained ? project_to_ball(start, z0, cfg.delta) : Vec(start.begin(), start.end())) : traj.front();
  c.start_objective = start_loss;
  c.final_objective = final_loss;
  c.trajectory = std::move(traj);
  c.objective_trace = std::move(losses);
  return c;
}

CESet prepare_set(std::span<const double> x0, const ModelBundle& bundle, const ExperimentConfig& cfg) {
  cfg.validate();
  CESet set;
  set.config = cfg;
  set.h_threshold = resolve_h_threshold(cfg, bundle);
  set.x0.assign(x0.begin(), x0.end());
  set.z0 = encode(bundle, x0);
  const auto post = predict(bundle, x0);
  set.original_label = argmax(post.probs);
  set.original_entropy = entropy(post.probs);
  return set;
}

CESet clue(std::span<const double> x0, const ModelBundle& bundle, const ExperimentConfig& cfg) {
  CESet set = prepare_set(x0, bundle, cfg);
  ClueObjective obj(bundle, x0, set.original_label, cfg.lambda_x, cfg.lambda_y);
  Vec z = set.z0;
  CandidateCE c;
  if (cfg.trace) c.trajectory.push_back(z);
  for (std::size_t t = 0; t < cfg.iters; ++t) {
    double loss = 0.0;
    const Vec g = obj.gradient(z, &loss);
    if (t == 0) c.start_objective = loss;
    if (cfg.trace) c.objective_trace.push_back(loss);
    for (std::size_t j = 0; j < z.size(); ++j) z[j] -= cfg.lr * g[j];
    if (cfg.trace) c.trajectory.push_back(z);
  }
  c.final_objective = obj.evaluate(z).loss;
  if (cfg.trace) c.objective_trace.push_back(c.final_objective);
  CandidateCE full = make_candidate(bundle, z, x0, set.z0, set.original_label, cfg.lambda_x, cfg.lambda_y);
  full.z_start = set.z0;
  full.start_objective = c.start_objective;
  full.final_objective = c.final_objective;
  full.trajectory = std::move(c.trajectory);
  full.objective_trace = std::move(c.objective_trace);
  full.accepted = full.H < set.h_threshold;
  set.candidates.push_back(std::move(full));
  return set;
}

CESet delta_clue(std::span<const double> x0, const ModelBundle& bundle, const ExperimentConfig& cfg,
                 const InitContext& ctx) {
  CESet set = prepare_set(x0, bundle, cfg);
  InitContext c = ctx;
  if (!c.bundle) c.bundle = &bundle;
  const auto starts = initial_points(cfg, set.z0, c, bundle.dims.classes);
  set.candidates.resize(cfg.k);
  auto run = [&](std::size_t i) {
    set.candidates[i] = descend(bundle, x0, set.z0, set.original_label, starts[i], i, cfg);
  };
  const std::size_t threads = std::min(cfg.threads, cfg.k);
  if (threads <= 1) {
    for (std::size_t i = 0; i < cfg.k; ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < cfg.k; i += threads) run(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  for (auto& cand : set.candidates) cand.accepted = cand.H < set.h_threshold;
  return set;
}

Vec label_distribution(const CESet& set, std::size_t classes) {
  const auto acc = set.accepted();
  if (acc.empty()) throw Error("label_distribution: no accepted candidates");
  Vec min_cost(classes, kInf);
  for (const auto* c : acc) {
    auto& m = min_cost[static_cast<std::size_t>(c->label)];
    m = std::min(m, c->cost);
  }
  Vec w(classes, 0.0);
  std::size_t zeros = 0;
  for (double m : min_cost) zeros += m == 0.0;
  for (std::size_t i = 0; i < classes; ++i) {
    if (zeros > 0) w[i] = min_cost[i] == 0.0 ? 1.0 : 0.0;
    else if (std::isfinite(min_cost[i])) w[i] = 1.0 / (min_cost[i] * min_cost[i]);
  }
  double total = 0.0;
  for (double v : w) total += v;
  for (auto& v : w) v /= total;
  return w;
}

}  // namespace cluekit
