// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. argv[1] is the path of the cluekit executable (criterion 12).

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "oracles.hpp"

#include "cluekit/experiments.hpp"
#include "cluekit/io.hpp"

using namespace cluekit;
using json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

std::string join(const std::vector<double>& v, int prec = 3) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i], prec);
  return s;
}

Tensor gather(const Tensor& t, const std::vector<std::size_t>& idx) {
  Tensor out(Shape{idx.size(), t.cols()});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto r = t.row(idx[i]);
    std::copy(r.begin(), r.end(), out.row(i).begin());
  }
  return out;
}

Vec row_vec(const Tensor& t, std::size_t r) { return Vec(t.row(r).begin(), t.row(r).end()); }

/// Monotone in the given direction, allowing at most one inversion smaller
/// than `slack`.
bool monotone_with_slack(const std::vector<double>& v, bool increasing, double slack) {
  int inversions = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double step = increasing ? v[i] - v[i - 1] : v[i - 1] - v[i];
    if (step >= 0) continue;
    if (-step >= slack) return false;
    ++inversions;
  }
  return inversions <= 1;
}

bool weakly_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] < v[i - 1]) return false;
  return true;
}

struct Fixture {
  Dataset digits, digits_train, digits_test;
  ModelBundle digits_bundle;
  Dataset blobs, blobs_train;
  ModelBundle blobs_bundle;
};

// ---- 1 ----------------------------------------------------------------------

Outcome gradients(const Fixture& f) {
  const auto& b = f.digits_bundle;
  const auto& test = f.digits_test;
  std::mt19937_64 rng(101);
  const std::size_t configs = 100;
  std::map<std::string, std::size_t> passed;
  auto sample_row = [&] { return static_cast<std::size_t>(rng() % test.size()); };
  std::normal_distribution<double> noise(0.0, 0.3);

  for (std::size_t c = 0; c < configs; ++c) {
    // Composite entropy(predict(decode(z))) and the CLUE objective.
    const auto x0 = row_vec(test.inputs, sample_row());
    auto z = encode(b, x0);
    for (auto& v : z) v += noise(rng);
    {
      ClueObjective h(b, x0, 0, 0.0, 0.0);
      auto fn = [&](const oracle::Vec& zz) { return oracle::entropy(predict_probs(b, decode(b, zz))); };
      if (oracle::grad_close(h.gradient(z), oracle::central_diff(fn, z, 1e-5))) ++passed["entropy"];
    }
    {
      const double lx = 0.03 * static_cast<double>(1 + c % 3), ly = c % 2 ? 0.5 : 0.0;
      const int label = argmax(predict_probs(b, x0));
      ClueObjective obj(b, x0, label, lx, ly);
      auto fn = [&](const oracle::Vec& zz) {
        const auto x = decode(b, zz);
        const auto p = predict_probs(b, x);
        return oracle::entropy(p) + lx * oracle::l1(x, x0) + (ly > 0 ? ly * -std::log(p[label]) : 0.0);
      };
      if (oracle::grad_close(obj.gradient(z), oracle::central_diff(fn, z, 1e-5))) ++passed["objective"];
    }
    {
      // Mapper loss with the nearest certain rows recomputed by the oracle.
      std::vector<std::size_t> ur, cr;
      for (int i = 0; i < 8; ++i) ur.push_back(sample_row());
      for (int i = 0; i < 24; ++i) cr.push_back(sample_row());
      const auto zu = encode_batch(b, gather(test.inputs, ur));
      const auto xc = gather(test.inputs, cr);
      oracle::Vec theta(b.dims.latent);
      for (auto& v : theta) v = noise(rng);
      const double lambda = c % 2 ? 0.1 : 0.0;
      auto fn = [&](const oracle::Vec& th) {
        double total = 0;
        for (std::size_t r = 0; r < zu.rows(); ++r) {
          auto zz = row_vec(zu, r);
          for (std::size_t i = 0; i < zz.size(); ++i) zz[i] += th[i];
          const auto x = decode(b, zz);
          double best = INFINITY;
          for (std::size_t q = 0; q < xc.rows(); ++q) best = std::min(best, oracle::l2(x, row_vec(xc, q)));
          total += best * best;
        }
        double l1 = 0;
        for (double t : th) l1 += std::abs(t);
        return total / static_cast<double>(zu.rows()) + lambda * l1;
      };
      const auto res = mapper_loss(b, zu, xc, theta, lambda);
      const bool value_ok = std::abs(res.loss - fn(theta)) <= 1e-10 * std::max(1.0, std::abs(res.loss));
      if (value_ok && oracle::grad_close(res.grad, oracle::central_diff(fn, theta, 1e-5))) ++passed["mapper"];
    }
    // Diversity terms on random point sets.
    const std::size_t k = 2 + rng() % 5, d = 2 + rng() % 7;
    std::vector<Vec> pts;
    for (std::size_t i = 0; i < k; ++i) pts.push_back(oracle::random_vec(rng, d, 0.0, 1.0));
    const auto anchor = oracle::random_vec(rng, d, 0.0, 1.0);
    for (auto metric : {Metric::DPP, Metric::APD, Metric::Coverage}) {
      const DiversitySpec spec{metric, Space::Input, BaseDistance::L2};
      const auto g = diversity_grad(spec, pts, anchor);
      oracle::Vec flat, analytic;
      for (std::size_t i = 0; i < k; ++i) {
        flat.insert(flat.end(), pts[i].begin(), pts[i].end());
        analytic.insert(analytic.end(), g[i].begin(), g[i].end());
      }
      auto fn = [&](const oracle::Vec& v) {
        std::vector<oracle::Vec> p(k);
        for (std::size_t i = 0; i < k; ++i) p[i] = oracle::Vec(v.begin() + i * d, v.begin() + (i + 1) * d);
        return metric == Metric::DPP ? oracle::dpp(p) : metric == Metric::APD ? oracle::apd(p) : oracle::coverage(p, anchor);
      };
      if (oracle::grad_close(analytic, oracle::central_diff(fn, flat, 1e-6))) ++passed[metric_name(metric)];
    }
  }
  Outcome o{true, ""};
  for (const auto* key : {"entropy", "objective", "mapper", "dpp", "apd", "coverage"}) {
    o.pass = o.pass && passed[key] == configs;
    o.detail += std::string(o.detail.empty() ? "" : ", ") + key + " " + std::to_string(passed[key]) + "/" +
                std::to_string(configs);
  }
  o.detail += " configurations within rel 1e-4";
  return o;
}

// ---- 2 ----------------------------------------------------------------------

Outcome identities(const Fixture& f) {
  const auto& b = f.digits_bundle;
  const auto rows = top_uncertain(f.digits_test, b, 6);
  std::size_t checks = 0, same = 0;
  const DiversitySpec spec{};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto x0 = f.digits_test.inputs.row(rows[i]);
    ExperimentConfig cfg;
    cfg.k = 10;
    cfg.delta = 4;
    cfg.r = 4;
    cfg.seed = 1 + i;
    cfg.lambda_x = i % 2 ? 0.03 : 0.0;
    const auto ref = delta_clue(x0, b, cfg);
    const auto sim = nabla_clue_simultaneous(x0, b, cfg, spec);
    const auto seq = nabla_clue_sequential(x0, b, cfg, spec);
    const auto pen = nabla_clue_penalty(x0, b, cfg);
    for (std::size_t c = 0; c < cfg.k; ++c) {
      for (const auto* other : {&sim.set, &seq.set, &pen.set}) {
        ++checks;
        if (other->candidates[c].z == ref.candidates[c].z && other->candidates[c].x == ref.candidates[c].x) ++same;
      }
    }
    ExperimentConfig one;
    one.seed = 1 + i;
    one.lambda_x = cfg.lambda_x;
    const auto a = clue(x0, b, one);
    const auto d = delta_clue(x0, b, one);
    ++checks;
    if (sha256_hex(dump_json(a.to_json())) == sha256_hex(dump_json(d.to_json()))) ++same;
  }
  return {same == checks, std::to_string(same) + "/" + std::to_string(checks) +
                              " bitwise matches (nabla sim/seq/penalty at lambda_D=0 vs delta-CLUE; "
                              "delta=inf,r=0,k=1 vs CLUE by CESet hash)"};
}

// ---- 3 ----------------------------------------------------------------------

Outcome constraints(const Fixture& f) {
  const auto& b = f.digits_bundle;
  const auto rows = top_uncertain(f.digits_test, b, 6);
  std::size_t states = 0, violations = 0;
  auto check_set = [&](const CESet& s, double delta) {
    for (const auto& c : s.candidates) {
      for (const auto& z : c.trajectory) {
        ++states;
        if (oracle::l2(z, s.z0) > delta + 1e-6) ++violations;
      }
      ++states;
      if (c.rho > delta + 1e-6) ++violations;
    }
  };
  for (double delta : {0.5, 1.0, 2.0}) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto x0 = f.digits_test.inputs.row(rows[i]);
      ExperimentConfig cfg;
      cfg.k = 10;
      cfg.delta = delta;
      cfg.r = 2 * delta;  // starts outside the ball are projected too
      cfg.scheme = static_cast<Scheme>(1 + i % 5);
      cfg.seed = 7 + i;
      cfg.trace = true;
      InitContext ctx{&b};
      if (cfg.scheme == Scheme::S2) cfg.scheme = Scheme::S1;
      check_set(delta_clue(x0, b, cfg, ctx), delta);
      cfg.lambda_d = 0.5;
      check_set(nabla_clue_simultaneous(x0, b, cfg, DiversitySpec{}).set, delta);
      check_set(nabla_clue_sequential(x0, b, cfg, DiversitySpec{}).set, delta);
      check_set(nabla_clue_penalty(x0, b, cfg).set, delta);
    }
  }
  std::mt19937_64 rng(303);
  std::size_t idem = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto z0 = oracle::random_vec(rng, 8, -2, 2);
    const auto z = oracle::random_vec(rng, 8, -6, 6);
    const double delta = std::uniform_real_distribution<double>(0.01, 5)(rng);
    const auto p = project_to_ball(z, z0, delta);
    if (project_to_ball(p, z0, delta) == p) ++idem;
  }
  return {violations == 0 && idem == 1000, std::to_string(states - violations) + "/" + std::to_string(states) +
                                               " latent states within delta + 1e-6; projection idempotent " +
                                               std::to_string(idem) + "/1000"};
}

// ---- 4 ----------------------------------------------------------------------

Outcome metrics() {
  std::mt19937_64 rng(404);
  std::size_t bad = 0, range_bad = 0;
  const std::size_t sets = 1000;
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(b)); };
  for (std::size_t t = 0; t < sets; ++t) {
    const std::size_t k = 1 + rng() % 6, d = 1 + rng() % 8, c = 2 + rng() % 9;
    std::vector<Vec> pts, ys;
    std::vector<int> labels;
    for (std::size_t i = 0; i < k; ++i) {
      pts.push_back(oracle::random_vec(rng, d, 0.0, 1.0));
      Vec y = oracle::random_vec(rng, c, 0.0, 1.0);
      double s = 0;
      for (double v : y) s += v;
      for (auto& v : y) v /= s;
      ys.push_back(y);
      labels.push_back(static_cast<int>(rng() % c));
    }
    const auto x0 = oracle::random_vec(rng, d, 0.0, 1.0);
    const double dv = dpp(pts), av = apd(pts), cv = coverage(pts, x0), pc = prediction_coverage(ys);
    const double dl = distinct_labels(labels, c), le = label_entropy(labels, c);
    if (!close(dv, oracle::dpp(pts))) ++bad;
    if (!close(dpp(pts, BaseDistance::L1), oracle::dpp(pts, false))) ++bad;
    if (!close(av, oracle::apd(pts))) ++bad;
    if (!close(cv, oracle::coverage(pts, x0))) ++bad;
    if (!close(pc, oracle::prediction_coverage(ys))) ++bad;
    if (dl != oracle::distinct_labels(labels, c)) ++bad;
    if (le != oracle::label_entropy(labels, c)) ++bad;
    const Vec lo(d, 0.0), hi(d, 1.0);
    if (!(dv >= 0 && dv <= 1)) ++range_bad;
    if (!(le >= 0 && le <= 1)) ++range_bad;
    if (!(pc >= 1.0 / static_cast<double>(c) - 1e-12 && pc <= 1 + 1e-12)) ++range_bad;
    if (!(cv <= coverage_max(lo, hi) + 1e-12)) ++range_bad;
  }
  return {bad == 0 && range_bad == 0, std::to_string(bad) + " oracle mismatches and " + std::to_string(range_bad) +
                                          " range violations over " + std::to_string(sets) + " fuzzed sets"};
}

// ---- 5 ----------------------------------------------------------------------

Outcome delta_trend(const Fixture& f) {
  const auto& b = f.digits_bundle;
  const auto rows = top_uncertain(f.digits_test, b, 8);
  const std::vector<double> grid{0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0};
  std::vector<double> min_h, dx;
  for (double delta : grid) {
    double h_sum = 0, d_sum = 0;
    for (auto row : rows) {
      ExperimentConfig cfg;
      cfg.delta = delta;
      cfg.r = delta;
      cfg.k = 10;
      cfg.seed = 1;
      cfg.h_threshold = kInf;
      const auto s = delta_clue(f.digits_test.inputs.row(row), b, cfg);
      const CandidateCE* best = &s.candidates.front();
      for (const auto& c : s.candidates)
        if (c.H < best->H) best = &c;
      h_sum += best->H;
      d_sum += best->d_x;
    }
    min_h.push_back(h_sum / static_cast<double>(rows.size()));
    dx.push_back(d_sum / static_cast<double>(rows.size()));
  }
  const bool pass = monotone_with_slack(min_h, false, 0.01) && monotone_with_slack(dx, true, 0.01);
  return {pass, "delta {" + join(grid) + "}: mean min-H {" + join(min_h) + "}, minimizer d_x {" + join(dx) + "}"};
}

// ---- 6 ----------------------------------------------------------------------

Outcome lambda_d_trend(const Fixture& f) {
  SweepSetup s;
  s.data = &f.digits_test;
  s.bundle = &f.digits_bundle;
  s.rows = top_uncertain(f.digits_test, f.digits_bundle, 8);
  s.method = Method::DivSim;
  s.cfg.k = 10;
  s.cfg.delta = 4;
  s.cfg.r = 4;
  s.cfg.seed = 1;
  s.spec = DiversitySpec{Metric::DPP, Space::Latent, BaseDistance::L2};
  const std::vector<double> grid{0.0, 0.03, 0.1, 0.3, 1.0, 3.0};
  const auto rows = sweep(SweepAxis::LambdaD, grid, s);
  std::map<std::string, std::vector<double>> series;
  for (const auto& r : rows) series[r.statistic].push_back(r.result);
  const double rho = spearman(grid, series["dpp_latent"]);
  std::vector<std::string> improving;
  for (const auto& [name, values] : series) {
    static const std::set<std::string> not_metrics{"dpp_latent", "min_H",    "mean_H",   "max_H",
                                                   "min_d_x",    "mean_d_x", "max_d_x", "minimizer_d_x"};
    if (not_metrics.count(name)) continue;
    if (weakly_increasing(values)) improving.push_back(name);
  }
  std::string names;
  for (const auto& n : improving) names += (names.empty() ? "" : ", ") + n;
  return {rho > 0 && improving.size() >= 2, "lambda_D {" + join(grid) + "}: dpp_latent {" +
                                                join(series["dpp_latent"]) + "}, Spearman " + fmt(rho) +
                                                "; weakly non-decreasing: " + names};
}

// ---- 7 ----------------------------------------------------------------------

Outcome descent(const Fixture& f) {
  const auto& b = f.digits_bundle;
  const auto rows = top_uncertain(f.digits_test, b, 100);
  std::size_t improved = 0;
  double total = 0;
  for (std::size_t s = 0; s < 100; ++s) {
    const auto x0 = f.digits_test.inputs.row(rows[s]);
    const auto z0 = encode(b, x0);
    ExperimentConfig cfg;
    cfg.delta = 3;
    cfg.lambda_x = 0.03;
    cfg.seed = s;
    auto rng = make_rng(s, Stream::Start);
    const auto start = init_scheme(Scheme::S1, z0, 3.0, 0, 1, {}, rng);
    const int label = argmax(predict_probs(b, x0));
    const auto c = descend(b, x0, z0, label, start, 0, cfg);
    if (c.final_objective <= c.start_objective) ++improved;
    total += c.start_objective - c.final_objective;
  }
  const double mean = total / 100.0;
  return {improved == 100 && mean > 0, std::to_string(improved) + "/100 terminal <= initial objective, mean improvement " +
                                           fmt(mean)};
}

// ---- 8 ----------------------------------------------------------------------

Outcome planted(const Fixture& f) {
  const auto& b = f.blobs_bundle;
  const auto part = partition_by_certainty(f.blobs_train, b, b.report.at("tau_low"), b.report.at("tau_high"));
  const auto xu = gather(f.blobs_train.inputs, part.uncertain_in(0));
  const auto zu = encode_batch(b, xu);
  MapperHyper h;
  h.lambda_theta = 0.0;
  h.lr = 0.5;
  h.steps = 1000;
  std::vector<double> errs;
  for (double scale : {0.1, 0.3}) {
    Vec t(b.dims.latent);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * std::sin(static_cast<double>(i) + 1.0);
    Tensor zs = zu;
    for (std::size_t r = 0; r < zs.rows(); ++r)
      for (std::size_t c = 0; c < zs.cols(); ++c) zs.at(r, c) += t[c];
    const auto m = train_mapper(xu, decode_batch(b, zs), b, h);
    errs.push_back(oracle::l2(m.theta, t));
  }
  const bool pass = *std::max_element(errs.begin(), errs.end()) <= 1e-2;
  return {pass, "blobs latent-2 bundle, " + std::to_string(xu.rows()) + " uncertain rows, ||theta - t||_2 = {" +
                    join(errs, 3) + "} (lr 0.5, 1000 steps)"};
}

// ---- 9, 10, 11 --------------------------------------------------------------

struct GlamData {
  GroupPartition ptrain, ptest;
  GlamSuite suite;
  Tensor xs;
  std::vector<int> groups;
  std::vector<std::size_t> rows;
};

GlamData glam_data(const Fixture& f) {
  const auto& b = f.digits_bundle;
  GlamData g;
  const double tl = b.report.at("tau_low"), th = b.report.at("tau_high");
  g.ptrain = partition_by_certainty(f.digits_train, b, tl, th);
  g.ptest = partition_by_certainty(f.digits_test, b, tl, th);
  std::vector<CESet> sets0, sets3;
  for (std::size_t i = 0; i < f.digits_train.size(); ++i) {
    if (!g.ptrain.uncertain[i]) continue;
    ExperimentConfig cfg;
    cfg.k = 10;
    cfg.delta = 4;
    cfg.r = 4;
    cfg.seed = 1;
    sets0.push_back(delta_clue(f.digits_train.inputs.row(i), b, cfg));
    cfg.lambda_x = 0.03;
    sets3.push_back(delta_clue(f.digits_train.inputs.row(i), b, cfg));
  }
  std::vector<std::string> variants(kGlamVariants.begin(), kGlamVariants.end());
  variants.insert(variants.end(), kBaselineVariants.begin(), kBaselineVariants.end());
  g.suite = build_glam(b, f.digits_train, g.ptrain, variants, MapperHyper{}, &sets0, &sets3);
  g.rows = glam_rows(g.suite, g.ptest);
  g.xs = gather(f.digits_test.inputs, g.rows);
  for (auto r : g.rows) g.groups.push_back(f.digits_test.labels[r]);
  return g;
}

Outcome amortization(const Fixture& f, const GlamData& g) {
  const auto& b = f.digits_bundle;
  // Instrumented evaluation counts for every mapped input.
  std::set<std::size_t> totals;
  bool exact = true;
  const auto& mappers = g.suite.mappers.at("glam1");
  for (std::size_t i = 0; i < g.rows.size(); ++i) {
    reset_eval_counters();
    apply_mapper(mappers[static_cast<std::size_t>(g.groups[i])], g.xs.row(i), b, 0.03);
    const auto& c = eval_counters();
    exact = exact && c.encode == 1 && c.decode == 1 && c.predict == 1;
    totals.insert(c.total());
  }
  // The delta-CLUE settings that produced the CE sets glam2/glam3 train on. The
  // single-candidate, unbounded run (plain CLUE) is timed too and reported.
  ExperimentConfig dcfg;
  dcfg.k = 10;
  dcfg.delta = 4;
  dcfg.r = 4;
  dcfg.seed = 1;
  ExperimentConfig ccfg;
  auto time_against = [&](const ExperimentConfig& cfg) {
    auto schemes = suite_schemes(g.suite, b, 0.03, &cfg);
    std::vector<NamedScheme> pick;
    for (auto& s : schemes)
      if (s.name == "glam1" || s.name == "dclue") pick.push_back(std::move(s));
    const auto table = evaluate_schemes(g.xs, g.groups, pick, 0.03, 5);
    return std::pair{table.find("glam1").median_time_ms, table.find("dclue").median_time_ms};
  };
  const auto [glam_ms, clue_ms] = time_against(dcfg);
  const auto [glam1_ms, plain_ms] = time_against(ccfg);
  const double ratio = glam_ms / clue_ms;
  return {ratio <= 1.0 / 50.0 && exact && totals.size() == 1,
          "per-CE median " + fmt(glam_ms * 1e3) + " us vs delta-CLUE (k=10, delta=4) " + fmt(clue_ms * 1e3) +
              " us, ratio 1/" + fmt(1.0 / ratio, 3) + " (needs <= 1/50); against plain CLUE (k=1) 1/" +
              fmt(plain_ms / glam1_ms, 3) + "; model evaluations per CE: " +
              (exact ? "1 encode, 1 decode, 1 predict" : "varying") + " on " + std::to_string(g.rows.size()) +
              " inputs"};
}

Outcome validity(const Fixture& f, const GlamData& g) {
  const auto& b = f.digits_bundle;
  const auto schemes = suite_schemes(g.suite, b, 0.03, nullptr);
  const auto table = evaluate_schemes(g.xs, g.groups, schemes, 0.03, 1);
  double worst = -kInf;
  std::string detail;
  for (const auto* name : {"dbm-input", "dbm-latent", "nn-input", "nn-latent"}) {
    const auto& s = table.find(name);
    worst = std::max(worst, s.mean_cost);
    detail += std::string(name) + " " + fmt(s.mean_cost, 3) + ", ";
  }
  bool pass = true;
  for (const auto* name : {"glam1", "glam2", "glam3"}) {
    const auto& s = table.find(name);
    pass = pass && s.valid_fraction >= 0.8 && s.mean_cost <= worst;
    detail += std::string(name) + " " + fmt(s.mean_cost, 3) + " (valid " + fmt(s.valid_fraction, 3) + "), ";
  }
  return {pass, "mean cost at lambda_x 0.03 on " + std::to_string(g.rows.size()) + " uncertain test inputs: " + detail +
                    "worst baseline " + fmt(worst, 3)};
}

Outcome lambda_theta_trend(const Fixture& f, const GlamData& g) {
  SweepSetup s;
  s.data = &f.digits_test;
  s.bundle = &f.digits_bundle;
  s.train = &f.digits_train;
  s.rows = g.rows;
  s.cfg.lambda_x = 0.03;
  const std::vector<double> grid{0.0, 0.1, 1.0, 10.0, 100.0};
  const auto rows = sweep(SweepAxis::LambdaTheta, grid, s);
  std::vector<double> h, dx;
  for (const auto& r : rows) {
    if (r.statistic == "mean_H") h.push_back(r.result);
    if (r.statistic == "mean_d_x") dx.push_back(r.result);
  }
  const double rd = spearman(grid, dx), rh = spearman(grid, h);
  return {rd < 0 && rh > 0, "lambda_theta {" + join(grid) + "}: mean d_x {" + join(dx) + "} (Spearman " + fmt(rd) +
                                "), mean H {" + join(h) + "} (Spearman " + fmt(rh) + ")"};
}

// ---- 12 ---------------------------------------------------------------------

bool timing_key(const std::string& k) {
  return (k.size() > 3 && k.compare(k.size() - 3, 3, "_ms") == 0) || k.find("ratio") != std::string::npos;
}

json mask_json(json j) {
  if (j.is_object()) {
    json out = json::object();
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!timing_key(it.key())) out[it.key()] = mask_json(it.value());
    return out;
  }
  if (j.is_array()) {
    for (auto& e : j) e = mask_json(e);
  }
  return j;
}

std::string mask_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  std::vector<bool> keep;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (keep.empty())
      for (const auto& c : cells) keep.push_back(!timing_key(c));
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (i >= keep.size() || keep[i]) out += cells[i] + ",";
    out += "\n";
  }
  return out;
}

std::string masked(const fs::path& p) {
  const auto bytes = read_file(p);
  if (p.extension() == ".json") return mask_json(json::parse(bytes)).dump();
  if (p.extension() == ".csv") return mask_csv(bytes);
  return bytes;
}

// Compares two output directories. Files that differ only in timing fields
// are recorded so run.json may differ in their hashes too.
bool same_outputs(const fs::path& a, const fs::path& b, std::string& why) {
  const auto ha = hash_tree(a), hb = hash_tree(b);
  if (ha.size() != hb.size()) {
    why = a.filename().string() + ": file lists differ";
    return false;
  }
  std::set<std::string> timed;
  for (std::size_t i = 0; i < ha.size(); ++i) {
    if (ha[i].first != hb[i].first) {
      why = a.filename().string() + ": file lists differ";
      return false;
    }
    if (ha[i].first == "run.json" || ha[i].second == hb[i].second) continue;
    if (masked(a / ha[i].first) != masked(b / hb[i].first)) {
      why = (a.filename() / ha[i].first).string() + " differs";
      return false;
    }
    timed.insert(ha[i].first);
  }
  if (fs::exists(a / "run.json")) {
    auto ra = mask_json(json::parse(read_file(a / "run.json"))), rb = mask_json(json::parse(read_file(b / "run.json")));
    for (auto* r : {&ra, &rb})
      for (auto& o : (*r)["outputs"])
        if (timed.count(o["path"].get<std::string>())) o["sha256"] = "timed";
    if (ra != rb) {
      why = (a.filename() / "run.json").string() + " differs";
      return false;
    }
  }
  return true;
}

Outcome determinism(const std::string& cli) {
  const auto root = fs::temp_directory_path() / ("cluekit_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string q = "'" + cli + "'";
  // Each step: name, arguments (outputs land in <run>/<name>).
  const std::vector<std::pair<std::string, std::string>> steps = {
      {"data", "gen-data --generator minidigits --n-train 300 --n-test 100 --seed 3"},
      {"bundle", "train --data {run}/data --seed 3 --vae-epochs 8 --ensemble-epochs 8"},
      {"explain", "explain --bundle {run}/bundle --data {run}/data --top 4 --k 4 --delta 2 --r 2 --seed 1"},
      {"diverse", "explain --bundle {run}/bundle --data {run}/data --top 3 --k 4 --delta 2 --r 2 --method divclue-sim "
                  "--lambda-d 0.3 --seed 1"},
      {"sweep", "sweep --bundle {run}/bundle --data {run}/data --top 3 --k 3 --axis delta --grid 0.5,1,2 --seed 1"},
      {"sets0", "explain --bundle {run}/bundle --data {run}/data --split train --uncertain --k 3 --delta 2 --r 2 "
                "--lambda-x 0 --seed 1"},
      {"sets3", "explain --bundle {run}/bundle --data {run}/data --split train --uncertain --k 3 --delta 2 --r 2 "
                "--lambda-x 0.03 --seed 1"},
      {"glam", "glam --bundle {run}/bundle --data {run}/data --variant all --clue-sets0 {run}/sets0/ceset.json "
               "--clue-sets3 {run}/sets3/ceset.json --steps 40 --repetitions 1"},
      {"bench", "bench --bundle {run}/bundle --data {run}/data --repetitions 2 --max-inputs 4"},
  };
  std::vector<std::string> failures;
  std::size_t compared = 0;
  for (int pass = 0; pass < 2; ++pass) {
    const auto run = root / ("run" + std::to_string(pass));
    for (const auto& [name, args] : steps) {
      std::string a = args;
      for (std::size_t p; (p = a.find("{run}")) != std::string::npos;) a.replace(p, 5, run.string());
      const auto cmd = q + " " + a + " --out " + (run / name).string() + " > /dev/null 2>&1";
      if (std::system(cmd.c_str()) != 0) failures.push_back(name + " exited nonzero");
    }
  }
  // Downstream inputs differ in path between runs, so compare per-run
  // manifests with the run directory removed from recorded paths.
  for (const auto& [name, _] : steps) {
    const auto a = root / "run0" / name, b = root / "run1" / name;
    for (const auto& [dir, other] : {std::pair{a, root / "run0"}, std::pair{b, root / "run1"}}) {
      auto path = dir / "run.json";
      auto text = read_file(path);
      for (std::size_t p; (p = text.find(other.string())) != std::string::npos;) text.replace(p, other.string().size(), "{run}");
      write_atomic(path, text);
    }
    std::string why;
    ++compared;
    if (!same_outputs(a, b, why)) failures.push_back(why);
  }
  fs::remove_all(root);
  std::string detail = std::to_string(compared - failures.size()) + "/" + std::to_string(compared) +
                       " command outputs byte-identical across reruns (wall-clock fields masked)";
  for (const auto& w : failures) detail += "; " + w;
  return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <path to cluekit executable>\n";
    return 2;
  }
  const auto t0 = std::chrono::steady_clock::now();
  Fixture f;
  f.digits = gen_minidigits({}, 7);
  f.digits_bundle = train_bundle(f.digits, VaeHyper{}, EnsembleHyper{}, 7);
  f.digits_train = f.digits.subset(Split::Train);
  f.digits_test = f.digits.subset(Split::Test);
  f.blobs = gen_blobs({}, 7);
  VaeHyper blob_vae;
  blob_vae.latent = 2;
  blob_vae.reconstruction = Reconstruction::Gaussian;
  f.blobs_bundle = train_bundle(f.blobs, blob_vae, EnsembleHyper{}, 7);
  f.blobs_train = f.blobs.subset(Split::Train);
  std::cout << "bundles trained in "
            << fmt(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 3) << " s (digits "
            << "held-out accuracy " << fmt(f.digits_bundle.report["ensemble"]["heldout_accuracy"].get<double>(), 3)
            << ")\n";

  int failed = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failed;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << name << ": " << o.detail << " [" << fmt(secs, 3)
              << " s]\n"
              << std::flush;
  };

  report(1, "gradient correctness", [&] { return gradients(f); });
  report(2, "collapse identities", [&] { return identities(f); });
  report(3, "constraint satisfaction", [&] { return constraints(f); });
  report(4, "metric correctness", [&] { return metrics(); });
  report(5, "delta trade-off trend", [&] { return delta_trend(f); });
  report(6, "lambda_D diversity trend", [&] { return lambda_d_trend(f); });
  report(7, "descent improves the objective", [&] { return descent(f); });
  report(8, "planted translation recovery", [&] { return planted(f); });
  GlamData g;
  bool have_glam = false;
  auto with_glam = [&](auto fn) {
    return [&, fn]() -> Outcome {
      if (!have_glam) {
        g = glam_data(f);
        have_glam = true;
      }
      return fn(f, g);
    };
  };
  report(9, "GLAM amortization", with_glam(amortization));
  report(10, "GLAM validity and cost", with_glam(validity));
  report(11, "lambda_theta trade-off", with_glam(lambda_theta_trend));
  report(12, "CLI determinism", [&] { return determinism(argv[1]); });

  std::cout << (12 - failed) << "/12 criteria passed in "
            << fmt(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 3) << " s\n";
  return failed == 0 ? 0 : 1;
}
