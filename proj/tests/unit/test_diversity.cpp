#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace cluekit;

namespace {

std::vector<Vec> random_set(std::mt19937_64& rng, std::size_t k, std::size_t d, double lo = 0.0, double hi = 1.0) {
  std::vector<Vec> pts;
  for (std::size_t i = 0; i < k; ++i) pts.push_back(oracle::random_vec(rng, d, lo, hi));
  return pts;
}

Vec random_simplex(std::mt19937_64& rng, std::size_t c) {
  Vec p = oracle::random_vec(rng, c, 0.01, 1.0);
  double s = 0;
  for (double v : p) s += v;
  for (auto& v : p) v /= s;
  return p;
}

}  // namespace

TEST_CASE("metrics agree with oracles on fuzzed sets") {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t k = 1 + rng() % 6;
    const std::size_t d = 1 + rng() % 5;
    const auto pts = random_set(rng, k, d);
    const auto x0 = oracle::random_vec(rng, d, 0.0, 1.0);
    CHECK(dpp(pts) == doctest::Approx(oracle::dpp(pts)).epsilon(1e-9));
    CHECK(dpp(pts, BaseDistance::L1) == doctest::Approx(oracle::dpp(pts, false)).epsilon(1e-9));
    CHECK(apd(pts) == doctest::Approx(oracle::apd(pts)).epsilon(1e-12));
    CHECK(apd(pts, BaseDistance::L1) == doctest::Approx(oracle::apd(pts, false)).epsilon(1e-12));
    CHECK(coverage(pts, x0) == doctest::Approx(oracle::coverage(pts, x0)).epsilon(1e-12));

    const std::size_t c = 2 + rng() % 6;
    std::vector<Vec> ys;
    std::vector<int> labels;
    for (std::size_t i = 0; i < k; ++i) {
      ys.push_back(random_simplex(rng, c));
      labels.push_back(static_cast<int>(rng() % c));
    }
    CHECK(prediction_coverage(ys) == doctest::Approx(oracle::prediction_coverage(ys)).epsilon(1e-12));
    CHECK(distinct_labels(labels, c) == doctest::Approx(oracle::distinct_labels(labels, c)));
    CHECK(label_entropy(labels, c) == doctest::Approx(oracle::label_entropy(labels, c)).epsilon(1e-12));
  }
}

TEST_CASE("metric boundary values") {
  const std::vector<Vec> one{{0.2, 0.3}};
  CHECK(dpp(one) == 0.0);
  CHECK(apd(one) == 0.0);
  const std::vector<Vec> dup{{0.2, 0.3}, {0.2, 0.3}};
  CHECK(dpp(dup) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(apd(dup) == 0.0);
  // A set that brackets x0 along every axis by 0.1 covers 0.2 per axis.
  const Vec x0{0.5, 0.5};
  const std::vector<Vec> box{{0.4, 0.6}, {0.6, 0.4}};
  CHECK(coverage(box, x0) == doctest::Approx(0.2));
  const std::vector<int> all{0, 1, 2};
  CHECK(distinct_labels(all, 3) == 1.0);
  CHECK(label_entropy(all, 3) == doctest::Approx(1.0));
  const std::vector<int> same{1, 1};
  CHECK(label_entropy(same, 3) == 0.0);
}

TEST_CASE("differentiable metric gradients match central differences") {
  std::mt19937_64 rng(22);
  for (auto metric : {Metric::DPP, Metric::APD, Metric::Coverage}) {
    for (auto dist : {BaseDistance::L2, BaseDistance::L1}) {
      if (metric == Metric::Coverage && dist == BaseDistance::L1) continue;
      DiversitySpec spec{metric, Space::Latent, dist};
      int ok = 0;
      for (int t = 0; t < 50; ++t) {
        const std::size_t k = 2 + rng() % 4, d = 1 + rng() % 4;
        const auto pts = random_set(rng, k, d, -1.0, 1.0);
        const auto anchor = oracle::random_vec(rng, d, -1.0, 1.0);
        const auto g = diversity_grad(spec, pts, anchor);
        oracle::Vec flat, analytic;
        for (std::size_t i = 0; i < k; ++i) {
          flat.insert(flat.end(), pts[i].begin(), pts[i].end());
          analytic.insert(analytic.end(), g[i].begin(), g[i].end());
        }
        auto f = [&](const oracle::Vec& v) {
          std::vector<Vec> p(k);
          for (std::size_t i = 0; i < k; ++i) p[i] = Vec(v.begin() + i * d, v.begin() + (i + 1) * d);
          return diversity_value(spec, p, anchor);
        };
        CHECK(f(flat) == doctest::Approx(metric == Metric::DPP   ? oracle::dpp(pts, dist == BaseDistance::L2)
                                         : metric == Metric::APD ? oracle::apd(pts, dist == BaseDistance::L2)
                                                                 : oracle::coverage(pts, anchor))
                             .epsilon(1e-9));
        if (oracle::grad_close(analytic, oracle::central_diff(f, flat, 1e-6), 1e-4, 1e-7)) ++ok;
      }
      INFO(metric_name(metric));
      // max and |.| kinks may spoil a few differences.
      CHECK(ok >= 47);
    }
  }
}

TEST_CASE("spec validation and names") {
  CHECK_THROWS_AS((DiversitySpec{Metric::PredictionCoverage, Space::Latent}.validate()), ConfigError);
  CHECK_NOTHROW((DiversitySpec{Metric::PredictionCoverage, Space::Prediction}.validate()));
  CHECK_FALSE((DiversitySpec{Metric::DistinctLabels, Space::Prediction}.differentiable()));
  for (auto m : {Metric::DPP, Metric::APD, Metric::Coverage, Metric::PredictionCoverage, Metric::DistinctLabels,
                 Metric::LabelEntropy})
    CHECK(metric_from_name(metric_name(m)) == m);
  CHECK_THROWS_AS(metric_from_name("volume"), ConfigError);
  const DiversitySpec s{Metric::APD, Space::Input, BaseDistance::L1};
  CHECK(DiversitySpec::from_json(s.to_json()).to_json() == s.to_json());
}

TEST_CASE("evaluate_metrics covers every applicable space") {
  const auto b = fixture::random_bundle();
  ExperimentConfig cfg;
  cfg.k = 4;
  cfg.r = 1.0;
  cfg.h_threshold = kInf;
  const auto set = delta_clue(Vec(6, 0.5), b, cfg);
  const auto rows = evaluate_metrics(set, 3);
  auto find = [&](const std::string& m, const std::string& s) {
    for (const auto& r : rows)
      if (r.metric == m && r.space == s) return r.value;
    FAIL("missing metric " << m << "/" << s);
    return 0.0;
  };
  std::vector<Vec> zs;
  for (const auto& c : set.candidates) zs.push_back(c.z);
  CHECK(find("dpp", "latent") == doctest::Approx(oracle::dpp(zs)));
  CHECK(find("coverage", "latent") == doctest::Approx(oracle::coverage(zs, set.z0)));
  std::vector<Vec> xs;
  for (const auto& c : set.candidates) xs.push_back(c.x);
  CHECK(find("apd", "input") == doctest::Approx(oracle::apd(xs)));
  find("distinct_labels", "prediction");
  find("label_entropy", "prediction");
  find("prediction_coverage", "prediction");
}
