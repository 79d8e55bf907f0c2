#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "cluekit/graph.hpp"
#include "cluekit/kernels.hpp"
#include "cluekit/rng.hpp"

using namespace cluekit;

namespace {

using Builder = std::function<ad::Var(ad::Graph&, ad::Var)>;

// Graph gradient of a scalar function of x versus central differences on the
// same graph's forward values.
bool check_grad(const Builder& build, const Vec& x0, Shape shape) {
  ad::Graph g;
  auto x = g.input("x", shape);
  auto y = build(g, x);
  g.forward({{x, Tensor(shape, x0)}});
  g.backward(y);
  const Vec analytic = x.grad().values();
  auto f = [&](const Vec& v) {
    g.forward({{x, Tensor(shape, v)}});
    return y.value().item();
  };
  const Vec numeric = oracle::central_diff(f, x0);
  return oracle::grad_close(analytic, numeric);
}

// Weighted sum with fixed random weights turns any tensor output into a scalar
// whose gradient exercises every output coordinate.
ad::Var weighted(ad::Graph& g, ad::Var v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ad::sum(v * g.constant(Tensor(v.shape(), oracle::random_vec(rng, shape_size(v.shape())))));
}

int count_passes(const Builder& build, Shape shape, double lo, double hi, int trials = 100) {
  int ok = 0;
  for (int t = 0; t < trials; ++t) {
    std::mt19937_64 rng(1000 + static_cast<std::uint64_t>(t));
    if (check_grad(build, oracle::random_vec(rng, shape_size(shape), lo, hi), shape)) ++ok;
  }
  return ok;
}

}  // namespace

TEST_CASE("affine with identity weight is the identity") {
  ad::Graph g;
  auto x = g.input("x", {2});
  auto y = ad::affine(x, g.constant(Tensor::matrix(2, 2, {1, 0, 0, 1})), g.constant(Tensor::vector({0, 0})));
  g.forward({{x, Tensor::vector({1, 2})}});
  CHECK(y.value() == Tensor::vector({1, 2}));
}

TEST_CASE("softmax of zeros is uniform") {
  const Tensor s = kernels::softmax(Tensor::vector({0, 0, 0, 0}));
  for (double v : s.data()) CHECK(v == 0.25);
}

TEST_CASE("softmax sums to one and survives large logits") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const Tensor s = kernels::softmax(Tensor::vector(oracle::random_vec(rng, 7, -500, 500)));
    CHECK(s.all_finite());
    CHECK(std::abs(kernels::sum(s) - 1.0) <= 1e-12);
  }
}

TEST_CASE("backward before forward is an error") {
  ad::Graph g;
  auto x = g.input("x", {3});
  auto y = ad::sum(x);
  CHECK_THROWS_WITH_AS(g.backward(y), doctest::Contains("before forward"), Error);
}

TEST_CASE("unbound input is an error") {
  ad::Graph g;
  auto x = g.input("x", {3});
  (void)ad::sum(x);
  CHECK_THROWS_AS(g.forward(), Error);
}

TEST_CASE("shape mismatch names the op and both shapes") {
  ad::Graph g;
  auto a = g.input("a", {3});
  auto b = g.input("b", {4});
  CHECK_THROWS_WITH_AS(a + b, doctest::Contains("(3)"), ShapeError);
  CHECK_THROWS_WITH_AS(a - b, doctest::Contains("(4)"), ShapeError);
}

TEST_CASE("non-finite forward values raise a numerical error naming the scope") {
  ad::Graph g;
  auto x = g.input("x", {2});
  ad::Var y;
  {
    ad::Graph::Scope s(g, "distance term");
    y = ad::log(x);
  }
  CHECK_THROWS_WITH_AS(g.forward({{x, Tensor::vector({-1.0, 1.0})}}), doctest::Contains("distance term"),
                       NumericalError);
}

TEST_CASE("simple analytic gradients") {
  ad::Graph g;
  auto x = g.input("x", {4});
  auto x0 = g.constant(Tensor::vector({0, 0, 0, 0}));
  auto s = ad::sum(x);
  auto l1 = ad::norm_l1(x - x0);
  g.forward({{x, Tensor::vector({1, 2, 3, 4})}});
  g.backward(s);
  for (double v : x.grad().data()) CHECK(v == 1.0);
  g.backward(l1);
  for (double v : x.grad().data()) CHECK(v == 1.0);
}

TEST_CASE("l1 subgradient and l2 norm gradient vanish at zero") {
  ad::Graph g;
  auto x = g.input("x", {3});
  auto a = ad::norm_l1(x);
  auto b = ad::norm_l2(x);
  g.forward({{x, Tensor::vector({0, 0, 0})}});
  g.backward(a);
  for (double v : x.grad().data()) CHECK(v == 0.0);
  g.backward(b);
  for (double v : x.grad().data()) CHECK(v == 0.0);
}

TEST_CASE("three-layer tanh MLP matches a straight-line forward pass") {
  auto rng = make_rng(42, Stream::Data);
  const std::size_t sizes[] = {5, 7, 6, 3};
  std::vector<std::vector<Vec>> ws;
  std::vector<Vec> bs;
  ad::Graph g;
  auto x = g.input("x", {5});
  ad::Var h = x;
  for (std::size_t l = 0; l < 3; ++l) {
    std::vector<Vec> w(sizes[l + 1]);
    for (auto& row : w) row = oracle::random_vec(rng, sizes[l]);
    Vec b = oracle::random_vec(rng, sizes[l + 1]);
    Vec flat;
    for (auto& row : w) flat.insert(flat.end(), row.begin(), row.end());
    h = ad::tanh(ad::affine(h, g.constant(Tensor::matrix(sizes[l + 1], sizes[l], flat)), g.constant(Tensor::vector(b))));
    ws.push_back(w);
    bs.push_back(b);
  }
  const Vec input = oracle::random_vec(rng, 5);
  g.forward({{x, Tensor::vector(input)}});
  Vec ref = input;
  for (std::size_t l = 0; l < 3; ++l) {
    ref = oracle::dense(ws[l], bs[l], ref);
    for (auto& v : ref) v = std::tanh(v);
  }
  for (std::size_t i = 0; i < 3; ++i) CHECK(h.value()[i] == doctest::Approx(ref[i]).epsilon(1e-14));
}

TEST_CASE("every op passes a finite-difference check over 100 seeded trials") {
  auto c = [](ad::Graph& g, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return g.constant(Tensor::vector(oracle::random_vec(rng, n)));
  };
  auto cm = [](ad::Graph& g, std::size_t r, std::size_t k, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return g.constant(Tensor::matrix(r, k, oracle::random_vec(rng, r * k)));
  };
  struct Case {
    const char* name;
    Builder build;
    Shape shape;
    double lo, hi;
  };
  const std::vector<Case> cases = {
      {"affine/x", [&](ad::Graph& g, ad::Var x) { return weighted(g, ad::affine(x, cm(g, 3, 4, 1), c(g, 3, 2)), 9); }, {4}, -1, 1},
      {"affine/batch", [&](ad::Graph& g, ad::Var x) { return weighted(g, ad::affine(x, cm(g, 3, 4, 1), c(g, 3, 2)), 9); }, {2, 4}, -1, 1},
      {"affine/w", [&](ad::Graph& g, ad::Var w) { return weighted(g, ad::affine(c(g, 4, 5), w, c(g, 3, 2)), 9); }, {3, 4}, -1, 1},
      {"affine/b", [&](ad::Graph& g, ad::Var b) { return weighted(g, ad::affine(c(g, 4, 5), cm(g, 3, 4, 1), b), 9); }, {3}, -1, 1},
      {"matmul", [&](ad::Graph& g, ad::Var a) { return weighted(g, ad::matmul(a, cm(g, 3, 2, 4)), 9) + weighted(g, ad::matmul(cm(g, 3, 2, 5), a), 8); }, {2, 3}, -1, 1},
      {"add", [&](ad::Graph& g, ad::Var x) { return weighted(g, x + c(g, 4, 3), 9); }, {4}, -1, 1},
      {"add/broadcast", [&](ad::Graph& g, ad::Var x) { return weighted(g, cm(g, 3, 4, 3) + x, 9); }, {4}, -1, 1},
      {"sub", [&](ad::Graph& g, ad::Var x) { return weighted(g, c(g, 4, 3) - x, 9); }, {4}, -1, 1},
      {"mul", [&](ad::Graph& g, ad::Var x) { return weighted(g, x * x * c(g, 4, 3), 9); }, {4}, -1, 1},
      {"scale", [&](ad::Graph& g, ad::Var x) { return weighted(g, -2.5 * x, 9); }, {4}, -1, 1},
      {"shift", [&](ad::Graph& g, ad::Var x) { return weighted(g, ad::exp(x + 0.3), 9); }, {4}, -1, 1},
      {"tanh", [&](ad::Graph& g, ad::Var x) { return weighted(g, ad::tanh(x), 9); }, {5}, -2, 2},
      {"relu", [&](ad::Graph& g, ad::Var x) { return weighted(g, ad::relu(x), 9); }, {5}, -2, 2},
      {"sigmoid", [&](ad::Graph& g, ad::Var x) { return weighted(g, ad::sigmoid(x), 9); }, {5}, -4, 4},
      {"exp", [&](ad::Graph& g, ad::Var x) { return weighted(g, ad::exp(x), 9); }, {5}, -2, 2},
      {"log", [&](ad::Graph& g, ad::Var x) { return weighted(g, ad::log(x), 9); }, {5}, 0.1, 3},
      {"xlogx", [&](ad::Graph& g, ad::Var x) { return weighted(g, ad::xlogx(x), 9); }, {5}, 0.01, 1},
      {"reciprocal", [&](ad::Graph& g, ad::Var x) { return weighted(g, ad::reciprocal(x), 9); }, {5}, 0.2, 3},
      {"softmax", [&](ad::Graph& g, ad::Var x) { return weighted(g, ad::softmax(x), 9); }, {2, 5}, -3, 3},
      {"log_softmax", [&](ad::Graph& g, ad::Var x) { return weighted(g, ad::log_softmax(x), 9); }, {2, 5}, -3, 3},
      {"sum", [&](ad::Graph& g, ad::Var x) { return ad::sum(x * x); }, {5}, -1, 1},
      {"mean", [&](ad::Graph& g, ad::Var x) { return ad::mean(x * x); }, {5}, -1, 1},
      {"norm_l1", [&](ad::Graph& g, ad::Var x) { return ad::norm_l1(x - c(g, 5, 3)); }, {5}, -1, 1},
      {"squared_norm_l2", [&](ad::Graph& g, ad::Var x) { return ad::squared_norm_l2(x - c(g, 5, 3)); }, {5}, -1, 1},
      {"norm_l2", [&](ad::Graph& g, ad::Var x) { return ad::norm_l2(x - c(g, 5, 3)); }, {5}, -1, 1},
      {"concat", [&](ad::Graph& g, ad::Var x) { return weighted(g, ad::concat({x, c(g, 2, 3), ad::tanh(x)}), 9); }, {3}, -1, 1},
      {"reshape", [&](ad::Graph& g, ad::Var x) { return weighted(g, ad::tanh(ad::reshape(x, {3, 2})), 9); }, {6}, -1, 1},
      {"det", [&](ad::Graph& g, ad::Var x) { return ad::det(x); }, {4, 4}, -1, 1},
      {"element_max", [&](ad::Graph& g, ad::Var x) { return weighted(g, ad::element_max({x, c(g, 5, 3), -1.0 * x}), 9); }, {5}, -1, 1},
      {"pick", [&](ad::Graph& g, ad::Var x) { return ad::pick(ad::softmax(x), 2); }, {5}, -2, 2},
      {"cross_entropy", [&](ad::Graph& g, ad::Var x) { return ad::cross_entropy(x, {1, 3}); }, {2, 4}, -3, 3},
      {"bce_with_logits", [&](ad::Graph& g, ad::Var x) { return ad::bce_with_logits(x, c(g, 5, 3) * c(g, 5, 3)); }, {5}, -5, 5},
  };
  for (const auto& tc : cases) {
    const std::string name = tc.name;
    CAPTURE(name);
    CHECK(count_passes(tc.build, tc.shape, tc.lo, tc.hi) == 100);
  }
}

TEST_CASE("forward and backward are bitwise repeatable") {
  auto build = [](ad::Graph& g, ad::Var x) { return ad::sum(ad::softmax(ad::tanh(x)) * x); };
  auto run = [&]() {
    ad::Graph g;
    auto x = g.input("x", {6});
    auto y = build(g, x);
    std::mt19937_64 rng(5);
    g.forward({{x, Tensor::vector(oracle::random_vec(rng, 6))}});
    g.backward(y);
    return std::make_pair(y.value(), x.grad());
  };
  CHECK(run() == run());
}
