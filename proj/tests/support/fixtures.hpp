#pragma once

// Small deterministic bundles for unit tests.

#include <array>

#include "cluekit/experiments.hpp"
#include "cluekit/models.hpp"
#include "cluekit/rng.hpp"

namespace fixture {

using namespace cluekit;

/// Untrained bundle with Glorot weights; fast and fully deterministic.
inline ModelBundle random_bundle(std::size_t input = 6, std::size_t latent = 3, std::size_t classes = 3,
                                 std::size_t members = 3, std::uint64_t seed = 11) {
  Rng rng(seed);
  ModelBundle b;
  b.dims = {input, latent, classes, members};
  const std::array<std::size_t, 2> trunk{input, 8};
  b.encoder.trunk = Mlp::glorot(trunk, Activation::Tanh, Activation::Tanh, rng);
  const std::array<std::size_t, 2> head{8, latent};
  b.encoder.mean = Mlp::glorot(head, Activation::Tanh, Activation::Identity, rng).layers.front();
  b.encoder.logvar = Mlp::glorot(head, Activation::Tanh, Activation::Identity, rng).layers.front();
  const std::array<std::size_t, 3> dec{latent, 8, input};
  b.decoder = Mlp::glorot(dec, Activation::Tanh, Activation::Identity, rng);
  const std::array<std::size_t, 3> cls{input, 8, classes};
  for (std::size_t m = 0; m < members; ++m) {
    auto mlp = Mlp::glorot(cls, Activation::Tanh, Activation::Identity, rng);
    // Scale up so posteriors are far from uniform and entropies vary.
    for (auto& v : mlp.layers.back().weight.data()) v *= 3.0;
    b.ensemble.push_back(std::move(mlp));
  }
  b.validate();
  return b;
}

/// Briefly trained blobs bundle with a 2-D latent (about a second to build).
struct Trained {
  Dataset data;
  Dataset train;
  Dataset test;
  ModelBundle bundle;
};

inline const Trained& blobs() {
  static const Trained t = [] {
    Trained r;
    BlobsParams p;
    p.n_train = 400;
    p.n_test = 100;
    p.spread = 0.15;
    r.data = gen_blobs(p, 5);
    VaeHyper vh;
    vh.latent = 2;
    vh.epochs = 20;
    vh.reconstruction = Reconstruction::Gaussian;
    EnsembleHyper eh;
    eh.epochs = 20;
    eh.members = 3;
    r.bundle = train_bundle(r.data, vh, eh, 5);
    r.train = r.data.subset(Split::Train);
    r.test = r.data.subset(Split::Test);
    return r;
  }();
  return t;
}

inline Vec row_of(const Tensor& t, std::size_t r) {
  const auto s = t.row(r);
  return Vec(s.begin(), s.end());
}

}  // namespace fixture
