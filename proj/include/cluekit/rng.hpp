#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "cluekit/tensor.hpp"

namespace cluekit {

using Rng = std::mt19937_64;

/// Stream tags keep seeds for unrelated consumers apart.
enum class Stream : std::uint64_t {
  Data = 1,
  VaeInit = 2,
  VaeTrain = 3,
  EnsembleInit = 4,
  EnsembleTrain = 5,
  Start = 6,
  Timing = 7,
};

std::uint64_t splitmix64(std::uint64_t x);

/// Counter-based derivation: the seed for (root, tag, path...) does not depend
/// on how many other streams were drawn before, so per-candidate streams are
/// independent of execution order.
std::uint64_t derive_seed(std::uint64_t root, Stream tag, std::initializer_list<std::uint64_t> path = {});
Rng make_rng(std::uint64_t root, Stream tag, std::initializer_list<std::uint64_t> path = {});

/// Uniformly distributed unit vector in R^dim.
Vec random_direction(Rng& rng, std::size_t dim);

}  // namespace cluekit
