#include "cluekit/rng.hpp"

#include <cmath>

namespace cluekit {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, Stream tag, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(root ^ splitmix64(static_cast<std::uint64_t>(tag)));
  for (auto p : path) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

Rng make_rng(std::uint64_t root, Stream tag, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(root, tag, path));
}

Vec random_direction(Rng& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec v(dim);
  double norm = 0.0;
  while (norm == 0.0) {
    norm = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
  }
  for (auto& x : v) x /= norm;
  return v;
}

}  // namespace cluekit
