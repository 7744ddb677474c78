#pragma once

#include <random>
#include <vector>

#include "auvlearn/kernel_density.hpp"

namespace gen {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline std::size_t index(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline auvlearn::FeatureVector point(Rng& rng, std::size_t dim, double spread = 1.0) {
  auvlearn::FeatureVector x(dim);
  std::normal_distribution<double> g(0.0, spread);
  for (auto& v : x) v = g(rng);
  return x;
}

inline std::vector<auvlearn::FeatureVector> points(Rng& rng, std::size_t n, std::size_t dim, double spread = 1.0) {
  std::vector<auvlearn::FeatureVector> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(point(rng, dim, spread));
  return out;
}

inline std::vector<double> positive(Rng& rng, std::size_t dim, double lo = 0.2, double hi = 3.0) {
  std::vector<double> v(dim);
  for (auto& x : v) x = uniform(rng, lo, hi);
  return v;
}

}  // namespace gen
