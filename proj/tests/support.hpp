#pragma once

#include "nlsctl/operators.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace nlsctl::testing {

inline double sup_abs(const Field& u) { return u.size() ? u.cwiseAbs().maxCoeff() : 0.0; }

inline double sup_abs(const TwoComponentField& z) { return std::max(sup_abs(z.first), sup_abs(z.second)); }

/// sum_k c_k sin(k pi x) with normal coefficients decaying like 1/k.
inline Field smooth_field(const Grid& grid, int modes, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Field u = Field::Zero(grid.size());
  for (int k = 1; k <= modes; ++k) {
    const double c = normal(rng) / k;
    for (int i = 0; i < grid.size(); ++i) u[i] += c * std::sin(k * M_PI * grid.node(i));
  }
  return u;
}

inline TwoComponentField smooth_pair(const Grid& grid, int modes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TwoComponentField z;
  z.first = smooth_field(grid, modes, rng);
  z.second = smooth_field(grid, modes, rng);
  return z;
}

inline Field sine(const Grid& grid, int k) {
  Field u(grid.size());
  for (int i = 0; i < grid.size(); ++i) u[i] = std::sin(k * M_PI * grid.node(i));
  return u;
}

}  // namespace nlsctl::testing
