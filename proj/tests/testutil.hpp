#pragma once

#include <doctest.h>

#include <algorithm>
#include <complex>
#include <random>
#include <vector>

namespace testutil {

using cdouble = std::complex<double>;

// Deterministic generator for reproducible fixtures.
inline std::mt19937_64 rng(uint64_t seed) { return std::mt19937_64(seed); }

inline cdouble random_in_disk(std::mt19937_64& g, double radius = 1.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  while (true) {
    cdouble z(u(g), u(g));
    if (std::abs(z) <= 1.0) return radius * z;
  }
}

// Greedy minimal matching distance between two equally sized multisets.
inline double multiset_distance(std::vector<cdouble> a, std::vector<cdouble> b) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  std::vector<bool> used(b.size(), false);
  for (const cdouble& x : a) {
    double best = 1e300;
    size_t arg = 0;
    for (size_t j = 0; j < b.size(); ++j) {
      if (used[j]) continue;
      double d = std::abs(x - b[j]);
      if (d < best) {
        best = d;
        arg = j;
      }
    }
    used[arg] = true;
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace testutil
