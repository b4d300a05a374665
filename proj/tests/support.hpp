#pragma once

#include <cmath>
#include <random>

#include "gradflow/grid.hpp"

namespace gftest {

inline gradflow::RealField noise(const gradflow::Grid& g, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  gradflow::RealField f(g);
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = u(rng);
  return f;
}

inline gradflow::RealField without_mean(gradflow::RealField f) {
  const double m = f.mean();
  return f.map([m](double v) { return v - m; });
}

/// Random field with integer frequencies |m| <= mmax in each direction (mmax < n/2).
inline gradflow::RealField band_limited(const gradflow::Grid& g, std::mt19937_64& rng, int mmax) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  gradflow::RealField f(g);
  const double k = 2.0 * M_PI / g.length();
  for (int p = -mmax; p <= mmax; ++p) {
    for (int q = 0; q <= mmax; ++q) {
      const double amp = u(rng);
      const double phase = M_PI * u(rng);
      for (std::size_t i = 0; i < g.n(); ++i) {
        for (std::size_t j = 0; j < g.n(); ++j) {
          f(i, j) += amp * std::cos(k * (p * g.coord(i) + q * g.coord(j)) + phase);
        }
      }
    }
  }
  return f;
}

}  // namespace gftest
