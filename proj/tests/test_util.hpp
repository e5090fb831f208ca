#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "bd/rng.hpp"
#include "bd/state.hpp"

namespace bdtest {

// Neumaier compensated sum; keeps test-side summation error out of the
// quantities under test.
inline double neumaier_sum(std::span<const double> xs) {
  double sum = 0.0, comp = 0.0;
  for (double v : xs) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  return sum + comp;
}

// Random element of the phase space: nonnegative with sum k c_k = target_mass.
inline bd::Vec random_concentration(bd::Rng& rng, std::size_t K,
                                    double target_mass = 1.0) {
  bd::Vec c(K);
  double m = 0.0;
  for (std::size_t k = 1; k <= K; ++k) {
    c[k - 1] = rng.uniform01();
    m += static_cast<double>(k) * c[k - 1];
  }
  const double scale = target_mass / m;
  for (auto& v : c) v *= scale;
  return c;
}

inline bd::Vec random_vector(bd::Rng& rng, std::size_t n, double amp = 1.0) {
  bd::Vec v(n);
  for (auto& x : v) x = amp * (2.0 * rng.uniform01() - 1.0);
  return v;
}

inline double l1_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

}  // namespace bdtest
