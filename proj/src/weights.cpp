#include "bd/weights.hpp"

#include <cmath>
#include <string>

#include "bd/errors.hpp"

namespace bd {

namespace {

// zeta(alpha) = sum_{k<n} k^-alpha + Euler-Maclaurin tail from n. With n = 1024
// the truncation error is O(n^-(alpha+5)), far below 1e-10 relative for alpha > 1.
double zeta_em(double alpha) {
  const int n = 1024;
  double partial = 0.0;
  for (int k = n - 1; k >= 1; --k) partial += std::pow(static_cast<double>(k), -alpha);
  const double nd = n;
  const double tail = std::pow(nd, 1.0 - alpha) / (alpha - 1.0) +
                      0.5 * std::pow(nd, -alpha) +
                      alpha / 12.0 * std::pow(nd, -alpha - 1.0) -
                      alpha * (alpha + 1.0) * (alpha + 2.0) / 720.0 *
                          std::pow(nd, -alpha - 3.0);
  return partial + tail;
}

}  // namespace

WeightSequence::WeightSequence(double alpha) : alpha_(alpha) {
  if (!(alpha > 1.0))
    throw DomainError("WeightSequence: exponent must satisfy alpha > 1, got " +
                      std::to_string(alpha));
  gamma0_ = std::pow(2.0, alpha);
  inv_sum_ = zeta_em(alpha);
}

WeightSequence WeightSequence::power_law(double alpha) { return WeightSequence(alpha); }

double WeightSequence::weight(std::size_t k) const {
  return std::pow(static_cast<double>(k), alpha_);
}

std::vector<double> WeightSequence::table(std::size_t K) const {
  std::vector<double> w(K);
  for (std::size_t k = 1; k <= K; ++k) w[k - 1] = weight(k);
  return w;
}

void validate_companion(const WeightSequence& w, const WeightSequence& r) {
  if (!(r.exponent() > w.exponent()))
    throw DomainError("companion sequence requires beta > alpha (got beta = " +
                      std::to_string(r.exponent()) +
                      ", alpha = " + std::to_string(w.exponent()) + ")");
}

}  // namespace bd
