#pragma once

#include <cstddef>
#include <vector>

namespace bd {

// Power-law weight sequence w_k = k^alpha for the weighted-l2 geometry.
// alpha > 1 is required so that sum(1/w_k) converges; the doubling constant is
// gamma0 = 2^alpha. The companion sequence r of the moment diagnostics is a
// second instance with exponent beta > alpha.
class WeightSequence {
 public:
  static WeightSequence power_law(double alpha);

  double exponent() const { return alpha_; }
  double gamma0() const { return gamma0_; }
  // sum_{k>=1} 1/w_k, i.e. zeta(alpha); Euler-Maclaurin tail, relative error << 1e-10.
  double inv_sum() const { return inv_sum_; }

  double weight(std::size_t k) const;

  // w_1..w_K as a contiguous table (index 0 holds w_1).
  std::vector<double> table(std::size_t K) const;

 private:
  explicit WeightSequence(double alpha);

  double alpha_;
  double gamma0_;
  double inv_sum_;
};

// Checks the companion conditions: r_k >= w_k and w_k/r_k decreasing to 0,
// which for power laws reduce to beta > alpha. Throws DomainError otherwise.
void validate_companion(const WeightSequence& w, const WeightSequence& r);

}  // namespace bd
