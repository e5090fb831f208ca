#pragma once

#include <cstddef>
#include <vector>

namespace bd {

// Aggregation/fragmentation rate sequences truncated at maximum cluster size K.
// a_k is the rate of (1)+(k) -> (k+1) for 1 <= k <= K-1; a_K is treated as 0 so
// no mass leaves the truncated system. b_k is the rate of (k) -> (1)+(k-1) for
// 2 <= k <= K. All stored rates must be positive and finite; Lambda caches the
// maximum over the truncated range.
class RateKernel {
 public:
  static RateKernel constant(std::size_t K, double a, double b);
  // a_k = a0 * k^a_exp, b_k = b0 * k^b_exp over the truncated range.
  static RateKernel power_law(std::size_t K, double a0, double a_exp, double b0,
                              double b_exp);
  // a covers k = 1..K-1 (in order), b covers k = 2..K.
  static RateKernel from_lists(std::size_t K, const std::vector<double>& a,
                               const std::vector<double>& b);

  std::size_t truncation() const { return K_; }

  double a(std::size_t k) const { return k < K_ ? a_[k] : 0.0; }
  double b(std::size_t k) const { return (k >= 2 && k <= K_) ? b_[k] : 0.0; }

  double lambda_max() const { return lambda_; }

 private:
  RateKernel(std::size_t K, std::vector<double> a, std::vector<double> b);

  std::size_t K_;
  std::vector<double> a_;  // a_[k] for 1 <= k <= K-1, index by cluster size
  std::vector<double> b_;  // b_[k] for 2 <= k <= K
  double lambda_;
};

}  // namespace bd
