#include "bd/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bd/errors.hpp"

namespace bd {

RateKernel::RateKernel(std::size_t K, std::vector<double> a, std::vector<double> b)
    : K_(K), a_(std::move(a)), b_(std::move(b)) {
  if (K_ < 2) throw DomainError("RateKernel: truncation K must be >= 2");
  double lam = 0.0;
  for (std::size_t k = 1; k <= K_ - 1; ++k) {
    if (!(a_[k] > 0.0) || !std::isfinite(a_[k]))
      throw DomainError("RateKernel: a_" + std::to_string(k) + " must be positive and finite");
    lam = std::max(lam, a_[k]);
  }
  for (std::size_t k = 2; k <= K_; ++k) {
    if (!(b_[k] > 0.0) || !std::isfinite(b_[k]))
      throw DomainError("RateKernel: b_" + std::to_string(k) + " must be positive and finite");
    lam = std::max(lam, b_[k]);
  }
  lambda_ = lam;
}

RateKernel RateKernel::constant(std::size_t K, double a, double b) {
  std::vector<double> av(K + 1, 0.0), bv(K + 1, 0.0);
  for (std::size_t k = 1; k + 1 <= K; ++k) av[k] = a;
  for (std::size_t k = 2; k <= K; ++k) bv[k] = b;
  return RateKernel(K, std::move(av), std::move(bv));
}

RateKernel RateKernel::power_law(std::size_t K, double a0, double a_exp, double b0,
                                 double b_exp) {
  std::vector<double> av(K + 1, 0.0), bv(K + 1, 0.0);
  for (std::size_t k = 1; k + 1 <= K; ++k)
    av[k] = a0 * std::pow(static_cast<double>(k), a_exp);
  for (std::size_t k = 2; k <= K; ++k)
    bv[k] = b0 * std::pow(static_cast<double>(k), b_exp);
  return RateKernel(K, std::move(av), std::move(bv));
}

RateKernel RateKernel::from_lists(std::size_t K, const std::vector<double>& a,
                                  const std::vector<double>& b) {
  if (K < 2) throw DomainError("RateKernel: truncation K must be >= 2");
  if (a.size() < K - 1)
    throw DimensionError("RateKernel: aggregation list must cover k = 1.." +
                         std::to_string(K - 1));
  if (b.size() < K - 1)
    throw DimensionError("RateKernel: fragmentation list must cover k = 2.." +
                         std::to_string(K));
  std::vector<double> av(K + 1, 0.0), bv(K + 1, 0.0);
  for (std::size_t k = 1; k + 1 <= K; ++k) av[k] = a[k - 1];
  for (std::size_t k = 2; k <= K; ++k) bv[k] = b[k - 2];
  return RateKernel(K, std::move(av), std::move(bv));
}

}  // namespace bd
