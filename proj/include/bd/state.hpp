#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bd/errors.hpp"

namespace bd {

using Vec = std::vector<double>;

// sum_k k * v_k (1-based sizes), the conserved mass functional.
inline double mass(std::span<const double> v) {
  double m = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    m += static_cast<double>(i + 1) * v[i];
  return m;
}

// Nonnegative concentration vector of length K with total mass at most 1.
// Element of the phase space of the mean-field model.
struct Concentration {
  Vec v;

  std::size_t size() const { return v.size(); }
  double operator[](std::size_t i) const { return v[i]; }

  static Concentration checked(Vec values) {
    for (std::size_t i = 0; i < values.size(); ++i)
      if (values[i] < 0.0)
        throw DomainError("Concentration: negative entry at size " +
                          std::to_string(i + 1));
    if (mass(values) > 1.0 + 1e-12)
      throw DomainError("Concentration: total mass exceeds 1");
    return Concentration{std::move(values)};
  }
};

}  // namespace bd
