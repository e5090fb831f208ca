#pragma once

#include <stdexcept>
#include <string>

namespace bd {

// Vector lengths disagree with the truncation size K.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Invalid values: nonpositive rates, negative concentrations, out-of-range indices.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Config-file or CLI validation failure. Maps to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failures. Map to exit code 2.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Adaptive step size underflowed: tolerance/kernel mismatch.
struct StiffnessError : NumericalError {
  using NumericalError::NumericalError;
};

// Reduced drift operator is not Hurwitz: equilibrium not attracting within truncation.
struct InstabilityError : NumericalError {
  using NumericalError::NumericalError;
};

// Truncated mass function never reaches 1 below the radius estimate.
struct NoFixedPointError : NumericalError {
  using NumericalError::NumericalError;
};

// Initial profile cannot be rounded to an integer state of the requested mass.
struct InfeasibleProfileError : DomainError {
  using DomainError::DomainError;
};

}  // namespace bd
