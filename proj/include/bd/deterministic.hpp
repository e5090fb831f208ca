#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "bd/kernel.hpp"
#include "bd/state.hpp"

namespace bd {

// Right-hand side of the truncated cluster ODE: tau(s(c)). scratch must hold
// channel_count(K) doubles.
void bd_rhs(std::span<const double> c, const RateKernel& kernel, std::span<double> out,
            std::span<double> scratch);
Vec bd_rhs(const Concentration& c, const RateKernel& kernel);

struct IntegrateOptions {
  double rtol = 1e-8;
  double atol = 1e-12;
  std::size_t max_steps = 50'000'000;
};

// Piecewise cubic Hermite interpolant over the accepted integrator steps.
class DenseOdeSolution {
 public:
  DenseOdeSolution(std::size_t dim) : dim_(dim) {}

  void push_segment(double t0, double h, std::span<const double> y0,
                    std::span<const double> y1, std::span<const double> f0,
                    std::span<const double> f1);

  void eval(double t, std::span<double> out) const;

  double t_front() const { return t0_.empty() ? 0.0 : t0_.front(); }
  double t_back() const { return t0_.empty() ? 0.0 : t0_.back() + h_.back(); }
  std::size_t dim() const { return dim_; }
  std::size_t segments() const { return t0_.size(); }

 private:
  std::size_t dim_;
  std::vector<double> t0_, h_;
  std::vector<double> y0_, y1_, f0_, f1_;  // packed, dim_ values per segment
};

struct OdeTrajectory {
  std::vector<double> times;
  std::vector<Concentration> states;
  double mass_drift = 0.0;
  std::shared_ptr<const DenseOdeSolution> dense;

  // Interpolated state at any t inside the integration window.
  void eval(double t, std::span<double> out) const { dense->eval(t, out); }
};

// Adaptive Dormand-Prince 5(4) integration of the truncated cluster ODE.
// Negative components within -atol are clipped to zero, larger undershoots
// reject the step. Throws StiffnessError on step-size underflow.
OdeTrajectory integrate_bd(const Concentration& c0, const RateKernel& kernel,
                           double t_end, std::span<const double> output_times,
                           const IntegrateOptions& opts = {});

inline OdeTrajectory integrate_bd(const Concentration& c0, const RateKernel& kernel,
                                  double t_end, std::initializer_list<double> times,
                                  const IntegrateOptions& opts = {}) {
  return integrate_bd(c0, kernel, t_end,
                      std::span<const double>(times.begin(), times.size()), opts);
}

// Trajectory frozen at a fixed state (for equilibrium-path consumers).
OdeTrajectory constant_trajectory(const Concentration& c, double t_end);

// log R_k for k = 1..K (index 0 holds log R_1 = 0), computed in log space:
// log R_k = sum_{i=2..k} (log a_{i-1} - log b_i).
std::vector<double> compute_R(const RateKernel& kernel);

struct EquilibriumProfile {
  double c1 = 0.0;              // monomer density at the fixed point
  Concentration profile;        // c_k = R_k c1^k, tail below 1e-300 flushed
  double zs = 0.0;              // truncated convergence-radius estimate
  std::vector<double> log_R;

  // max_k |a_k c1 c_k - b_{k+1} c_{k+1}|
  double detailed_balance_residual(const RateKernel& kernel) const;
};

// Solves sum_k k R_k z^k = 1 on (0, zs) by bisection plus Newton polish.
// Throws NoFixedPointError when the truncated mass function stays below 1.
EquilibriumProfile equilibrium_density(const RateKernel& kernel, double tol = 1e-12);

}  // namespace bd
