#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "bd/deterministic.hpp"
#include "bd/kernel.hpp"
#include "bd/rng.hpp"
#include "bd/state.hpp"
#include "bd/weights.hpp"

namespace bd {

// All fluctuation numerics run in unweighted species coordinates; the weighted
// space enters through norms and diagnostics only (the law is weight-free).

struct FluctuationPath {
  std::vector<double> times;
  std::vector<Vec> W;
  std::vector<double> w_norm;  // filled when a weight sequence is supplied
  bool dt_warning = false;     // dt above the estimated stability threshold
};

struct EmOptions {
  double dt = 1e-3;
  std::size_t store_stride = 1;  // keep every n-th step in the path
  bool noise = true;
};

// Euler-Maruyama along an interpolated mean trajectory; drift and noise are
// refreshed from c(t) every step and applied matrix-free.
FluctuationPath em_integrate(const Vec& W0, const OdeTrajectory& mean,
                             const RateKernel& kernel, double t_end,
                             const EmOptions& opts, Rng& rng,
                             const WeightSequence* w_norm = nullptr);

struct CovarianceMatrix {
  Eigen::MatrixXd sigma;
  double time = 0.0;
};

// Second-moment flow dS/dt = A(c(t)) S + S A(c(t))^T + B B^T(c(t)), RK4 at
// fixed dt, symmetrized each step. For deterministic W(0) this is the exact
// covariance of the Gaussian solution.
CovarianceMatrix covariance_ode(const CovarianceMatrix& sigma0,
                                const OdeTrajectory& mean, const RateKernel& kernel,
                                double t_end, double dt);

// Same flow, reporting the covariance at each requested time (increasing).
std::vector<CovarianceMatrix> covariance_ode_path(const CovarianceMatrix& sigma0,
                                                  const OdeTrajectory& mean,
                                                  const RateKernel& kernel,
                                                  std::span<const double> times,
                                                  double dt);

// Orthonormal basis of the mass-null hyperplane {v : sum k v_k = 0}, K x (K-1).
Eigen::MatrixXd mass_null_basis(std::size_t K);

// Stationary covariance of the equilibrium fluctuation process: the Lyapunov
// equation A S + S A^T + B B^T = 0 restricted to the mass-null subspace (the
// unrestricted problem is singular because A annihilates mass), solved by a
// complex-Schur direct method and embedded back into species coordinates.
Eigen::MatrixXd stationary_covariance(const EquilibriumProfile& eq,
                                      const RateKernel& kernel);

// Symmetric PSD square root; eigenvalues above -1e-10 * trace clip to zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& S);

// Stationary path: W(0) ~ N(0, stationary covariance), then Euler-Maruyama
// with the mean frozen at the fixed point.
FluctuationPath ou_equilibrium_sample(const EquilibriumProfile& eq,
                                      const RateKernel& kernel, double t_end,
                                      const EmOptions& opts, Rng& rng,
                                      const WeightSequence* w_norm = nullptr);

// Power-iteration estimate of the dominant eigenvalue magnitude of the drift
// operator at c; the Euler-Maruyama stability threshold is 2 over this.
double drift_spectral_radius_estimate(std::span<const double> c,
                                      const RateKernel& kernel,
                                      std::size_t iterations = 64);

}  // namespace bd
