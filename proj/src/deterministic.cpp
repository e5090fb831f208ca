#include "bd/deterministic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bd/errors.hpp"
#include "bd/operators.hpp"

namespace bd {

void bd_rhs(std::span<const double> c, const RateKernel& kernel, std::span<double> out,
            std::span<double> scratch) {
  eval_s(c, kernel, scratch);
  apply_tau(scratch, out);
}

Vec bd_rhs(const Concentration& c, const RateKernel& kernel) {
  Vec out(c.size());
  Vec scratch(channel_count(kernel.truncation()));
  bd_rhs(c.v, kernel, out, scratch);
  return out;
}

void DenseOdeSolution::push_segment(double t0, double h, std::span<const double> y0,
                                    std::span<const double> y1,
                                    std::span<const double> f0,
                                    std::span<const double> f1) {
  t0_.push_back(t0);
  h_.push_back(h);
  y0_.insert(y0_.end(), y0.begin(), y0.end());
  y1_.insert(y1_.end(), y1.begin(), y1.end());
  f0_.insert(f0_.end(), f0.begin(), f0.end());
  f1_.insert(f1_.end(), f1.begin(), f1.end());
}

void DenseOdeSolution::eval(double t, std::span<double> out) const {
  if (t0_.empty()) throw NumericalError("DenseOdeSolution: empty solution");
  // Locate the segment containing t; clamp to the covered window.
  std::size_t lo = 0;
  if (t > t0_.front()) {
    auto it = std::upper_bound(t0_.begin(), t0_.end(), t);
    lo = static_cast<std::size_t>(it - t0_.begin());
    if (lo > 0) --lo;
  }
  const double h = h_[lo];
  double th = (t - t0_[lo]) / h;
  th = std::clamp(th, 0.0, 1.0);
  const double u = th, u2 = u * u, u3 = u2 * u;
  const double h00 = 2 * u3 - 3 * u2 + 1;
  const double h10 = u3 - 2 * u2 + u;
  const double h01 = -2 * u3 + 3 * u2;
  const double h11 = u3 - u2;
  const double* y0 = &y0_[lo * dim_];
  const double* y1 = &y1_[lo * dim_];
  const double* f0 = &f0_[lo * dim_];
  const double* f1 = &f1_[lo * dim_];
  for (std::size_t i = 0; i < dim_; ++i)
    out[i] = h00 * y0[i] + h01 * y1[i] + h * (h10 * f0[i] + h11 * f1[i]);
}

namespace {

// Dormand-Prince 5(4) coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

OdeTrajectory integrate_bd(const Concentration& c0, const RateKernel& kernel,
                           double t_end, std::span<const double> output_times,
                           const IntegrateOptions& opts) {
  const std::size_t K = kernel.truncation();
  if (c0.size() != K)
    throw DimensionError("integrate_bd: initial state length " +
                         std::to_string(c0.size()) + " != K = " + std::to_string(K));
  if (t_end < 0.0) throw DomainError("integrate_bd: t_end must be nonnegative");
  for (std::size_t i = 0; i < output_times.size(); ++i) {
    if (output_times[i] < 0.0 || output_times[i] > t_end)
      throw DomainError("integrate_bd: output time outside [0, t_end]");
    if (i > 0 && !(output_times[i] > output_times[i - 1]))
      throw DomainError("integrate_bd: output times must be strictly increasing");
  }

  auto dense = std::make_shared<DenseOdeSolution>(K);
  Vec y = c0.v;
  Vec scratch(channel_count(K));
  Vec f(K), ynew(K), fnew(K), err(K);
  Vec k2(K), k3(K), k4(K), k5(K), k6(K), ystage(K);

  bd_rhs(y, kernel, f, scratch);

  if (t_end == 0.0) {
    // Degenerate window: a single constant segment so eval(0) works.
    dense->push_segment(0.0, 1.0, y, y, Vec(K, 0.0), Vec(K, 0.0));
  } else {
    double t = 0.0;
    double fmax = 0.0;
    for (double v : f) fmax = std::max(fmax, std::abs(v));
    double h = std::min(t_end, 1e-3 / std::max(1.0, fmax));
    bool rejected = false;
    std::size_t steps = 0;

    while (t < t_end) {
      if (++steps > opts.max_steps)
        throw StiffnessError("integrate_bd: step budget exceeded");
      if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, t))
        throw StiffnessError("integrate_bd: step size underflow at t = " +
                             std::to_string(t));
      if (t + h > t_end) h = t_end - t;

      for (std::size_t i = 0; i < K; ++i) ystage[i] = y[i] + h * a21 * f[i];
      bd_rhs(ystage, kernel, k2, scratch);
      for (std::size_t i = 0; i < K; ++i)
        ystage[i] = y[i] + h * (a31 * f[i] + a32 * k2[i]);
      bd_rhs(ystage, kernel, k3, scratch);
      for (std::size_t i = 0; i < K; ++i)
        ystage[i] = y[i] + h * (a41 * f[i] + a42 * k2[i] + a43 * k3[i]);
      bd_rhs(ystage, kernel, k4, scratch);
      for (std::size_t i = 0; i < K; ++i)
        ystage[i] = y[i] + h * (a51 * f[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
      bd_rhs(ystage, kernel, k5, scratch);
      for (std::size_t i = 0; i < K; ++i)
        ystage[i] = y[i] + h * (a61 * f[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                                a65 * k5[i]);
      bd_rhs(ystage, kernel, k6, scratch);
      for (std::size_t i = 0; i < K; ++i)
        ynew[i] = y[i] + h * (b1 * f[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] +
                              b6 * k6[i]);
      bd_rhs(ynew, kernel, fnew, scratch);

      double errnorm = 0.0;
      for (std::size_t i = 0; i < K; ++i) {
        const double e = h * (e1 * f[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                              e6 * k6[i] + e7 * fnew[i]);
        const double sc =
            opts.atol + opts.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
        const double q = e / sc;
        errnorm += q * q;
      }
      errnorm = std::sqrt(errnorm / static_cast<double>(K));

      double undershoot = 0.0;
      for (double v : ynew) undershoot = std::min(undershoot, v);

      if (errnorm <= 1.0 && undershoot >= -opts.atol) {
        bool clipped = false;
        for (auto& v : ynew)
          if (v < 0.0) {
            v = 0.0;
            clipped = true;
          }
        if (clipped) bd_rhs(ynew, kernel, fnew, scratch);
        dense->push_segment(t, h, y, ynew, f, fnew);
        t += h;
        y.swap(ynew);
        f.swap(fnew);
        double fac = 0.9 * std::pow(std::max(errnorm, 1e-10), -0.2);
        fac = std::clamp(fac, 0.2, rejected ? 1.0 : 5.0);
        h *= fac;
        rejected = false;
      } else if (errnorm > 1.0) {
        const double fac =
            std::clamp(0.9 * std::pow(errnorm, -0.2), 0.1, 0.9);
        h *= fac;
        rejected = true;
      } else {
        // Error accepted but a component undershot below -atol.
        h *= 0.5;
        rejected = true;
      }
    }
  }

  OdeTrajectory traj;
  traj.dense = dense;
  const double m0 = mass(c0.v);
  Vec out(K);
  for (double t : output_times) {
    dense->eval(t, out);
    for (auto& v : out)
      if (v < 0.0 && v > -1e-9) v = 0.0;
    traj.times.push_back(t);
    traj.states.push_back(Concentration{out});
    traj.mass_drift = std::max(traj.mass_drift, std::abs(mass(out) - m0));
  }
  return traj;
}

OdeTrajectory constant_trajectory(const Concentration& c, double t_end) {
  auto dense = std::make_shared<DenseOdeSolution>(c.size());
  Vec zero(c.size(), 0.0);
  dense->push_segment(0.0, std::max(t_end, 1.0), c.v, c.v, zero, zero);
  OdeTrajectory traj;
  traj.times = {0.0, t_end};
  traj.states = {c, c};
  traj.mass_drift = 0.0;
  traj.dense = dense;
  return traj;
}

std::vector<double> compute_R(const RateKernel& kernel) {
  const std::size_t K = kernel.truncation();
  std::vector<double> lr(K, 0.0);
  for (std::size_t k = 2; k <= K; ++k) {
    const double ak = kernel.a(k - 1), bk = kernel.b(k);
    if (!(ak > 0.0) || !(bk > 0.0))
      throw DomainError("compute_R: rates must be positive");
    lr[k - 1] = lr[k - 2] + std::log(ak) - std::log(bk);
  }
  return lr;
}

namespace {

// Truncated mass series g(z) = sum k R_k z^k and z g'(z)-style derivative,
// evaluated in log space; returns +inf on overflow.
void mass_series(const std::vector<double>& lr, double z, double& g, double& dg) {
  g = 0.0;
  dg = 0.0;
  const double lz = std::log(z);
  for (std::size_t k = 1; k <= lr.size(); ++k) {
    const double ex = lr[k - 1] + static_cast<double>(k) * lz;
    if (ex > 700.0) {
      g = std::numeric_limits<double>::infinity();
      dg = std::numeric_limits<double>::infinity();
      return;
    }
    const double term = static_cast<double>(k) * std::exp(ex);
    g += term;
    dg += static_cast<double>(k) * term / z;
  }
}

}  // namespace

double EquilibriumProfile::detailed_balance_residual(const RateKernel& kernel) const {
  double res = 0.0;
  const std::size_t K = profile.size();
  for (std::size_t k = 1; k <= K - 1; ++k)
    res = std::max(res, std::abs(kernel.a(k) * c1 * profile[k - 1] -
                                 kernel.b(k + 1) * profile[k]));
  return res;
}

EquilibriumProfile equilibrium_density(const RateKernel& kernel, double tol) {
  if (!(tol > 0.0)) throw DomainError("equilibrium_density: tol must be positive");
  const std::size_t K = kernel.truncation();
  auto lr = compute_R(kernel);

  // Radius estimate from the tail slope of log R_k / k.
  double slope = -std::numeric_limits<double>::infinity();
  for (std::size_t k = std::max<std::size_t>(1, K / 2); k <= K; ++k)
    slope = std::max(slope, lr[k - 1] / static_cast<double>(k));
  const double zs = std::exp(-slope);

  double lo = std::min(tol, 1e-3);
  double hi = std::min(zs * (1.0 - 1e-9), 1.0 - 1e-9);
  double g, dg;
  mass_series(lr, hi, g, dg);
  if (!(g >= 1.0))
    throw NoFixedPointError(
        "equilibrium_density: truncated mass series stays below 1 on (0, zs); "
        "no fixed point within truncation (zs estimate " +
        std::to_string(zs) + ")");
  for (int tries = 0; tries < 8; ++tries) {
    mass_series(lr, lo, g, dg);
    if (g < 1.0) break;
    lo *= 1e-6;
  }
  if (g >= 1.0) throw NoFixedPointError("equilibrium_density: no bracket below 1");

  for (int it = 0; it < 200 && (hi - lo) > 1e-17 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    mass_series(lr, mid, g, dg);
    (g < 1.0 ? lo : hi) = mid;
  }
  double z = 0.5 * (lo + hi);
  for (int it = 0; it < 10; ++it) {
    mass_series(lr, z, g, dg);
    if (!std::isfinite(g) || dg == 0.0) break;
    const double step = (g - 1.0) / dg;
    const double znew = std::clamp(z - step, lo, hi);
    if (znew == z) break;
    z = znew;
  }
  mass_series(lr, z, g, dg);
  if (std::abs(g - 1.0) > std::max(tol, 1e-12))
    throw NumericalError("equilibrium_density: root polish failed, |g-1| = " +
                         std::to_string(std::abs(g - 1.0)));

  // Multiplicative profile keeps detailed balance exact to roundoff;
  // entries below 1e-300 flush to zero to avoid subnormal pollution.
  Vec prof(K, 0.0);
  double p = z;
  prof[0] = p;
  for (std::size_t k = 2; k <= K && p > 0.0; ++k) {
    p *= (kernel.a(k - 1) / kernel.b(k)) * z;
    if (p < 1e-300) p = 0.0;
    prof[k - 1] = p;
  }

  EquilibriumProfile eq;
  eq.c1 = z;
  eq.profile = Concentration{std::move(prof)};
  eq.zs = zs;
  eq.log_R = std::move(lr);
  return eq;
}

}  // namespace bd
