#include "bd/fluctuation.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include <Eigen/Eigenvalues>

#include "bd/errors.hpp"
#include "bd/operators.hpp"

namespace bd {

namespace {

// Noise increment tau(diag(sqrt(s(c))) xi) accumulated channel by channel; the
// fragmentation column is the negated aggregation column, so each size k takes
// one combined amplitude eta_k = sqrt(s_agg) xi_a - sqrt(s_frag) xi_f.
void add_noise(std::span<const double> flux, double sqrt_dt, Rng& rng,
               std::span<double> W) {
  const std::size_t K = W.size();
  for (std::size_t k = 1; k <= K - 1; ++k) {
    double sa = flux[agg_channel(k)];
    double sf = flux[frag_channel(k)];
    sa = sa > 0.0 ? std::sqrt(sa) : 0.0;
    sf = sf > 0.0 ? std::sqrt(sf) : 0.0;
    const double eta = sqrt_dt * (sa * rng.normal() - sf * rng.normal());
    if (eta == 0.0) continue;
    if (k == 1) {
      W[0] -= 2.0 * eta;
      W[1] += eta;
    } else {
      W[0] -= eta;
      W[k - 1] -= eta;
      W[k] += eta;
    }
  }
}

}  // namespace

double drift_spectral_radius_estimate(std::span<const double> c,
                                      const RateKernel& kernel,
                                      std::size_t iterations) {
  const std::size_t K = kernel.truncation();
  Vec x(K), y(K), scratch(channel_count(K));
  Rng rng(0x5eedu);
  for (auto& v : x) v = rng.normal();
  double norm = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    drift_apply(c, x, kernel, y, scratch);
    norm = 0.0;
    for (double v : y) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    for (std::size_t i = 0; i < K; ++i) x[i] = y[i] / norm;
  }
  return norm;
}

FluctuationPath em_integrate(const Vec& W0, const OdeTrajectory& mean,
                             const RateKernel& kernel, double t_end,
                             const EmOptions& opts, Rng& rng,
                             const WeightSequence* w_norm) {
  const std::size_t K = kernel.truncation();
  if (W0.size() != K)
    throw DimensionError("em_integrate: W0 length " + std::to_string(W0.size()) +
                         " != K = " + std::to_string(K));
  if (!(opts.dt > 0.0)) throw DomainError("em_integrate: dt must be positive");
  if (mean.dense == nullptr)
    throw DomainError("em_integrate: mean trajectory lacks dense output");
  if (mean.dense->t_back() < t_end - 1e-12)
    throw DomainError("em_integrate: mean trajectory does not cover the horizon");

  FluctuationPath path;
  Vec c(K), W = W0, drift(K), scratch(channel_count(K)), flux(channel_count(K));
  std::vector<double> wtab;
  if (w_norm) wtab = w_norm->table(K);

  mean.eval(0.0, c);
  const double rho = drift_spectral_radius_estimate(c, kernel);
  path.dt_warning = rho > 0.0 && opts.dt > 2.0 / rho;

  const auto n_steps = static_cast<std::size_t>(std::ceil(t_end / opts.dt - 1e-9));

  auto record = [&](double t) {
    path.times.push_back(t);
    path.W.push_back(W);
    if (w_norm) path.w_norm.push_back(weighted_norm(W, wtab));
  };
  record(0.0);

  double t = 0.0;
  for (std::size_t step = 0; step < n_steps; ++step) {
    const double dt = std::min(opts.dt, t_end - t);
    mean.eval(t, c);
    drift_apply(c, W, kernel, drift, scratch);
    if (opts.noise) eval_s(c, kernel, flux);
    for (std::size_t i = 0; i < K; ++i) W[i] += dt * drift[i];
    if (opts.noise) add_noise(flux, std::sqrt(dt), rng, W);
    t += dt;
    if ((step + 1) % opts.store_stride == 0 || step + 1 == n_steps) record(t);
  }
  return path;
}

namespace {

void check_symmetric(const Eigen::MatrixXd& S, double tol, const char* what) {
  const double asym = (S - S.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
  if (asym > tol * scale)
    throw NumericalError(std::string(what) + ": asymmetry " + std::to_string(asym) +
                         " beyond tolerance");
}

// dS/dt = A S + S A^T + Q with A applied matrix-free column by column.
void covariance_rhs(std::span<const double> c, const RateKernel& kernel,
                    const Eigen::MatrixXd& S, Eigen::MatrixXd& out, Vec& col,
                    Vec& res, Vec& scratch) {
  const auto K = static_cast<std::size_t>(S.rows());
  for (std::size_t j = 0; j < K; ++j) {
    for (std::size_t i = 0; i < K; ++i) col[i] = S(i, j);
    drift_apply(c, col, kernel, res, scratch);
    for (std::size_t i = 0; i < K; ++i) out(i, j) = res[i];
  }
  out = (out + out.transpose()).eval();
  const auto Q = noise_covariance_matrix(c, kernel, K);
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j) out(i, j) += Q[i * K + j];
}

}  // namespace

std::vector<CovarianceMatrix> covariance_ode_path(const CovarianceMatrix& sigma0,
                                                  const OdeTrajectory& mean,
                                                  const RateKernel& kernel,
                                                  std::span<const double> times,
                                                  double dt) {
  const std::size_t K = kernel.truncation();
  if (sigma0.sigma.rows() != static_cast<Eigen::Index>(K) ||
      sigma0.sigma.cols() != static_cast<Eigen::Index>(K))
    throw DimensionError("covariance_ode: Sigma0 must be K x K");
  if (!(dt > 0.0)) throw DomainError("covariance_ode: dt must be positive");
  check_symmetric(sigma0.sigma, 1e-12, "covariance_ode: Sigma0");
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma0.sigma);
    if (es.eigenvalues().minCoeff() <
        -1e-10 * std::max(sigma0.sigma.trace(), 1.0))
      throw DomainError("covariance_ode: Sigma0 must be positive semidefinite");
  }
  for (std::size_t i = 0; i < times.size(); ++i)
    if (i > 0 && !(times[i] > times[i - 1]))
      throw DomainError("covariance_ode: report times must be increasing");

  Eigen::MatrixXd S = sigma0.sigma;
  Eigen::MatrixXd k1(K, K), k2(K, K), k3(K, K), k4(K, K), tmp(K, K);
  Vec c(K), col(K), res(K), scratch(channel_count(K));
  std::vector<CovarianceMatrix> out;
  out.reserve(times.size());

  double t = sigma0.time;
  auto rhs = [&](double tt, const Eigen::MatrixXd& M, Eigen::MatrixXd& R) {
    mean.eval(tt, c);
    covariance_rhs(c, kernel, M, R, col, res, scratch);
  };

  for (double target : times) {
    if (target < t - 1e-12)
      throw DomainError("covariance_ode: report time before current time");
    while (t < target - 1e-12) {
      const double h = std::min(dt, target - t);
      rhs(t, S, k1);
      tmp = S + 0.5 * h * k1;
      rhs(t + 0.5 * h, tmp, k2);
      tmp = S + 0.5 * h * k2;
      rhs(t + 0.5 * h, tmp, k3);
      tmp = S + h * k3;
      rhs(t + h, tmp, k4);
      S += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      check_symmetric(S, 1e-9, "covariance_ode");
      S = (0.5 * (S + S.transpose())).eval();
      t += h;
    }
    out.push_back(CovarianceMatrix{S, target});
  }
  return out;
}

CovarianceMatrix covariance_ode(const CovarianceMatrix& sigma0,
                                const OdeTrajectory& mean, const RateKernel& kernel,
                                double t_end, double dt) {
  const double times[1] = {t_end};
  auto path = covariance_ode_path(sigma0, mean, kernel, times, dt);
  return path.back();
}

Eigen::MatrixXd mass_null_basis(std::size_t K) {
  // Householder reflector mapping e_1 to the normalized mass vector; columns
  // 2..K then span the orthogonal complement of (1, 2, ..., K).
  Eigen::VectorXd m(K);
  for (std::size_t i = 0; i < K; ++i) m(i) = static_cast<double>(i + 1);
  m.normalize();
  Eigen::VectorXd v = m;
  v(0) -= 1.0;
  const double vn = v.norm();
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(K, K);
  if (vn > 0.0) {
    v /= vn;
    H -= 2.0 * v * v.transpose();
  }
  return H.rightCols(K - 1);
}

Eigen::MatrixXd stationary_covariance(const EquilibriumProfile& eq,
                                      const RateKernel& kernel) {
  const std::size_t K = kernel.truncation();
  if (eq.profile.size() != K)
    throw DimensionError("stationary_covariance: profile length != K");
  if (eq.detailed_balance_residual(kernel) > 1e-10)
    throw DomainError(
        "stationary_covariance: profile violates detailed balance beyond 1e-10");

  const auto Avec = drift_matrix(eq.profile.v, kernel, K);
  const auto Qvec = noise_covariance_matrix(eq.profile.v, kernel, K);
  Eigen::MatrixXd A(K, K), Q(K, K);
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j) {
      A(i, j) = Avec[i * K + j];
      Q(i, j) = Qvec[i * K + j];
    }

  const Eigen::MatrixXd P = mass_null_basis(K);
  const Eigen::MatrixXd Ar = P.transpose() * A * P;
  const Eigen::MatrixXd Qr = P.transpose() * Q * P;

  const Eigen::ComplexSchur<Eigen::MatrixXd> schur(Ar);
  const Eigen::MatrixXcd& T = schur.matrixT();
  const Eigen::MatrixXcd& U = schur.matrixU();
  const auto m = static_cast<Eigen::Index>(K - 1);

  double max_re = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < m; ++i) max_re = std::max(max_re, T(i, i).real());
  if (max_re >= -1e-12)
    throw InstabilityError(
        "stationary_covariance: reduced drift not Hurwitz (max Re eig = " +
        std::to_string(max_re) + ")");

  // Bartels-Stewart on the triangular form: T Y + Y T^* = -U^* Qr U, solved
  // column by column from the last.
  const Eigen::MatrixXcd C = -(U.adjoint() * Qr.cast<std::complex<double>>() * U);
  Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(m, m);
  for (Eigen::Index j = m - 1; j >= 0; --j) {
    Eigen::VectorXcd rhs = C.col(j);
    for (Eigen::Index l = j + 1; l < m; ++l) rhs -= std::conj(T(j, l)) * Y.col(l);
    // (T + conj(T_jj) I) y = rhs, upper-triangular back substitution.
    const std::complex<double> shift = std::conj(T(j, j));
    for (Eigen::Index i = m - 1; i >= 0; --i) {
      std::complex<double> acc = rhs(i);
      for (Eigen::Index l = i + 1; l < m; ++l) acc -= T(i, l) * Y(l, j);
      Y(i, j) = acc / (T(i, i) + shift);
    }
  }
  const Eigen::MatrixXcd Sr_c = U * Y * U.adjoint();
  Eigen::MatrixXd Sr = Sr_c.real();
  Sr = (0.5 * (Sr + Sr.transpose())).eval();

  Eigen::MatrixXd S = P * Sr * P.transpose();
  return (0.5 * (S + S.transpose())).eval();
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& S) {
  check_symmetric(S, 1e-9, "psd_sqrt");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const double trace = std::max(S.trace(), 0.0);
  Eigen::VectorXd lam = es.eigenvalues();
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam(i) < -1e-10 * std::max(trace, 1e-300))
      throw NumericalError("psd_sqrt: matrix has a significantly negative eigenvalue");
    lam(i) = lam(i) > 0.0 ? std::sqrt(lam(i)) : 0.0;
  }
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

FluctuationPath ou_equilibrium_sample(const EquilibriumProfile& eq,
                                      const RateKernel& kernel, double t_end,
                                      const EmOptions& opts, Rng& rng,
                                      const WeightSequence* w_norm) {
  const std::size_t K = kernel.truncation();
  const Eigen::MatrixXd S = stationary_covariance(eq, kernel);
  const Eigen::MatrixXd root = psd_sqrt(S);
  Eigen::VectorXd xi(K);
  for (std::size_t i = 0; i < K; ++i) xi(i) = rng.normal();
  const Eigen::VectorXd w0 = root * xi;
  Vec W0(K);
  for (std::size_t i = 0; i < K; ++i) W0[i] = w0(i);
  const auto frozen = constant_trajectory(eq.profile, t_end);
  return em_integrate(W0, frozen, kernel, t_end, opts, rng, w_norm);
}

}  // namespace bd
