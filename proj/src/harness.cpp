#include "bd/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "bd/errors.hpp"
#include "bd/fluctuation.hpp"
#include "bd/operators.hpp"

namespace bd {

namespace {

struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  }
  void f64(double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, sizeof(u));
    bytes(&u, sizeof(u));
  }
  void u64(std::uint64_t v) { bytes(&v, sizeof(v)); }
};

double mean_of(std::span<const double> xs) {
  return pairwise_sum(xs) / static_cast<double>(xs.size());
}

double std_err_of(std::span<const double> xs, double mean) {
  if (xs.size() < 2) return 0.0;
  std::vector<double> sq(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = xs[i] - mean;
    sq[i] = d * d;
  }
  const double var = pairwise_sum(sq) / static_cast<double>(xs.size() - 1);
  return std::sqrt(var / static_cast<double>(xs.size()));
}

}  // namespace

void EnsembleSpec::validate() const {
  if (N_list.empty()) throw ConfigError("ensemble: N_list must not be empty");
  for (auto n : N_list)
    if (n < 1) throw ConfigError("ensemble: mass sizes must be >= 1");
  if (M < 2) throw ConfigError("ensemble: at least 2 replicas required");
  if (!(T > 0.0)) throw ConfigError("ensemble: horizon T must be positive");
  if (sample_count < 1) throw ConfigError("ensemble: sample_count must be >= 1");
  if (K_stat < 1 || K_stat > kernel.truncation())
    throw ConfigError("ensemble: K_stat must lie in 1..K");
  if (c0.size() != kernel.truncation())
    throw ConfigError("ensemble: initial profile length != K");
  for (double t : report_times)
    if (t < 0.0 || t > T) throw ConfigError("ensemble: report time outside [0, T]");
  validate_companion(weights, companion);
}

std::vector<double> EnsembleSpec::sample_times() const {
  std::vector<double> ts(sample_count);
  for (std::size_t i = 1; i <= sample_count; ++i)
    ts[i - 1] = T * static_cast<double>(i) / static_cast<double>(sample_count);
  return ts;
}

std::uint64_t fingerprint(const EnsembleSpec& spec) {
  Fnv1a h;
  const auto K = spec.kernel.truncation();
  h.u64(K);
  for (std::size_t k = 1; k <= K - 1; ++k) h.f64(spec.kernel.a(k));
  for (std::size_t k = 2; k <= K; ++k) h.f64(spec.kernel.b(k));
  h.f64(spec.weights.exponent());
  h.f64(spec.companion.exponent());
  for (auto n : spec.N_list) h.u64(static_cast<std::uint64_t>(n));
  h.u64(spec.M);
  h.f64(spec.T);
  h.u64(spec.sample_count);
  h.u64(spec.K_stat);
  for (double c : spec.c0.v) h.f64(c);
  h.f64(spec.ode_opts.rtol);
  h.f64(spec.ode_opts.atol);
  h.f64(spec.cov_dt);
  for (double t : spec.report_times) h.f64(t);
  return h.h;
}

Vec center_scale(std::span<const std::int64_t> x, std::span<const double> c,
                 std::int64_t N, std::size_t k_stat) {
  if (x.size() != c.size())
    throw DimensionError("center_scale: state and concentration lengths differ");
  k_stat = std::min(k_stat, x.size());
  const double sqn = std::sqrt(static_cast<double>(N));
  Vec W(k_stat);
  for (std::size_t i = 0; i < k_stat; ++i)
    W[i] = (static_cast<double>(x[i]) - static_cast<double>(N) * c[i]) / sqn;
  return W;
}

LlnReport lln_rate(const EnsembleSpec& spec, const RunContext& ctx) {
  spec.validate();
  const std::size_t K = spec.kernel.truncation();
  const auto times = spec.sample_times();
  const auto traj = integrate_bd(spec.c0, spec.kernel, spec.T, times, spec.ode_opts);

  LlnReport report;
  report.master_seed = spec.master_seed;
  report.config_fingerprint = fingerprint(spec);
  if (spec.N_list.size() < 3)
    report.warning = "fewer than 3 mass sizes; slope estimate unreliable";

  const std::size_t M = spec.M;
  for (const std::int64_t N : spec.N_list) {
    std::vector<double> sup_err(M, 0.0);
    parallel_for(M, ctx.workers, [&](std::size_t r) {
      Rng rng = Rng::stream(spec.master_seed, static_cast<std::uint64_t>(N), r);
      ClusterState state = init_from_profile(spec.c0, N);
      ChannelRateTree tree(state, spec.kernel);
      double sup = 0.0;
      ssa_run_observed(state, tree, spec.kernel, spec.T, times, nullptr, rng,
                       [&](std::size_t si, double, const ClusterState& s,
                           const QvTracker*) {
                         const auto& c = traj.states[si].v;
                         double l1 = 0.0;
                         for (std::size_t k = 0; k < K; ++k)
                           l1 += std::abs(static_cast<double>(s.x[k]) /
                                              static_cast<double>(N) -
                                          c[k]);
                         sup = std::max(sup, l1);
                       });
      sup_err[r] = sup;
    });
    LlnRow row;
    row.N = N;
    row.mean_sup_l1 = mean_of(sup_err);
    row.std_err = std_err_of(sup_err, row.mean_sup_l1);
    report.rows.push_back(row);
  }

  report.strictly_decreasing = true;
  for (std::size_t i = 1; i < report.rows.size(); ++i)
    if (!(report.rows[i].mean_sup_l1 < report.rows[i - 1].mean_sup_l1))
      report.strictly_decreasing = false;

  // Least-squares slope of log error against log N.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (const auto& row : report.rows) {
    if (!(row.mean_sup_l1 > 0.0)) continue;
    const double lx = std::log(static_cast<double>(row.N));
    const double ly = std::log(row.mean_sup_l1);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  report.slope = n >= 2 ? (static_cast<double>(n) * sxy - sx * sy) /
                              (static_cast<double>(n) * sxx - sx * sx)
                        : std::numeric_limits<double>::quiet_NaN();
  return report;
}

CltReport clt_compare(const EnsembleSpec& spec, const RunContext& ctx) {
  spec.validate();
  const std::size_t K = spec.kernel.truncation();
  const std::size_t Ks = spec.K_stat;
  if (Ks > 32) throw ConfigError("clt_compare: K_stat must be <= 32");
  if (std::abs(mass(spec.c0.v) - 1.0) > 1e-9)
    throw ConfigError("clt_compare: initial profile mass differs from 1");

  std::vector<double> rts = spec.report_times;
  if (rts.empty()) rts.push_back(spec.T);
  const std::size_t R = rts.size();

  const auto traj = integrate_bd(spec.c0, spec.kernel, spec.T, rts, spec.ode_opts);
  const auto model_path = covariance_ode_path(
      CovarianceMatrix{Eigen::MatrixXd::Zero(K, K), 0.0}, traj, spec.kernel, rts,
      spec.cov_dt);

  const auto wtab = spec.weights.table(K);

  CltReport report;
  report.master_seed = spec.master_seed;
  report.config_fingerprint = fingerprint(spec);
  report.note =
      "finite-truncation, finite-N shadow of the infinite-dimensional limit "
      "theorem; convergence in distribution itself is not reproduced at desk "
      "scale";

  const std::size_t M = spec.M;
  for (const std::int64_t N : spec.N_list) {
    std::vector<double> snaps(M * R * Ks, 0.0);
    std::vector<double> w2s(M * R, 0.0);
    parallel_for(M, ctx.workers, [&](std::size_t r) {
      Rng rng = Rng::stream(spec.master_seed, static_cast<std::uint64_t>(N), r);
      ClusterState state = init_from_profile(spec.c0, N);
      ChannelRateTree tree(state, spec.kernel);
      const double sqn = std::sqrt(static_cast<double>(N));
      ssa_run_observed(
          state, tree, spec.kernel, spec.T, rts, nullptr, rng,
          [&](std::size_t si, double, const ClusterState& s, const QvTracker*) {
            const auto& c = traj.states[si].v;
            double w2 = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
              const double wk = (static_cast<double>(s.x[k]) -
                                 static_cast<double>(N) * c[k]) /
                                sqn;
              w2 += wtab[k] * wk * wk;
              if (k < Ks) snaps[(r * R + si) * Ks + k] = wk;
            }
            w2s[r * R + si] = w2;
          });
    });

    std::vector<double> buf(M), prod(M);
    for (std::size_t si = 0; si < R; ++si) {
      CltBlock block;
      block.N = N;
      block.t = rts[si];
      block.k_stat = Ks;
      block.empirical.assign(Ks * Ks, 0.0);
      block.model.assign(Ks * Ks, 0.0);
      block.zscore.assign(Ks * Ks, 0.0);

      for (std::size_t r = 0; r < M; ++r) buf[r] = w2s[r * R + si];
      block.mean_w2 = mean_of(buf);

      Vec means(Ks);
      for (std::size_t i = 0; i < Ks; ++i) {
        for (std::size_t r = 0; r < M; ++r) buf[r] = snaps[(r * R + si) * Ks + i];
        means[i] = mean_of(buf);
      }
      for (std::size_t i = 0; i < Ks; ++i) {
        for (std::size_t j = i; j < Ks; ++j) {
          for (std::size_t r = 0; r < M; ++r) {
            const double wi = snaps[(r * R + si) * Ks + i] - means[i];
            const double wj = snaps[(r * R + si) * Ks + j] - means[j];
            prod[r] = wi * wj;
          }
          const double cov = pairwise_sum(prod) / static_cast<double>(M - 1);
          block.empirical[i * Ks + j] = cov;
          block.empirical[j * Ks + i] = cov;
        }
      }

      const Eigen::MatrixXd& S = model_path[si].sigma;
      for (std::size_t i = 0; i < Ks; ++i)
        for (std::size_t j = 0; j < Ks; ++j)
          block.model[i * Ks + j] = S(static_cast<Eigen::Index>(i),
                                      static_cast<Eigen::Index>(j));

      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < Ks * Ks; ++i) {
        const double d = block.empirical[i] - block.model[i];
        num += d * d;
        den += block.model[i] * block.model[i];
      }
      block.frob_rel_err = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);

      // Entries whose coordinates barely fluctuate at this N (far-tail cluster
      // sizes with ~0 particles) have meaningless z denominators; they are
      // excluded from the headline max.
      double max_diag = 0.0;
      for (std::size_t i = 0; i < Ks; ++i)
        max_diag = std::max(max_diag, std::max(block.empirical[i * Ks + i],
                                               block.model[i * Ks + i]));
      const double se_floor = 1e-9 * max_diag;
      for (std::size_t i = 0; i < Ks; ++i)
        for (std::size_t j = 0; j < Ks; ++j) {
          const double vii = block.empirical[i * Ks + i];
          const double vjj = block.empirical[j * Ks + j];
          const double vij = block.empirical[i * Ks + j];
          const double se =
              std::sqrt(std::max(vii * vjj + vij * vij, 0.0) /
                        static_cast<double>(M - 1));
          const double z =
              se > 0.0 ? (vij - block.model[i * Ks + j]) / se : 0.0;
          block.zscore[i * Ks + j] = z;
          if (se > se_floor)
            block.max_abs_z = std::max(block.max_abs_z, std::abs(z));
        }
      report.blocks.push_back(std::move(block));
    }
  }
  return report;
}

QvLimitReport qv_limit_check(const EnsembleSpec& spec, const RunContext& ctx) {
  spec.validate();
  const std::size_t K = spec.kernel.truncation();
  const std::size_t C = channel_count(K);
  const std::int64_t N = spec.N_list.back();
  const std::size_t M = spec.M;

  const auto traj = integrate_bd(spec.c0, spec.kernel, spec.T, {}, spec.ode_opts);

  // Composite-Simpson quadrature of s(c(u)) per channel on the dense output.
  const std::size_t quad_n = 4096;
  std::vector<double> ode_integral(C, 0.0);
  {
    Vec c(K), s(C);
    const double h = spec.T / static_cast<double>(quad_n);
    for (std::size_t j = 0; j <= quad_n; ++j) {
      traj.eval(h * static_cast<double>(j), c);
      for (auto& v : c)
        if (v < 0.0) v = 0.0;
      eval_s(c, spec.kernel, s);
      const double wq = (j == 0 || j == quad_n) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
      for (std::size_t i = 0; i < C; ++i) ode_integral[i] += wq * s[i];
    }
    for (std::size_t i = 0; i < C; ++i) ode_integral[i] *= h / 3.0;
  }

  std::vector<double> integrated(M * C, 0.0);
  std::vector<double> qv_ratio(M * C, 0.0);
  std::vector<std::int64_t> counts(M * C, 0);
  parallel_for(M, ctx.workers, [&](std::size_t r) {
    Rng rng = Rng::stream(spec.master_seed, static_cast<std::uint64_t>(N), r);
    ClusterState state = init_from_profile(spec.c0, N);
    ChannelRateTree tree(state, spec.kernel);
    QvTracker qv(K);
    ssa_run_observed(state, tree, spec.kernel, spec.T, {}, &qv, rng,
                     [](std::size_t, double, const ClusterState&, const QvTracker*) {});
    const auto cs = qv.counts();
    const auto is = qv.integrated();
    for (std::size_t i = 0; i < C; ++i) {
      integrated[r * C + i] = is[i];
      counts[r * C + i] = cs[i];
      qv_ratio[r * C + i] =
          is[i] > 0.0
              ? (static_cast<double>(cs[i]) - is[i]) *
                    (static_cast<double>(cs[i]) - is[i]) / is[i]
              : 0.0;
    }
  });

  QvLimitReport report;
  report.N = N;
  report.M = M;
  report.master_seed = spec.master_seed;
  report.config_fingerprint = fingerprint(spec);

  std::vector<double> buf(M);
  for (std::size_t i = 0; i < C; ++i) {
    for (std::size_t r = 0; r < M; ++r) buf[r] = integrated[r * C + i];
    const double mean_int = mean_of(buf);
    std::int64_t total_counts = 0;
    for (std::size_t r = 0; r < M; ++r) total_counts += counts[r * C + i];
    // A channel no replica ever activated has nothing to report.
    if (mean_int == 0.0 && total_counts == 0) {
      ++report.excluded_channels;
      continue;
    }
    QvChannelRow row;
    row.channel = i + 1;
    row.total_counts = total_counts;
    row.mean_integrated_over_N = mean_int / static_cast<double>(N);
    row.ode_integral = ode_integral[i];
    row.rel_err = ode_integral[i] > 0.0
                      ? std::abs(row.mean_integrated_over_N - ode_integral[i]) /
                            ode_integral[i]
                      : std::abs(row.mean_integrated_over_N);
    for (std::size_t r = 0; r < M; ++r) buf[r] = qv_ratio[r * C + i];
    row.variance_ratio = mean_of(buf);
    row.active = mean_int >= 100.0;
    report.rows.push_back(row);
  }
  return report;
}

MomentReport moment_diagnostics(const EnsembleSpec& spec, const RunContext& ctx) {
  spec.validate();
  const std::size_t K = spec.kernel.truncation();
  const std::size_t C = channel_count(K);
  const auto times = spec.sample_times();
  const auto rtab = spec.companion.table(K);

  MomentReport report;
  report.master_seed = spec.master_seed;
  report.config_fingerprint = fingerprint(spec);

  const std::size_t M = spec.M;
  for (const std::int64_t N : spec.N_list) {
    std::vector<double> zeta(M, 0.0), kappa(M, 0.0);
    parallel_for(M, ctx.workers, [&](std::size_t r) {
      Rng rng = Rng::stream(spec.master_seed, static_cast<std::uint64_t>(N), r);
      ClusterState state = init_from_profile(spec.c0, N);
      ChannelRateTree tree(state, spec.kernel);
      QvTracker qv(K);
      const double Nd = static_cast<double>(N);
      const double sqn = std::sqrt(Nd);
      Vec D(C), tauD(K);
      double zsup = 0.0, ksup = 0.0;
      ssa_run_observed(state, tree, spec.kernel, spec.T, times, &qv, rng,
                       [&](std::size_t, double, const ClusterState& s,
                           const QvTracker* q) {
                         double z = 0.0;
                         for (std::size_t k = 0; k < K; ++k)
                           z += rtab[k] * static_cast<double>(s.x[k]) / Nd;
                         zsup = std::max(zsup, z);
                         const auto cs = q->counts();
                         const auto is = q->integrated();
                         for (std::size_t i = 0; i < C; ++i)
                           D[i] = static_cast<double>(cs[i]) - is[i];
                         apply_tau(D, tauD);
                         double kap = 0.0;
                         for (double v : tauD) kap += std::abs(v);
                         ksup = std::max(ksup, kap / sqn);
                       });
      zeta[r] = zsup;
      kappa[r] = ksup;
    });
    MomentRow row;
    row.N = N;
    row.zeta_sup = mean_of(zeta);
    row.kappa_sup = mean_of(kappa);
    report.rows.push_back(row);
  }

  auto ratio = [](const std::vector<MomentRow>& rows, bool zeta) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& row : rows) {
      const double v = zeta ? row.zeta_sup : row.kappa_sup;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return lo > 0.0 ? hi / lo : std::numeric_limits<double>::quiet_NaN();
  };
  report.zeta_ratio = ratio(report.rows, true);
  report.kappa_ratio = ratio(report.rows, false);
  return report;
}

}  // namespace bd
