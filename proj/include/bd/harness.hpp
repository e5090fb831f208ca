#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bd/deterministic.hpp"
#include "bd/kernel.hpp"
#include "bd/parallel.hpp"
#include "bd/ssa.hpp"
#include "bd/state.hpp"
#include "bd/weights.hpp"

namespace bd {

struct RunContext {
  std::size_t workers = default_worker_count();
};

// Ensemble description shared by the verification drivers. Reports are a pure
// function of (spec, master_seed): replica r of size N draws from the RNG
// stream (master_seed, N, r) and reductions run in replica order.
struct EnsembleSpec {
  RateKernel kernel;
  WeightSequence weights;    // w, the norm weights
  WeightSequence companion;  // r, the moment-diagnostic weights
  std::vector<std::int64_t> N_list;
  std::size_t M = 100;
  double T = 1.0;
  std::size_t sample_count = 32;
  std::size_t K_stat = 10;
  std::uint64_t master_seed = 1;
  Concentration c0;  // initial mean-field state, length = kernel truncation
  IntegrateOptions ode_opts;
  double cov_dt = 1e-3;
  std::vector<double> report_times;  // covariance report times; defaults to {T}

  void validate() const;
  std::vector<double> sample_times() const;  // i T / sample_count, i = 1..count
};

std::uint64_t fingerprint(const EnsembleSpec& spec);

// W_k = (x_k - N c_k)/sqrt(N) for the first k_stat coordinates.
Vec center_scale(std::span<const std::int64_t> x, std::span<const double> c,
                 std::int64_t N, std::size_t k_stat);

struct LlnRow {
  std::int64_t N = 0;
  double mean_sup_l1 = 0.0;
  double std_err = 0.0;
};

struct LlnReport {
  std::vector<LlnRow> rows;
  double slope = 0.0;  // least-squares slope of log error vs log N
  bool strictly_decreasing = false;
  std::uint64_t master_seed = 0;
  std::uint64_t config_fingerprint = 0;
  std::string warning;
};

LlnReport lln_rate(const EnsembleSpec& spec, const RunContext& ctx = {});

struct CltBlock {
  std::int64_t N = 0;
  double t = 0.0;
  std::size_t k_stat = 0;
  std::vector<double> empirical;  // row-major k_stat x k_stat
  std::vector<double> model;
  std::vector<double> zscore;
  double frob_rel_err = 0.0;
  double max_abs_z = 0.0;
  double mean_w2 = 0.0;  // mean over replicas of ||W^N||_{L2(w)}^2, full range
};

struct CltReport {
  std::vector<CltBlock> blocks;  // ordered by (N, t)
  std::uint64_t master_seed = 0;
  std::uint64_t config_fingerprint = 0;
  std::string note;
};

CltReport clt_compare(const EnsembleSpec& spec, const RunContext& ctx = {});

struct QvChannelRow {
  std::size_t channel = 0;  // 1-based; odd aggregation, even fragmentation
  double mean_integrated_over_N = 0.0;
  double ode_integral = 0.0;
  double rel_err = 0.0;
  double variance_ratio = 0.0;
  std::int64_t total_counts = 0;
  bool active = false;  // mean integrated rate >= 100
};

struct QvLimitReport {
  std::int64_t N = 0;
  std::size_t M = 0;
  std::vector<QvChannelRow> rows;  // channels with any activity
  std::size_t excluded_channels = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t config_fingerprint = 0;
};

QvLimitReport qv_limit_check(const EnsembleSpec& spec, const RunContext& ctx = {});

struct MomentRow {
  std::int64_t N = 0;
  double zeta_sup = 0.0;   // mean over replicas of sup_t sum r_k X_k / N
  double kappa_sup = 0.0;  // mean over replicas of sup_t sum |tau(D)_k| / sqrt(N)
};

struct MomentReport {
  std::vector<MomentRow> rows;
  double zeta_ratio = 0.0;  // max/min across N
  double kappa_ratio = 0.0;
  std::uint64_t master_seed = 0;
  std::uint64_t config_fingerprint = 0;
};

MomentReport moment_diagnostics(const EnsembleSpec& spec, const RunContext& ctx = {});

}  // namespace bd
