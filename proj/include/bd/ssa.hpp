#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "bd/kernel.hpp"
#include "bd/rng.hpp"
#include "bd/state.hpp"

namespace bd {

// Integer cluster counts with exact mass sum k * x_k = N. The clock uses
// compensated accumulation so t stays accurate over 1e8 events.
struct ClusterState {
  std::vector<std::int64_t> x;
  std::int64_t N = 0;
  double t = 0.0;
  double t_comp = 0.0;
  std::uint64_t event_count = 0;

  std::size_t truncation() const { return x.size(); }
  std::int64_t mass() const;
  void advance_clock(double dt);
};

ClusterState init_monomers(std::int64_t N, std::size_t K);

// Deterministic rounding: x_k = floor(N c_k) for k >= 2, monomers absorb the
// mass deficit. Requires sum k c_k = 1 within 1e-9.
ClusterState init_from_profile(const Concentration& c0, std::int64_t N);

// Flat partial-sum tree over n entries: point update and prefix-sum descent in
// O(log n).
class SumTree {
 public:
  explicit SumTree(std::size_t n);
  void set(std::size_t i, double w);
  double get(std::size_t i) const { return node_[base_ + i]; }
  double total() const { return node_[1]; }
  std::size_t sample(double u) const;  // u in [0, total)
  void rebuild();
  std::size_t size() const { return n_; }

 private:
  std::size_t n_, base_;
  std::vector<double> node_;
};

// Per-channel propensities. The monomer count couples to every aggregation
// channel, so the aggregation subtree stores a_k (x_k - 1{k=1}) and the factor
// x_1/N is applied at sampling time; a monomer-count change is O(log K), not O(K).
class ChannelRateTree {
 public:
  ChannelRateTree(const ClusterState& state, const RateKernel& kernel);

  double total() const { return agg_scale_ * agg_.total() + frag_.total(); }
  double agg_part() const { return agg_scale_ * agg_.total(); }
  double agg_scale() const { return agg_scale_; }

  // Stored weight a_k (x_k - 1{k=1}) of aggregation channel k, 1 <= k <= K-1.
  double agg_weight(std::size_t k) const { return agg_.get(k - 1); }
  // Rate b_{k+1} x_{k+1} of fragmentation channel k.
  double frag_rate(std::size_t k) const { return frag_.get(k - 1); }
  double agg_rate(std::size_t k) const { return agg_scale_ * agg_weight(k); }

  std::size_t sample_agg(double u) const { return agg_.sample(u) + 1; }
  std::size_t sample_frag(double u) const { return frag_.sample(u) + 1; }

  void set_agg_weight(std::size_t k, double w) { agg_.set(k - 1, w); }
  void set_frag_rate(std::size_t k, double w) { frag_.set(k - 1, w); }
  void set_agg_scale(double s) { agg_scale_ = s; }

  // Exact bottom-up recompute; returns the relative change of the total.
  double rebuild(const ClusterState& state, const RateKernel& kernel);
  double max_rebuild_drift() const { return max_rebuild_drift_; }

 private:
  SumTree agg_, frag_;
  double agg_scale_;
  double max_rebuild_drift_ = 0.0;
};

// Per-channel jump counts and integrated rates (the compensator of the
// counting martingale). Aggregation channels integrate against
// phi(t) = int x_1/N du so that monomer-count changes stay O(1).
class QvTracker {
 public:
  explicit QvTracker(std::size_t K);

  void advance(double dt, double x1_over_N);
  void flush_agg(std::size_t k, double stored_weight);
  void flush_frag(std::size_t k, double rate);
  void flush_all(const ChannelRateTree& tree);
  void count_agg(std::size_t k) { ++counts_[2 * k - 2]; }
  void count_frag(std::size_t k) { ++counts_[2 * k - 1]; }

  std::size_t channels() const { return counts_.size(); }
  // Channel layout matches the flux operator: 2k-2 aggregation, 2k-1 fragmentation.
  std::span<const std::int64_t> counts() const { return counts_; }
  // Valid after flush_all.
  std::span<const double> integrated() const { return integral_; }
  double clock() const { return t_; }
  double phi() const { return phi_; }

 private:
  std::vector<std::int64_t> counts_;
  std::vector<double> integral_;
  std::vector<double> agg_mark_;   // phi at last flush, per aggregation channel
  std::vector<double> frag_mark_;  // clock at last flush, per fragmentation channel
  double phi_ = 0.0, phi_comp_ = 0.0;
  double t_ = 0.0, t_comp_ = 0.0;
};

struct JumpEvent {
  double t;
  bool aggregation;
  std::size_t k;  // channel size index: (1)+(k) -> (k+1) or (k+1) -> (1)+(k)
};

enum class StepOutcome { Jumped, ReachedLimit, Absorbed };

// Advances to min(next event, t_limit); the jump is applied only when it falls
// strictly inside the window (deterministic sampling reads the left limit).
StepOutcome ssa_advance(ClusterState& state, ChannelRateTree& tree,
                        const RateKernel& kernel, Rng& rng, QvTracker* qv,
                        double t_limit, JumpEvent* event = nullptr);

// Single exact jump; std::nullopt when the chain is absorbed.
std::optional<JumpEvent> ssa_step(ClusterState& state, ChannelRateTree& tree,
                                  const RateKernel& kernel, Rng& rng,
                                  QvTracker* qv = nullptr);

struct SsaTrajectory {
  std::vector<double> times;
  std::vector<std::vector<std::int64_t>> snapshots;
  std::vector<std::uint64_t> events_at;  // events processed up to each sample
  bool absorbed = false;
  std::uint64_t events = 0;
};

// Called at each sample time with the left-limit state; the tracker (if any)
// has been flushed to the sample time.
using SampleObserver =
    std::function<void(std::size_t index, double t, const ClusterState& state,
                       const QvTracker* qv)>;

void ssa_run_observed(ClusterState& state, ChannelRateTree& tree,
                      const RateKernel& kernel, double t_end,
                      std::span<const double> sample_times, QvTracker* qv, Rng& rng,
                      const SampleObserver& observe);

SsaTrajectory ssa_run(ClusterState& state, ChannelRateTree& tree,
                      const RateKernel& kernel, double t_end,
                      std::span<const double> sample_times, QvTracker* qv, Rng& rng,
                      std::size_t k_out);

struct QvChannelRecord {
  std::size_t channel;  // 1-based channel index (odd aggregation, even fragmentation)
  std::int64_t counts;
  double integrated_rate;
  std::optional<double> zscore;  // (counts - rate)/sqrt(rate); null when inactive
};

std::vector<QvChannelRecord> qv_report(const QvTracker& qv);

}  // namespace bd
