#include "bd/ssa.hpp"

#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "bd/errors.hpp"
#include "bd/operators.hpp"

namespace bd {

namespace {

constexpr std::uint64_t kRebuildMask = (1ULL << 20) - 1;

inline void kahan_add(double& sum, double& comp, double v) {
  const double y = v - comp;
  const double t = sum + y;
  comp = (t - sum) - y;
  sum = t;
}

}  // namespace

std::int64_t ClusterState::mass() const {
  std::int64_t m = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    m += static_cast<std::int64_t>(i + 1) * x[i];
  return m;
}

void ClusterState::advance_clock(double dt) { kahan_add(t, t_comp, dt); }

ClusterState init_monomers(std::int64_t N, std::size_t K) {
  if (N < 1) throw DomainError("init_monomers: N must be >= 1");
  if (K < 2) throw DomainError("init_monomers: K must be >= 2");
  ClusterState s;
  s.x.assign(K, 0);
  s.x[0] = N;
  s.N = N;
  return s;
}

ClusterState init_from_profile(const Concentration& c0, std::int64_t N) {
  if (N < 1) throw DomainError("init_from_profile: N must be >= 1");
  const std::size_t K = c0.size();
  if (K < 2) throw DomainError("init_from_profile: K must be >= 2");
  if (std::abs(mass(c0.v) - 1.0) > 1e-9)
    throw DomainError("init_from_profile: profile mass differs from 1 by more than 1e-9");
  ClusterState s;
  s.x.assign(K, 0);
  s.N = N;
  std::int64_t used = 0;
  const double Nd = static_cast<double>(N);
  for (std::size_t k = 2; k <= K; ++k) {
    const auto cnt = static_cast<std::int64_t>(std::floor(Nd * c0[k - 1]));
    s.x[k - 1] = cnt;
    used += static_cast<std::int64_t>(k) * cnt;
  }
  const std::int64_t deficit = N - used;
  if (deficit < 0)
    throw InfeasibleProfileError(
        "init_from_profile: rounded profile exceeds total mass N");
  s.x[0] = deficit;
  return s;
}

SumTree::SumTree(std::size_t n) : n_(n) {
  base_ = 1;
  while (base_ < n_) base_ <<= 1;
  node_.assign(2 * base_, 0.0);
}

void SumTree::set(std::size_t i, double w) {
  std::size_t j = base_ + i;
  node_[j] = w;
  for (j >>= 1; j >= 1; j >>= 1) {
    node_[j] = node_[2 * j] + node_[2 * j + 1];
    if (j == 1) break;
  }
}

std::size_t SumTree::sample(double u) const {
  std::size_t j = 1;
  while (j < base_) {
    const double left = node_[2 * j];
    if (u < left) {
      j = 2 * j;
    } else {
      u -= left;
      j = 2 * j + 1;
    }
  }
  std::size_t i = j - base_;
  if (i >= n_) i = n_ - 1;
  // Rounding can land the descent on an empty leaf; step back to mass.
  while (i > 0 && node_[base_ + i] <= 0.0) --i;
  return i;
}

void SumTree::rebuild() {
  for (std::size_t j = base_ - 1; j >= 1; --j) {
    node_[j] = node_[2 * j] + node_[2 * j + 1];
    if (j == 1) break;
  }
}

ChannelRateTree::ChannelRateTree(const ClusterState& state, const RateKernel& kernel)
    : agg_(kernel.truncation() - 1), frag_(kernel.truncation() - 1) {
  rebuild(state, kernel);
}

double ChannelRateTree::rebuild(const ClusterState& state, const RateKernel& kernel) {
  const double before = total();
  const std::size_t K = kernel.truncation();
  for (std::size_t k = 1; k <= K - 1; ++k) {
    const double xk = static_cast<double>(state.x[k - 1]) - (k == 1 ? 1.0 : 0.0);
    agg_.set(k - 1, kernel.a(k) * std::max(xk, 0.0));
    frag_.set(k - 1, kernel.b(k + 1) * static_cast<double>(state.x[k]));
  }
  agg_.rebuild();
  frag_.rebuild();
  agg_scale_ = static_cast<double>(state.x[0]) / static_cast<double>(state.N);
  const double after = total();
  if (after > 0.0 && before > 0.0)
    max_rebuild_drift_ =
        std::max(max_rebuild_drift_, std::abs(after - before) / after);
  return after;
}

QvTracker::QvTracker(std::size_t K)
    : counts_(channel_count(K), 0),
      integral_(channel_count(K), 0.0),
      agg_mark_(K - 1, 0.0),
      frag_mark_(K - 1, 0.0) {}

void QvTracker::advance(double dt, double x1_over_N) {
  kahan_add(t_, t_comp_, dt);
  kahan_add(phi_, phi_comp_, x1_over_N * dt);
}

void QvTracker::flush_agg(std::size_t k, double stored_weight) {
  integral_[2 * k - 2] += stored_weight * (phi_ - agg_mark_[k - 1]);
  agg_mark_[k - 1] = phi_;
}

void QvTracker::flush_frag(std::size_t k, double rate) {
  integral_[2 * k - 1] += rate * (t_ - frag_mark_[k - 1]);
  frag_mark_[k - 1] = t_;
}

void QvTracker::flush_all(const ChannelRateTree& tree) {
  const std::size_t n = agg_mark_.size();
  for (std::size_t k = 1; k <= n; ++k) {
    flush_agg(k, tree.agg_weight(k));
    flush_frag(k, tree.frag_rate(k));
  }
}

namespace {

// Refresh every channel touched by a change of the count of size s, flushing
// the tracked integrals at the old rates first.
inline void sync_size(const ClusterState& state, const RateKernel& kernel,
                      ChannelRateTree& tree, QvTracker* qv, std::size_t s) {
  const std::size_t K = kernel.truncation();
  if (s == 1) {
    if (qv) qv->flush_agg(1, tree.agg_weight(1));
    const double w = static_cast<double>(state.x[0]) - 1.0;
    tree.set_agg_weight(1, kernel.a(1) * std::max(w, 0.0));
    tree.set_agg_scale(static_cast<double>(state.x[0]) /
                       static_cast<double>(state.N));
  } else {
    if (s <= K - 1) {
      if (qv) qv->flush_agg(s, tree.agg_weight(s));
      tree.set_agg_weight(s, kernel.a(s) * static_cast<double>(state.x[s - 1]));
    }
    if (qv) qv->flush_frag(s - 1, tree.frag_rate(s - 1));
    tree.set_frag_rate(s - 1, kernel.b(s) * static_cast<double>(state.x[s - 1]));
  }
}

inline void apply_jump(ClusterState& state, ChannelRateTree& tree,
                       const RateKernel& kernel, QvTracker* qv, bool aggregation,
                       std::size_t k) {
  auto& x = state.x;
  if (aggregation) {
    if (qv) qv->count_agg(k);
    if (k == 1) {
      x[0] -= 2;
      x[1] += 1;
    } else {
      x[0] -= 1;
      x[k - 1] -= 1;
      x[k] += 1;
    }
  } else {
    if (qv) qv->count_frag(k);
    if (k == 1) {
      x[1] -= 1;
      x[0] += 2;
    } else {
      x[k] -= 1;
      x[k - 1] += 1;
      x[0] += 1;
    }
  }
  if (x[0] < 0 || x[k - 1] < 0 || x[k] < 0)
    throw std::logic_error("ssa: cluster count went negative");
  sync_size(state, kernel, tree, qv, 1);
  if (k >= 2) sync_size(state, kernel, tree, qv, k);
  sync_size(state, kernel, tree, qv, k + 1);

  ++state.event_count;
  if ((state.event_count & kRebuildMask) == 0) {
    tree.rebuild(state, kernel);
    if (state.mass() != state.N)
      throw std::logic_error("ssa: mass invariant violated");
  }
}

}  // namespace

StepOutcome ssa_advance(ClusterState& state, ChannelRateTree& tree,
                        const RateKernel& kernel, Rng& rng, QvTracker* qv,
                        double t_limit, JumpEvent* event) {
  const double R = tree.total();
  const double x1_over_N = tree.agg_scale();
  if (R <= 0.0) {
    const double dt = t_limit - state.t;
    if (dt > 0.0) {
      state.advance_clock(dt);
      if (qv) qv->advance(dt, x1_over_N);
    }
    return StepOutcome::Absorbed;
  }
  const double dt = rng.exponential(R);
  if (!(state.t + dt < t_limit)) {
    const double rest = t_limit - state.t;
    if (rest > 0.0) {
      state.advance_clock(rest);
      if (qv) qv->advance(rest, x1_over_N);
    }
    return StepOutcome::ReachedLimit;
  }
  state.advance_clock(dt);
  if (qv) qv->advance(dt, x1_over_N);

  const double u = rng.uniform01() * R;
  const double agg_part = tree.agg_part();
  bool aggregation;
  std::size_t k;
  if (u < agg_part) {
    aggregation = true;
    k = tree.sample_agg(u / tree.agg_scale());
  } else {
    aggregation = false;
    k = tree.sample_frag(u - agg_part);
  }
  apply_jump(state, tree, kernel, qv, aggregation, k);
  if (event) *event = JumpEvent{state.t, aggregation, k};
  return StepOutcome::Jumped;
}

std::optional<JumpEvent> ssa_step(ClusterState& state, ChannelRateTree& tree,
                                  const RateKernel& kernel, Rng& rng, QvTracker* qv) {
  JumpEvent ev;
  const auto outcome = ssa_advance(state, tree, kernel, rng, qv,
                                   std::numeric_limits<double>::infinity(), &ev);
  if (outcome != StepOutcome::Jumped) return std::nullopt;
  return ev;
}

void ssa_run_observed(ClusterState& state, ChannelRateTree& tree,
                      const RateKernel& kernel, double t_end,
                      std::span<const double> sample_times, QvTracker* qv, Rng& rng,
                      const SampleObserver& observe) {
  for (std::size_t i = 0; i < sample_times.size(); ++i) {
    if (sample_times[i] > t_end)
      throw DomainError("ssa_run: sample time beyond t_end");
    if (i > 0 && !(sample_times[i] > sample_times[i - 1]))
      throw DomainError("ssa_run: sample times must be strictly increasing");
  }
  for (std::size_t si = 0; si < sample_times.size(); ++si) {
    const double ts = sample_times[si];
    for (;;) {
      const auto outcome = ssa_advance(state, tree, kernel, rng, qv, ts);
      if (outcome != StepOutcome::Jumped) break;
    }
    if (qv) qv->flush_all(tree);
    observe(si, ts, state, qv);
  }
  for (;;) {
    const auto outcome = ssa_advance(state, tree, kernel, rng, qv, t_end);
    if (outcome != StepOutcome::Jumped) break;
  }
  if (qv) qv->flush_all(tree);
}

SsaTrajectory ssa_run(ClusterState& state, ChannelRateTree& tree,
                      const RateKernel& kernel, double t_end,
                      std::span<const double> sample_times, QvTracker* qv, Rng& rng,
                      std::size_t k_out) {
  SsaTrajectory out;
  out.times.reserve(sample_times.size());
  out.snapshots.reserve(sample_times.size());
  const std::size_t kk = std::min(k_out, state.truncation());
  ssa_run_observed(state, tree, kernel, t_end, sample_times, qv, rng,
                   [&](std::size_t, double t, const ClusterState& s, const QvTracker*) {
                     out.times.push_back(t);
                     out.snapshots.emplace_back(s.x.begin(), s.x.begin() + kk);
                     out.events_at.push_back(s.event_count);
                   });
  out.events = state.event_count;
  out.absorbed = tree.total() <= 0.0;
  return out;
}

std::vector<QvChannelRecord> qv_report(const QvTracker& qv) {
  std::vector<QvChannelRecord> records;
  records.reserve(qv.channels());
  const auto counts = qv.counts();
  const auto integrated = qv.integrated();
  for (std::size_t i = 0; i < qv.channels(); ++i) {
    QvChannelRecord rec;
    rec.channel = i + 1;
    rec.counts = counts[i];
    rec.integrated_rate = integrated[i];
    if (integrated[i] > 0.0)
      rec.zscore = (static_cast<double>(counts[i]) - integrated[i]) /
                   std::sqrt(integrated[i]);
    records.push_back(rec);
  }
  return records;
}

}  // namespace bd
