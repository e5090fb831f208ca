#include <doctest.h>

#include <cmath>

#include "bd/deterministic.hpp"
#include "bd/errors.hpp"
#include "bd/operators.hpp"
#include "bd/ssa.hpp"
#include "test_util.hpp"

using namespace bd;

TEST_CASE("init_monomers") {
  auto s = init_monomers(4, 8);
  CHECK(s.x[0] == 4);
  CHECK(s.mass() == 4);
  for (std::size_t k = 2; k <= 8; ++k) CHECK(s.x[k - 1] == 0);
  CHECK_THROWS_AS(init_monomers(0, 8), DomainError);
  CHECK_THROWS_AS(init_monomers(4, 1), DomainError);
}

TEST_CASE("init_from_profile deterministic rounding") {
  {
    Vec c(6, 0.0);
    c[0] = 1.0;
    auto s = init_from_profile(Concentration{c}, 100);
    CHECK(s.x[0] == 100);
    CHECK(s.mass() == 100);
  }
  {
    const Vec c{0.5, 0.25};
    auto s = init_from_profile(Concentration{c}, 100);
    CHECK(s.x[1] == 25);
    CHECK(s.x[0] == 50);
    CHECK(s.mass() == 100);
  }
  {
    const auto kern = RateKernel::constant(30, 1.0, 1.0);
    const auto eq = equilibrium_density(kern);
    // Truncated profile re-normalized onto the monomer slot by the deficit rule.
    const std::int64_t N = 10000;
    auto s = init_from_profile(eq.profile, N);
    CHECK(s.mass() == N);
    double l1 = 0.0;
    for (std::size_t k = 1; k <= 30; ++k)
      l1 += std::abs(static_cast<double>(s.x[k - 1]) / static_cast<double>(N) -
                     eq.profile[k - 1]);
    CHECK(l1 <= 0.05);  // sum k/N rounding + tail mass
  }
  {
    Vec c{0.3, 0.2};  // mass 0.7, violates the profile precondition
    CHECK_THROWS_AS(init_from_profile(Concentration{c}, 100), DomainError);
  }
}

TEST_CASE("single jumps by hand") {
  const auto kern = RateKernel::constant(8, 1.0, 1.0);
  {
    auto s = init_monomers(4, 8);
    ChannelRateTree tree(s, kern);
    CHECK(tree.total() == doctest::Approx(3.0).epsilon(1e-14));  // 4*3/4
    Rng rng(1);
    const auto ev = ssa_step(s, tree, kern, rng);
    REQUIRE(ev.has_value());
    CHECK(ev->aggregation);
    CHECK(ev->k == 1);
    CHECK(s.x[0] == 2);
    CHECK(s.x[1] == 1);
    CHECK(s.mass() == 4);
  }
  {
    ClusterState s;
    s.x = {0, 2, 0, 0};
    s.N = 4;
    const auto kern4 = RateKernel::constant(4, 1.0, 1.0);
    ChannelRateTree tree(s, kern4);
    CHECK(tree.total() == doctest::Approx(2.0).epsilon(1e-14));  // b2 * x2
    Rng rng(2);
    const auto ev = ssa_step(s, tree, kern4, rng);
    REQUIRE(ev.has_value());
    CHECK_FALSE(ev->aggregation);
    CHECK(ev->k == 1);
    CHECK(s.x[0] == 2);
    CHECK(s.x[1] == 1);
    CHECK(s.mass() == 4);
  }
}

TEST_CASE("absorbing single-monomer chain") {
  const auto kern = RateKernel::constant(4, 1.0, 1.0);
  auto s = init_monomers(1, 4);
  ChannelRateTree tree(s, kern);
  CHECK(tree.total() == 0.0);  // a1 * 1 * 0 / 1
  Rng rng(3);
  CHECK_FALSE(ssa_step(s, tree, kern, rng).has_value());

  const std::vector<double> times{0.25, 0.5, 1.0};
  auto traj = ssa_run(s, tree, kern, 1.0, times, nullptr, rng, 4);
  CHECK(traj.absorbed);
  for (const auto& snap : traj.snapshots) {
    CHECK(snap[0] == 1);
    CHECK(snap[1] == 0);
  }
}

TEST_CASE("mass invariant and tree consistency over many events") {
  const std::size_t K = 50;
  const auto kern = RateKernel::constant(K, 1.0, 1.0);
  auto s = init_monomers(10000, K);
  ChannelRateTree tree(s, kern);
  Rng rng(4);
  // Past one rebuild period (2^20 events) to exercise the periodic recompute.
  const std::uint64_t n_events = (1ULL << 20) + 200000;
  for (std::uint64_t i = 0; i < n_events; ++i) {
    const auto ev = ssa_step(s, tree, kern, rng);
    REQUIRE(ev.has_value());
    if ((i & 0xFFFF) == 0) CHECK(s.mass() == 10000);
  }
  CHECK(s.mass() == 10000);
  CHECK(s.event_count == n_events);
  CHECK(tree.max_rebuild_drift() <= 1e-9);
}

TEST_CASE("monomer-only first-jump time matches the exact rate") {
  const std::int64_t N = 100;
  const auto kern = RateKernel::constant(16, 1.0, 1.0);
  const double expected = 1.0 / static_cast<double>(N - 1);  // N/(a1 N (N-1))
  double sum = 0.0, sumsq = 0.0;
  const int M = 10000;
  for (int r = 0; r < M; ++r) {
    auto s = init_monomers(N, 16);
    ChannelRateTree tree(s, kern);
    Rng rng = Rng::stream(909, 0, static_cast<std::uint64_t>(r));
    const auto ev = ssa_step(s, tree, kern, rng);
    REQUIRE(ev.has_value());
    sum += ev->t;
    sumsq += ev->t * ev->t;
  }
  const double mean = sum / M;
  const double se = std::sqrt((sumsq / M - mean * mean) / (M - 1));
  CHECK(std::abs(mean - expected) <= 5.0 * se);
}

TEST_CASE("bit-identical reproducibility for equal seeds") {
  const std::size_t K = 32;
  const auto kern = RateKernel::constant(K, 1.0, 1.0);
  const std::vector<double> times{0.1, 0.3, 0.7, 1.0};
  auto run_once = [&]() {
    auto s = init_monomers(5000, K);
    ChannelRateTree tree(s, kern);
    Rng rng = Rng::stream(777, 5000, 3);
    return ssa_run(s, tree, kern, 1.0, times, nullptr, rng, K);
  };
  const auto a = run_once();
  const auto b = run_once();
  REQUIRE(a.snapshots.size() == b.snapshots.size());
  for (std::size_t i = 0; i < a.snapshots.size(); ++i)
    CHECK(a.snapshots[i] == b.snapshots[i]);
  CHECK(a.events == b.events);
}

TEST_CASE("qv tracker: bookkeeping identity and compensator") {
  const std::size_t K = 40;
  const auto kern = RateKernel::constant(K, 1.0, 1.0);
  const std::int64_t N = 10000;
  auto s = init_monomers(N, K);
  const auto x0 = s.x;
  ChannelRateTree tree(s, kern);
  QvTracker qv(K);
  Rng rng(6);
  ssa_run_observed(s, tree, kern, 1.0, {}, &qv, rng,
                   [](std::size_t, double, const ClusterState&, const QvTracker*) {});

  // tau applied to the raw jump counts reproduces x(T) - x(0) exactly.
  Vec counts(channel_count(K));
  for (std::size_t i = 0; i < counts.size(); ++i)
    counts[i] = static_cast<double>(qv.counts()[i]);
  Vec delta(K);
  apply_tau(counts, delta);
  for (std::size_t k = 0; k < K; ++k)
    CHECK(delta[k] == static_cast<double>(s.x[k] - x0[k]));

  // Channels with zero integrated rate saw no events.
  const auto report = qv_report(qv);
  for (const auto& rec : report) {
    if (rec.integrated_rate == 0.0) {
      CHECK(rec.counts == 0);
      CHECK_FALSE(rec.zscore.has_value());
    }
  }

  // Channel 1 carries ~0.5 N integrated rate at T=1; the compensated count
  // fluctuates at CLT scale.
  const auto& ch1 = report[0];
  CHECK(ch1.integrated_rate > 100.0);
  CHECK(std::abs(static_cast<double>(ch1.counts) - ch1.integrated_rate) /
            ch1.integrated_rate <=
        0.05);
}

TEST_CASE("qv compensated-count variance ratio near 1") {
  const std::size_t K = 24;
  const auto kern = RateKernel::constant(K, 1.0, 1.0);
  const std::int64_t N = 5000;
  const int M = 200;
  double acc = 0.0;
  for (int r = 0; r < M; ++r) {
    auto s = init_monomers(N, K);
    ChannelRateTree tree(s, kern);
    QvTracker qv(K);
    Rng rng = Rng::stream(4242, static_cast<std::uint64_t>(N), static_cast<std::uint64_t>(r));
    ssa_run_observed(s, tree, kern, 1.0, {}, &qv, rng,
                     [](std::size_t, double, const ClusterState&, const QvTracker*) {});
    const double c = static_cast<double>(qv.counts()[0]);
    const double i = qv.integrated()[0];
    REQUIRE(i > 0.0);
    acc += (c - i) * (c - i) / i;
  }
  CHECK(acc / M >= 0.8);
  CHECK(acc / M <= 1.2);
}

TEST_CASE("left-limit sampling convention") {
  // Single dimer, fragmentation rate 2: the first event is exponential(2).
  // A sample time before the event must read the initial state.
  const auto kern = RateKernel::constant(4, 1e-9, 2.0);
  ClusterState s;
  s.x = {0, 2, 0, 0};
  s.N = 4;
  ChannelRateTree tree(s, kern);
  Rng rng(8);
  const std::vector<double> times{1e-12};
  auto traj = ssa_run(s, tree, kern, 10.0, times, nullptr, rng, 4);
  CHECK(traj.snapshots[0][1] == 2);  // still the dimer at t = 1e-12
}

TEST_CASE("ssa trajectory respects K_out and sample validation") {
  const std::size_t K = 16;
  const auto kern = RateKernel::constant(K, 1.0, 1.0);
  auto s = init_monomers(1000, K);
  ChannelRateTree tree(s, kern);
  Rng rng(9);
  const std::vector<double> times{0.5, 1.0};
  auto traj = ssa_run(s, tree, kern, 1.0, times, nullptr, rng, 4);
  CHECK(traj.snapshots[0].size() == 4);

  auto s2 = init_monomers(1000, K);
  ChannelRateTree tree2(s2, kern);
  const std::vector<double> bad{0.5, 0.25};
  CHECK_THROWS_AS(
      ssa_run(s2, tree2, kern, 1.0, bad, nullptr, rng, 4), DomainError);
}
