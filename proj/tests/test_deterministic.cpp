#include <doctest.h>

#include <cmath>

#include "bd/deterministic.hpp"
#include "bd/errors.hpp"
#include "bd/operators.hpp"
#include "bd/rng.hpp"
#include "test_util.hpp"

using namespace bd;
using bdtest::neumaier_sum;

namespace {

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> ts(n);
  for (std::size_t i = 0; i < n; ++i)
    ts[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return ts;
}

Concentration monomer_only(std::size_t K) {
  Vec v(K, 0.0);
  v[0] = 1.0;
  return Concentration{std::move(v)};
}

double l1_distance(const Vec& a, const Vec& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return d;
}

// Independent evaluation of the truncated mass series at z.
long double mass_series_oracle(const RateKernel& kern, long double z) {
  long double sum = 0.0L, R = 1.0L;
  for (std::size_t k = 1; k <= kern.truncation(); ++k) {
    if (k >= 2) R *= static_cast<long double>(kern.a(k - 1)) / kern.b(k);
    sum += static_cast<long double>(k) * R * std::pow(z, static_cast<long double>(k));
  }
  return sum;
}

}  // namespace

TEST_CASE("bd_rhs values and mass annihilation") {
  const std::size_t K = 100;
  const auto kern = RateKernel::constant(K, 1.0, 1.0);

  const auto eq = equilibrium_density(kern);
  const auto r_eq = bd_rhs(eq.profile, kern);
  for (double v : r_eq) CHECK(std::abs(v) <= 1e-12);

  const auto r_mono = bd_rhs(monomer_only(K), kern);
  CHECK(r_mono[0] == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(r_mono[1] == doctest::Approx(1.0).epsilon(1e-14));
  for (std::size_t i = 2; i < K; ++i) CHECK(r_mono[i] == 0.0);

  Rng rng(5);
  const auto c = bdtest::random_concentration(rng, K);
  auto r = bd_rhs(Concentration{c}, kern);
  for (std::size_t i = 0; i < K; ++i) r[i] *= static_cast<double>(i + 1);
  CHECK(std::abs(neumaier_sum(r)) <= 1e-13);
}

TEST_CASE("integrate_bd: fixed point stays fixed") {
  const std::size_t K = 100;
  const auto kern = RateKernel::constant(K, 1.0, 1.0);
  const auto eq = equilibrium_density(kern);
  const auto traj = integrate_bd(eq.profile, kern, 10.0, linspace(0.0, 10.0, 11));
  for (const auto& state : traj.states)
    CHECK(l1_distance(state.v, eq.profile.v) <= 1e-8);
}

TEST_CASE("integrate_bd: mass conservation and positivity, monomer start") {
  const std::size_t K = 100;
  const auto kern = RateKernel::constant(K, 1.0, 1.0);
  const auto traj =
      integrate_bd(monomer_only(K), kern, 10.0, linspace(0.0, 10.0, 33));
  CHECK(traj.mass_drift <= 1e-8);
  for (const auto& s : traj.states)
    for (double v : s.v) CHECK(v >= -1e-12);

  // dense interpolation conserves mass between nodes too
  Vec buf(K);
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    traj.eval(10.0 * rng.uniform01(), buf);
    CHECK(std::abs(mass(buf) - 1.0) <= 1e-8);
  }
}

TEST_CASE("integrate_bd: two-species closed form") {
  const auto kern = RateKernel::constant(2, 1.0, 1.0);
  const auto traj = integrate_bd(monomer_only(2), kern, 50.0, {{50.0}});
  // dc1/dt = -2(c1^2 - c2) with c2 = (1 - c1)/2 settles at c1 = 1/2
  CHECK(traj.states[0][0] == doctest::Approx(0.5).epsilon(1e-7));
}

TEST_CASE("integrate_bd: relaxation to the fixed point is monotone and close") {
  const std::size_t K = 100;
  const auto kern = RateKernel::constant(K, 1.0, 1.0);
  const auto eq = equilibrium_density(kern);
  const auto times = linspace(5.0, 200.0, 40);
  const auto traj = integrate_bd(monomer_only(K), kern, 200.0, times);
  std::vector<double> dist;
  for (const auto& s : traj.states) dist.push_back(l1_distance(s.v, eq.profile.v));
  // Monotone until the distance reaches the integrator accuracy floor.
  for (std::size_t i = 1; i < dist.size() && dist[i - 1] > 1e-6; ++i)
    CHECK(dist[i] <= dist[i - 1] * (1.0 + 1e-9) + 1e-12);
  CHECK(dist.back() < 1e-3);
}

TEST_CASE("integrate_bd: halving rtol improves accuracy") {
  const std::size_t K = 40;
  const auto kern = RateKernel::constant(K, 1.0, 1.0);
  IntegrateOptions ref_opts;
  ref_opts.rtol = 1e-7;
  ref_opts.atol = 1e-14;
  const auto ref = integrate_bd(monomer_only(K), kern, 2.0, {{2.0}}, ref_opts);

  auto err_at = [&](double rtol) {
    IntegrateOptions opts;
    opts.rtol = rtol;
    opts.atol = 1e-14;
    const auto traj = integrate_bd(monomer_only(K), kern, 2.0, {{2.0}}, opts);
    return l1_distance(traj.states[0].v, ref.states[0].v);
  };
  const double e1 = err_at(1e-5);
  const double e2 = err_at(5e-6);
  CHECK(e1 / e2 >= 1.5);
}

TEST_CASE("integrate_bd edge cases and errors") {
  const auto kern = RateKernel::constant(8, 1.0, 1.0);
  const auto traj = integrate_bd(monomer_only(8), kern, 0.0, {{0.0}});
  CHECK(traj.states.size() == 1);
  CHECK(traj.states[0][0] == 1.0);

  IntegrateOptions tiny;
  tiny.max_steps = 3;
  CHECK_THROWS_AS(integrate_bd(monomer_only(8), kern, 100.0, {{100.0}}, tiny),
                  StiffnessError);

  CHECK_THROWS_AS(integrate_bd(monomer_only(4), kern, 1.0, {{1.0}}),
                  DimensionError);
  CHECK_THROWS_AS(integrate_bd(monomer_only(8), kern, 1.0, {{2.0}}), DomainError);
}

TEST_CASE("compute_R telescoping products") {
  const std::size_t K = 12;
  auto lr = compute_R(RateKernel::constant(K, 1.0, 1.0));
  for (double v : lr) CHECK(v == doctest::Approx(0.0).epsilon(1e-14));

  lr = compute_R(RateKernel::constant(K, 2.0, 1.0));
  for (std::size_t k = 1; k <= K; ++k)
    CHECK(lr[k - 1] ==
          doctest::Approx((static_cast<double>(k) - 1.0) * std::log(2.0))
              .epsilon(1e-13));

  lr = compute_R(RateKernel::constant(K, 1.0, 2.0));
  for (std::size_t k = 1; k <= K; ++k)
    CHECK(lr[k - 1] ==
          doctest::Approx(-(static_cast<double>(k) - 1.0) * std::log(2.0))
              .epsilon(1e-13));
}

TEST_CASE("equilibrium_density closed forms") {
  // a = b = 1: z/(1-z)^2 = 1, root (3 - sqrt 5)/2.
  {
    const auto kern = RateKernel::constant(1000, 1.0, 1.0);
    const auto eq = equilibrium_density(kern, 1e-12);
    CHECK(eq.c1 == doctest::Approx((3.0 - std::sqrt(5.0)) / 2.0).epsilon(1e-10));
    CHECK(std::abs(mass(eq.profile.v) - 1.0) <= 1e-10);
    CHECK(eq.detailed_balance_residual(kern) <= 1e-12);
    CHECK(std::abs(static_cast<double>(mass_series_oracle(kern, eq.c1)) - 1.0) <=
          1e-10);
    CHECK(eq.zs == doctest::Approx(1.0).epsilon(1e-9));
  }
  // a = 1, b = 2: R_k = 2^{1-k}, mass equation 2u/(1-u)^2 = 1 at u = z/2,
  // so z = 4 - 2 sqrt 3.
  {
    const auto kern = RateKernel::constant(400, 1.0, 2.0);
    const auto eq = equilibrium_density(kern, 1e-12);
    CHECK(eq.c1 == doctest::Approx(4.0 - 2.0 * std::sqrt(3.0)).epsilon(1e-10));
    CHECK(eq.detailed_balance_residual(kern) <= 1e-12);
    CHECK(std::abs(static_cast<double>(mass_series_oracle(kern, eq.c1)) - 1.0) <=
          1e-10);
  }
  // a = 2, b = 1: R_k = 2^{k-1}, (1/2) v/(1-v)^2 = 1 at v = 2z gives z = 1/4.
  {
    const auto kern = RateKernel::constant(400, 2.0, 1.0);
    const auto eq = equilibrium_density(kern, 1e-12);
    CHECK(eq.c1 == doctest::Approx(0.25).epsilon(1e-10));
    CHECK(std::abs(static_cast<double>(mass_series_oracle(kern, eq.c1)) - 1.0) <=
          1e-10);
  }
}

TEST_CASE("equilibrium_density rejects kernels without a reachable root") {
  // Extreme fragmentation pushes the root above the 1 - 1e-9 bracket cap.
  const auto kern = RateKernel::constant(50, 1e-6, 1e6);
  CHECK_THROWS_AS(equilibrium_density(kern), NoFixedPointError);
}

TEST_CASE("equilibrium profile tail flushes to zero") {
  const auto kern = RateKernel::constant(5000, 1.0, 1.0);
  const auto eq = equilibrium_density(kern);
  // c_k ~ z^k underflows far before k = 5000 and must be exactly zero there.
  CHECK(eq.profile[4999] == 0.0);
  bool seen_zero = false;
  for (std::size_t k = 1; k <= 5000; ++k) {
    const double v = eq.profile[k - 1];
    if (v == 0.0) seen_zero = true;
    CHECK((v == 0.0 || v >= 1e-300));
    if (seen_zero) CHECK(v == 0.0);
  }
}
