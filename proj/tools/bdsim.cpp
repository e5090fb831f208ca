#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "bd/config.hpp"
#include "bd/deterministic.hpp"
#include "bd/errors.hpp"
#include "bd/fluctuation.hpp"
#include "bd/harness.hpp"
#include "bd/operators.hpp"
#include "bd/report.hpp"
#include "bd/ssa.hpp"

namespace fs = std::filesystem;
using namespace bd;

namespace {

class CheckList {
 public:
  void add(bool pass, const std::string& text) {
    lines_.push_back({pass, text});
  }
  bool all_pass() const {
    for (const auto& l : lines_)
      if (!l.pass) return false;
    return true;
  }
  void print(bool quiet) const {
    for (const auto& l : lines_) {
      if (quiet && l.pass) continue;
      std::cout << (l.pass ? "[PASS] " : "[FAIL] ") << l.text << "\n";
    }
  }

 private:
  struct Line {
    bool pass;
    std::string text;
  };
  std::vector<Line> lines_;
};

std::ofstream open_out(const ExperimentConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out_dir);
  const auto path = fs::path(cfg.out_dir) / name;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file " + path.string());
  return out;
}

void write_json(const ExperimentConfig& cfg, const std::string& name,
                const nlohmann::json& j) {
  auto out = open_out(cfg, name);
  out << j.dump(2) << "\n";
}

std::vector<double> sample_grid(double t_end, std::size_t samples, bool with_zero) {
  std::vector<double> ts;
  if (with_zero) ts.push_back(0.0);
  for (std::size_t i = 1; i <= samples; ++i)
    ts.push_back(t_end * static_cast<double>(i) / static_cast<double>(samples));
  return ts;
}

IntegrateOptions ode_options(const ExperimentConfig& cfg) {
  IntegrateOptions opts;
  opts.rtol = cfg.rtol;
  opts.atol = cfg.atol;
  return opts;
}

int run_ode(const ExperimentConfig& cfg) {
  const auto kern = cfg.build_kernel();
  const auto c0 = cfg.build_c0();
  std::vector<double> times{0.0};
  if (cfg.t_end > 0.0) {
    times = sample_grid(cfg.t_end, cfg.samples, true);
  }
  const auto traj = integrate_bd(c0, kern, cfg.t_end, times, ode_options(cfg));
  auto out = open_out(cfg, "ode_trajectory.csv");
  write_trajectory_csv(traj, cfg.fingerprint(), cfg.seed, out);
  if (!cfg.quiet)
    std::cout << "ode: " << traj.times.size()
              << " rows, mass_drift = " << fmt_g17(traj.mass_drift) << "\n";
  return 0;
}

int run_equilibrium(const ExperimentConfig& cfg) {
  const auto kern = cfg.build_kernel();
  const auto eq = equilibrium_density(kern, cfg.eq_tol);

  OdeTrajectory profile;
  profile.times = {0.0};
  profile.states = {eq.profile};
  auto csv = open_out(cfg, "equilibrium_profile.csv");
  write_trajectory_csv(profile, cfg.fingerprint(), cfg.seed, csv);

  nlohmann::json j{{"c1", eq.c1},
                   {"zs", eq.zs},
                   {"mass_residual", std::abs(mass(eq.profile.v) - 1.0)},
                   {"detailed_balance_residual", eq.detailed_balance_residual(kern)},
                   {"profile_csv", "equilibrium_profile.csv"},
                   {"fingerprint", hex64(cfg.fingerprint())}};
  write_json(cfg, "equilibrium.json", j);
  if (!cfg.quiet)
    std::cout << "equilibrium: c1 = " << fmt_g17(eq.c1)
              << ", zs = " << fmt_g17(eq.zs) << "\n";
  return 0;
}

int run_simulate(const ExperimentConfig& cfg) {
  const auto kern = cfg.build_kernel();
  const auto c0 = cfg.build_c0();
  auto state = init_from_profile(c0, cfg.n);
  ChannelRateTree tree(state, kern);
  QvTracker qv(cfg.truncation);
  Rng rng = Rng::stream(cfg.seed, static_cast<std::uint64_t>(cfg.n), 0);

  const auto times = sample_grid(cfg.t_end, cfg.samples, false);
  const auto t0 = std::chrono::steady_clock::now();
  auto traj = ssa_run(state, tree, kern, cfg.t_end, times,
                      cfg.qv_enabled ? &qv : nullptr, rng, cfg.k_out);
  const auto t1 = std::chrono::steady_clock::now();

  auto out = open_out(cfg, "ssa_trajectory.csv");
  write_ssa_csv(traj, cfg.n, state.event_count, cfg.fingerprint(), cfg.seed, out);
  if (cfg.qv_enabled) {
    auto qout = open_out(cfg, "qv_report.csv");
    write_qv_report_csv(qv_report(qv), cfg.fingerprint(), cfg.seed, qout);
  }
  const double secs = std::chrono::duration<double>(t1 - t0).count();
  if (!cfg.quiet)
    std::cout << "simulate: " << state.event_count << " events in " << fmt_g17(secs)
              << " s (" << fmt_g17(static_cast<double>(state.event_count) / secs)
              << " events/s)" << (traj.absorbed ? ", absorbed" : "") << "\n";
  return 0;
}

int run_fluctuate(const ExperimentConfig& cfg) {
  const auto kern = cfg.build_kernel();
  if (cfg.fluct_mode == "stationary") {
    const auto eq = equilibrium_density(kern, cfg.eq_tol);
    const auto S = stationary_covariance(eq, kern);
    auto csv = open_out(cfg, "covariance.csv");
    write_covariance_csv(S, cfg.fingerprint(), cfg.seed, csv);
    auto j = covariance_summary(S);
    j["mode"] = "stationary";
    j["fingerprint"] = hex64(cfg.fingerprint());
    write_json(cfg, "covariance.json", j);
    if (!cfg.quiet)
      std::cout << "fluctuate stationary: trace = " << fmt_g17(S.trace()) << "\n";
    return 0;
  }

  const std::size_t K = cfg.truncation;
  const auto c0 = cfg.build_c0();
  const auto traj = integrate_bd(c0, kern, cfg.t_end, {}, ode_options(cfg));
  const auto model = covariance_ode(
      CovarianceMatrix{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K),
                                             static_cast<Eigen::Index>(K)),
                       0.0},
      traj, kern, cfg.t_end, cfg.cov_dt);

  if (cfg.fluct_mode == "ode") {
    auto csv = open_out(cfg, "covariance.csv");
    write_covariance_csv(model.sigma, cfg.fingerprint(), cfg.seed, csv);
    auto j = covariance_summary(model.sigma);
    j["mode"] = "ode";
    j["t"] = model.time;
    j["fingerprint"] = hex64(cfg.fingerprint());
    write_json(cfg, "covariance.json", j);
    if (!cfg.quiet)
      std::cout << "fluctuate ode: t = " << fmt_g17(model.time)
                << ", trace = " << fmt_g17(model.sigma.trace()) << "\n";
    return 0;
  }

  // em: ensemble endpoint covariance against the covariance ODE
  const std::size_t M = cfg.replicas == 0 ? 2000 : cfg.replicas;
  EmOptions opts;
  opts.dt = cfg.resolve_dt();
  opts.store_stride = 1 << 30;
  Eigen::MatrixXd emp = Eigen::MatrixXd::Zero(K, K);
  bool warned = false;
  for (std::size_t r = 0; r < M; ++r) {
    Rng rng = Rng::stream(cfg.seed, 0xe3, r);
    const auto path = em_integrate(Vec(K, 0.0), traj, kern, cfg.t_end, opts, rng);
    warned = warned || path.dt_warning;
    const auto& w = path.W.back();
    for (std::size_t i = 0; i < K; ++i)
      for (std::size_t j = 0; j < K; ++j) emp(i, j) += w[i] * w[j];
  }
  emp /= static_cast<double>(M);
  double max_z = 0.0;
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j) {
      const double se =
          std::sqrt((model.sigma(i, i) * model.sigma(j, j) +
                     model.sigma(i, j) * model.sigma(i, j)) /
                    static_cast<double>(M));
      if (se > 0.0)
        max_z = std::max(max_z, std::abs(emp(i, j) - model.sigma(i, j)) / se);
    }
  auto csv = open_out(cfg, "covariance.csv");
  write_covariance_csv(emp, cfg.fingerprint(), cfg.seed, csv);
  auto j = covariance_summary(emp);
  j["mode"] = "em";
  j["paths"] = M;
  j["max_abs_z_vs_ode"] = max_z;
  j["dt_warning"] = warned;
  j["fingerprint"] = hex64(cfg.fingerprint());
  write_json(cfg, "covariance.json", j);
  std::cout << "fluctuate em: max entrywise z-score vs covariance ODE = "
            << fmt_g17(max_z) << "\n";
  return 0;
}

int run_verify(const ExperimentConfig& cfg, const std::string& mode) {
  const RunContext ctx{};
  CheckList checks;
  if (mode == "lln") {
    const auto report = lln_rate(cfg.build_ensemble(), ctx);
    auto csv = open_out(cfg, "verify_lln.csv");
    write_lln_csv(report, csv);
    write_json(cfg, "verify_lln.json", to_json(report));
    checks.add(report.strictly_decreasing,
               "lln: mean sup-l1 error strictly decreasing across N");
    checks.add(report.slope >= -0.65 && report.slope <= -0.35,
               "lln: log-log slope " + fmt_g17(report.slope) +
                   " within [-0.65, -0.35]");
  } else if (mode == "clt") {
    const auto spec = cfg.build_ensemble();
    const auto report = clt_compare(spec, ctx);
    auto csv = open_out(cfg, "verify_clt.csv");
    write_clt_csv(report, csv);
    write_json(cfg, "verify_clt.json", to_json(report));
    double prev = std::numeric_limits<double>::infinity();
    bool decreasing = true;
    double last = 0.0;
    for (const auto& b : report.blocks) {
      if (b.t != spec.T) continue;
      if (!(b.frob_rel_err < prev)) decreasing = false;
      prev = b.frob_rel_err;
      last = b.frob_rel_err;
    }
    checks.add(decreasing, "clt: Frobenius relative error decreasing across N");
    checks.add(last <= 0.2, "clt: Frobenius relative error " + fmt_g17(last) +
                                " <= 0.2 at the largest N");
  } else if (mode == "qv") {
    const auto report = qv_limit_check(cfg.build_ensemble(), ctx);
    auto csv = open_out(cfg, "verify_qv.csv");
    write_qv_csv(report, csv);
    write_json(cfg, "verify_qv.json", to_json(report));
    bool rel_ok = true, var_ok = true;
    std::size_t active = 0;
    for (const auto& row : report.rows) {
      if (!row.active) continue;
      ++active;
      rel_ok = rel_ok && row.rel_err <= 0.05;
      var_ok = var_ok && row.variance_ratio >= 0.8 && row.variance_ratio <= 1.2;
    }
    checks.add(active > 0, "qv: " + std::to_string(active) + " active channels");
    checks.add(rel_ok,
               "qv: active-channel integrated rates within 5% of the mean-field "
               "integrals");
    checks.add(var_ok, "qv: compensated-count variance ratios within [0.8, 1.2]");
  } else if (mode == "moments") {
    const auto report = moment_diagnostics(cfg.build_ensemble(), ctx);
    auto csv = open_out(cfg, "verify_moments.csv");
    write_moments_csv(report, csv);
    write_json(cfg, "verify_moments.json", to_json(report));
    checks.add(std::isfinite(report.zeta_ratio) && report.zeta_ratio <= 1.5,
               "moments: zeta proxy max/min ratio " + fmt_g17(report.zeta_ratio) +
                   " <= 1.5 across N");
    checks.add(std::isfinite(report.kappa_ratio) && report.kappa_ratio <= 2.0,
               "moments: kappa proxy max/min ratio " + fmt_g17(report.kappa_ratio) +
                   " <= 2 across N");
  }
  checks.print(cfg.quiet);
  return checks.all_pass() ? 0 : 3;
}

int run_bench(const ExperimentConfig& cfg) {
  const auto kern = cfg.build_kernel();
  auto state = init_monomers(cfg.n, cfg.truncation);
  ChannelRateTree tree(state, kern);
  Rng rng = Rng::stream(cfg.seed, static_cast<std::uint64_t>(cfg.n), 0);
  const std::uint64_t budget = 10'000'000;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::uint64_t i = 0; i < budget; ++i)
    if (!ssa_step(state, tree, kern, rng)) break;
  const auto t1 = std::chrono::steady_clock::now();
  const double secs = std::chrono::duration<double>(t1 - t0).count();
  std::cout << "bench: " << state.event_count << " events in " << fmt_g17(secs)
            << " s (" << fmt_g17(static_cast<double>(state.event_count) / secs)
            << " events/s), final mass " << state.mass() << "\n";
  return 0;
}

struct Overrides {
  std::uint64_t seed = 0;
  std::string out;
  std::int64_t n = 0;
  std::size_t replicas = 0;
  double t_end = 0.0;
  std::size_t truncation = 0;
  double alpha = 0.0;
  std::string config_path;
  bool quiet = false;
};

void add_common(CLI::App* sub, Overrides& ov) {
  sub->add_option("--config", ov.config_path, "key = value config file")
      ->check(CLI::ExistingFile);
  sub->add_option("--seed", ov.seed, "master RNG seed");
  sub->add_option("--out", ov.out, "output directory");
  sub->add_option("--n", ov.n, "total mass N");
  sub->add_option("--replicas", ov.replicas, "ensemble replicas");
  sub->add_option("--t-end", ov.t_end, "time horizon");
  sub->add_option("--truncation", ov.truncation, "maximum cluster size K");
  sub->add_option("--weights-alpha", ov.alpha, "weight exponent alpha");
  sub->add_flag("--quiet", ov.quiet, "suppress informational output");
}

void apply_overrides(ExperimentConfig& cfg, CLI::App* sub, const Overrides& ov,
                     const std::string& section) {
  if (!ov.config_path.empty()) load_config_file(cfg, ov.config_path, section);
  if (sub->count("--seed")) cfg.seed = ov.seed;
  if (sub->count("--out")) cfg.out_dir = ov.out;
  if (sub->count("--n")) cfg.n = ov.n;
  if (sub->count("--replicas")) cfg.replicas = ov.replicas;
  if (sub->count("--t-end")) cfg.t_end = ov.t_end;
  if (sub->count("--truncation")) cfg.truncation = ov.truncation;
  if (sub->count("--weights-alpha")) {
    cfg.alpha = ov.alpha;
    if (cfg.beta <= cfg.alpha) cfg.beta = cfg.alpha + 1.0;
  }
  if (ov.quiet) cfg.quiet = true;
  cfg.validate();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bdsim: stochastic Becker-Doring simulation and fluctuation analysis"};
  app.require_subcommand(1);

  Overrides ov;
  auto* ode = app.add_subcommand("ode", "integrate the mean-field cluster ODE");
  auto* equilibrium =
      app.add_subcommand("equilibrium", "solve for the fixed-point profile");
  auto* simulate = app.add_subcommand("simulate", "run one exact SSA trajectory");
  auto* fluctuate =
      app.add_subcommand("fluctuate", "fluctuation SDE covariance tools");
  auto* verify = app.add_subcommand("verify", "statistical verification presets");
  auto* bench = app.add_subcommand("bench", "SSA event-throughput benchmark");
  for (auto* sub : {ode, equilibrium, simulate, fluctuate, verify, bench})
    add_common(sub, ov);

  std::string verify_mode;
  verify->add_option("mode", verify_mode, "lln | clt | qv | moments")
      ->required()
      ->check(CLI::IsMember({"lln", "clt", "qv", "moments"}));
  std::string fluct_mode;
  fluctuate->add_option("--mode", fluct_mode, "stationary | ode | em")
      ->check(CLI::IsMember({"stationary", "ode", "em"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    ExperimentConfig cfg;
    if (ode->parsed()) {
      cfg.t_end = 10.0;
      apply_overrides(cfg, ode, ov, "ode");
      return run_ode(cfg);
    }
    if (equilibrium->parsed()) {
      apply_overrides(cfg, equilibrium, ov, "equilibrium");
      return run_equilibrium(cfg);
    }
    if (simulate->parsed()) {
      apply_overrides(cfg, simulate, ov, "simulate");
      return run_simulate(cfg);
    }
    if (fluctuate->parsed()) {
      if (fluctuate->count("--mode")) cfg.fluct_mode = fluct_mode;
      apply_overrides(cfg, fluctuate, ov, "fluctuate");
      return run_fluctuate(cfg);
    }
    if (verify->parsed()) {
      if (verify_mode == "clt" || verify_mode == "qv") {
        cfg.replicas = 500;
      } else if (verify_mode == "moments") {
        cfg.replicas = 50;
        cfg.alpha = 1.5;
        cfg.beta = 2.0;
      } else {
        cfg.replicas = 100;
      }
      apply_overrides(cfg, verify, ov, "verify");
      return run_verify(cfg, verify_mode);
    }
    if (bench->parsed()) {
      cfg.truncation = 1000;
      cfg.n = 100000;
      apply_overrides(cfg, bench, ov, "bench");
      return run_bench(cfg);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
