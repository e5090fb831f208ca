#include "bd/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bd/errors.hpp"

namespace bd {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_double(const std::string& v, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected a number, got '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& v, const std::string& where) {
  try {
    std::size_t pos = 0;
    const unsigned long long u = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return u;
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected an unsigned integer, got '" + v + "'");
  }
}

bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(where + ": expected a boolean, got '" + v + "'");
}

std::vector<double> parse_double_list(const std::string& v, const std::string& where) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError(where + ": empty list element");
    out.push_back(parse_double(item, where));
  }
  if (out.empty()) throw ConfigError(where + ": empty list");
  return out;
}

std::vector<std::int64_t> parse_int_list(const std::string& v, const std::string& where) {
  std::vector<std::int64_t> out;
  for (double d : parse_double_list(v, where)) {
    if (d < 1 || d != std::floor(d))
      throw ConfigError(where + ": expected positive integers");
    out.push_back(static_cast<std::int64_t>(d));
  }
  return out;
}

std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void apply_config_key(ExperimentConfig& cfg, const std::string& key,
                      const std::string& value, const std::string& where) {
  if (key == "kernel") {
    if (value == "constant")
      cfg.kernel.type = KernelSpec::Type::Constant;
    else if (value == "powerlaw")
      cfg.kernel.type = KernelSpec::Type::PowerLaw;
    else if (value == "list")
      cfg.kernel.type = KernelSpec::Type::Lists;
    else
      throw ConfigError(where + ": kernel must be constant|powerlaw|list");
  } else if (key == "a") {
    cfg.kernel.a = parse_double(value, where);
  } else if (key == "b") {
    cfg.kernel.b = parse_double(value, where);
  } else if (key == "a_exp") {
    cfg.kernel.a_exp = parse_double(value, where);
  } else if (key == "b_exp") {
    cfg.kernel.b_exp = parse_double(value, where);
  } else if (key == "a_list") {
    cfg.kernel.a_list = parse_double_list(value, where);
  } else if (key == "b_list") {
    cfg.kernel.b_list = parse_double_list(value, where);
  } else if (key == "alpha") {
    cfg.alpha = parse_double(value, where);
  } else if (key == "beta") {
    cfg.beta = parse_double(value, where);
  } else if (key == "truncation") {
    cfg.truncation = parse_u64(value, where);
  } else if (key == "k_stat") {
    cfg.k_stat = parse_u64(value, where);
  } else if (key == "k_out") {
    cfg.k_out = parse_u64(value, where);
  } else if (key == "n") {
    cfg.n = static_cast<std::int64_t>(parse_u64(value, where));
  } else if (key == "n_list") {
    cfg.n_list = parse_int_list(value, where);
  } else if (key == "replicas") {
    cfg.replicas = parse_u64(value, where);
  } else if (key == "t_end") {
    cfg.t_end = parse_double(value, where);
  } else if (key == "samples") {
    cfg.samples = parse_u64(value, where);
  } else if (key == "dt") {
    cfg.dt = parse_double(value, where);
  } else if (key == "cov_dt") {
    cfg.cov_dt = parse_double(value, where);
  } else if (key == "rtol") {
    cfg.rtol = parse_double(value, where);
  } else if (key == "atol") {
    cfg.atol = parse_double(value, where);
  } else if (key == "eq_tol") {
    cfg.eq_tol = parse_double(value, where);
  } else if (key == "seed") {
    cfg.seed = parse_u64(value, where);
  } else if (key == "out") {
    cfg.out_dir = value;
  } else if (key == "init") {
    if (value != "monomer" && value != "equilibrium")
      throw ConfigError(where + ": init must be monomer|equilibrium");
    cfg.init = value;
  } else if (key == "mode") {
    if (value != "stationary" && value != "ode" && value != "em")
      throw ConfigError(where + ": mode must be stationary|ode|em");
    cfg.fluct_mode = value;
  } else if (key == "qv") {
    cfg.qv_enabled = parse_bool(value, where);
  } else if (key == "quiet") {
    cfg.quiet = parse_bool(value, where);
  } else {
    throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

void load_config_file(ExperimentConfig& cfg, const std::string& path,
                      const std::string& section) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::string line;
  std::string active;  // empty: global scope
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = path + ":" + std::to_string(lineno);
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(where + ": unterminated section header");
      active = trim(s.substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!active.empty() && active != section) continue;
    apply_config_key(cfg, key, value, where);
  }
}

void ExperimentConfig::validate() const {
  if (truncation < 2) throw ConfigError("truncation must be >= 2");
  if (!(alpha > 1.0)) throw ConfigError("alpha must exceed 1");
  if (!(beta > alpha)) throw ConfigError("beta must exceed alpha");
  if (k_stat < 1) throw ConfigError("k_stat must be >= 1");
  if (n < 1) throw ConfigError("n must be >= 1");
  for (auto v : n_list)
    if (v < 1) throw ConfigError("n_list entries must be >= 1");
  if (!(t_end >= 0.0)) throw ConfigError("t_end must be nonnegative");
  if (samples < 1) throw ConfigError("samples must be >= 1");
  if (!(rtol > 0.0) || !(atol > 0.0)) throw ConfigError("tolerances must be positive");
  if (!(eq_tol > 0.0)) throw ConfigError("eq_tol must be positive");
  if (kernel.type == KernelSpec::Type::Constant ||
      kernel.type == KernelSpec::Type::PowerLaw) {
    if (!(kernel.a > 0.0) || !(kernel.b > 0.0))
      throw ConfigError("rates must be positive");
  }
  build_kernel();  // surfaces list-length and positivity problems
}

RateKernel ExperimentConfig::build_kernel() const {
  try {
    switch (kernel.type) {
      case KernelSpec::Type::Constant:
        return RateKernel::constant(truncation, kernel.a, kernel.b);
      case KernelSpec::Type::PowerLaw:
        return RateKernel::power_law(truncation, kernel.a, kernel.a_exp, kernel.b,
                                     kernel.b_exp);
      case KernelSpec::Type::Lists:
        return RateKernel::from_lists(truncation, kernel.a_list, kernel.b_list);
    }
  } catch (const DomainError& e) {
    throw ConfigError(std::string("kernel: ") + e.what());
  } catch (const DimensionError& e) {
    throw ConfigError(std::string("kernel: ") + e.what());
  }
  throw ConfigError("kernel: unknown type");
}

Concentration ExperimentConfig::build_c0() const {
  if (init == "monomer") {
    Vec v(truncation, 0.0);
    v[0] = 1.0;
    return Concentration{std::move(v)};
  }
  const auto eq = equilibrium_density(build_kernel(), eq_tol);
  return eq.profile;
}

double ExperimentConfig::resolve_dt() const {
  if (dt > 0.0) return dt;
  return 1e-3 / build_kernel().lambda_max();
}

EnsembleSpec ExperimentConfig::build_ensemble() const {
  IntegrateOptions ode_opts;
  ode_opts.rtol = rtol;
  ode_opts.atol = atol;
  EnsembleSpec spec{.kernel = build_kernel(),
                    .weights = build_weights(),
                    .companion = build_companion(),
                    .N_list = n_list,
                    .M = replicas == 0 ? 100 : replicas,
                    .T = t_end,
                    .sample_count = samples,
                    .K_stat = std::min(k_stat, truncation),
                    .master_seed = seed,
                    .c0 = build_c0(),
                    .ode_opts = ode_opts,
                    .cov_dt = cov_dt,
                    .report_times = {t_end}};
  return spec;
}

std::uint64_t ExperimentConfig::fingerprint() const {
  std::string s;
  s += "kernel=" + std::to_string(static_cast<int>(kernel.type));
  s += ";a=" + fmt_g17(kernel.a) + ";b=" + fmt_g17(kernel.b);
  s += ";a_exp=" + fmt_g17(kernel.a_exp) + ";b_exp=" + fmt_g17(kernel.b_exp);
  s += ";a_list=";
  for (double v : kernel.a_list) s += fmt_g17(v) + ",";
  s += ";b_list=";
  for (double v : kernel.b_list) s += fmt_g17(v) + ",";
  s += ";alpha=" + fmt_g17(alpha) + ";beta=" + fmt_g17(beta);
  s += ";K=" + std::to_string(truncation) + ";k_stat=" + std::to_string(k_stat);
  s += ";k_out=" + std::to_string(k_out);
  s += ";n=" + std::to_string(n) + ";n_list=";
  for (auto v : n_list) s += std::to_string(v) + ",";
  s += ";replicas=" + std::to_string(replicas);
  s += ";t_end=" + fmt_g17(t_end) + ";samples=" + std::to_string(samples);
  s += ";dt=" + fmt_g17(dt) + ";cov_dt=" + fmt_g17(cov_dt);
  s += ";rtol=" + fmt_g17(rtol) + ";atol=" + fmt_g17(atol);
  s += ";eq_tol=" + fmt_g17(eq_tol);
  s += ";init=" + init + ";mode=" + fluct_mode;
  s += ";qv=" + std::string(qv_enabled ? "1" : "0");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace bd
