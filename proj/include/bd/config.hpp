#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bd/deterministic.hpp"
#include "bd/harness.hpp"
#include "bd/kernel.hpp"
#include "bd/state.hpp"
#include "bd/weights.hpp"

namespace bd {

struct KernelSpec {
  enum class Type { Constant, PowerLaw, Lists };
  Type type = Type::Constant;
  double a = 1.0, b = 1.0;          // constant values / power-law prefactors
  double a_exp = 0.0, b_exp = 0.0;  // power-law exponents
  std::vector<double> a_list, b_list;
};

// Flat key-value experiment description; a config file supplies global keys
// plus [subcommand] sections and command-line flags win over the file.
struct ExperimentConfig {
  KernelSpec kernel;
  double alpha = 2.0;  // weight exponent, w_k = k^alpha
  double beta = 3.0;   // companion exponent
  std::size_t truncation = 100;
  std::size_t k_stat = 10;
  std::size_t k_out = 16;
  std::vector<std::int64_t> n_list = {1000, 10000, 100000};
  std::int64_t n = 10000;
  std::size_t replicas = 0;  // 0: resolved per subcommand
  double t_end = 1.0;
  std::size_t samples = 32;
  double dt = 0.0;  // 0: resolved to 1e-3 / Lambda
  double cov_dt = 1e-3;
  double rtol = 1e-8;
  double atol = 1e-12;
  double eq_tol = 1e-10;
  std::uint64_t seed = 42;
  std::string out_dir = "out";
  std::string init = "monomer";           // monomer | equilibrium
  std::string fluct_mode = "stationary";  // stationary | ode | em
  bool qv_enabled = true;
  bool quiet = false;

  void validate() const;
  RateKernel build_kernel() const;
  WeightSequence build_weights() const { return WeightSequence::power_law(alpha); }
  WeightSequence build_companion() const { return WeightSequence::power_law(beta); }
  Concentration build_c0() const;
  EnsembleSpec build_ensemble() const;
  double resolve_dt() const;
  std::uint64_t fingerprint() const;
};

// Parses the file and applies global keys plus the [section] overlay.
// Errors carry file/line context.
void load_config_file(ExperimentConfig& cfg, const std::string& path,
                      const std::string& section);

// Applies one key=value pair; `where` prefixes error messages.
void apply_config_key(ExperimentConfig& cfg, const std::string& key,
                      const std::string& value, const std::string& where);

}  // namespace bd
