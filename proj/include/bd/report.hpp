#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "bd/deterministic.hpp"
#include "bd/fluctuation.hpp"
#include "bd/harness.hpp"
#include "bd/ssa.hpp"

namespace bd {

// Deterministic shortest-roundtrip-free formatting: %.17g reproduces bits.
std::string fmt_g17(double v);
std::string hex64(std::uint64_t v);

// "# fingerprint=... seed=..." metadata line embedded in every output file.
std::string header_comment(std::uint64_t fingerprint, std::uint64_t seed);

nlohmann::json to_json(const LlnReport& r);
nlohmann::json to_json(const CltReport& r);
nlohmann::json to_json(const QvLimitReport& r);
nlohmann::json to_json(const MomentReport& r);

void write_lln_csv(const LlnReport& r, std::ostream& os);
void write_clt_csv(const CltReport& r, std::ostream& os);
void write_qv_csv(const QvLimitReport& r, std::ostream& os);
void write_moments_csv(const MomentReport& r, std::ostream& os);

// t, c_1..c_K, mass per row.
void write_trajectory_csv(const OdeTrajectory& traj, std::uint64_t fingerprint,
                          std::uint64_t seed, std::ostream& os);

// t, x_1..x_k_out, mass, events per row.
void write_ssa_csv(const SsaTrajectory& traj, std::int64_t N, std::uint64_t events,
                   std::uint64_t fingerprint, std::uint64_t seed, std::ostream& os);

void write_qv_report_csv(const std::vector<QvChannelRecord>& records,
                         std::uint64_t fingerprint, std::uint64_t seed,
                         std::ostream& os);

// row, col, value triplets.
void write_covariance_csv(const Eigen::MatrixXd& S, std::uint64_t fingerprint,
                          std::uint64_t seed, std::ostream& os);

// trace, min eigenvalue, top-left block.
nlohmann::json covariance_summary(const Eigen::MatrixXd& S, std::size_t block = 4);

}  // namespace bd
