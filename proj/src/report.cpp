#include "bd/report.hpp"

#include <Eigen/Eigenvalues>
#include <cstdio>
#include <ostream>

namespace bd {

std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string header_comment(std::uint64_t fingerprint, std::uint64_t seed) {
  return "# fingerprint=" + hex64(fingerprint) + " seed=" + std::to_string(seed);
}

nlohmann::json to_json(const LlnReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"N", row.N},
                    {"mean_sup_l1", row.mean_sup_l1},
                    {"std_err", row.std_err}});
  return {{"report", "lln"},
          {"rows", rows},
          {"slope", r.slope},
          {"strictly_decreasing", r.strictly_decreasing},
          {"seed", r.master_seed},
          {"fingerprint", hex64(r.config_fingerprint)},
          {"warning", r.warning}};
}

nlohmann::json to_json(const CltReport& r) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : r.blocks)
    blocks.push_back({{"N", b.N},
                      {"t", b.t},
                      {"k_stat", b.k_stat},
                      {"empirical", b.empirical},
                      {"model", b.model},
                      {"zscore", b.zscore},
                      {"frob_rel_err", b.frob_rel_err},
                      {"max_abs_z", b.max_abs_z},
                      {"mean_w2", b.mean_w2}});
  return {{"report", "clt"},
          {"blocks", blocks},
          {"seed", r.master_seed},
          {"fingerprint", hex64(r.config_fingerprint)},
          {"note", r.note}};
}

nlohmann::json to_json(const QvLimitReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"channel", row.channel},
                    {"mean_integrated_over_N", row.mean_integrated_over_N},
                    {"ode_integral", row.ode_integral},
                    {"rel_err", row.rel_err},
                    {"variance_ratio", row.variance_ratio},
                    {"total_counts", row.total_counts},
                    {"active", row.active}});
  return {{"report", "qv"},
          {"N", r.N},
          {"M", r.M},
          {"rows", rows},
          {"excluded_channels", r.excluded_channels},
          {"seed", r.master_seed},
          {"fingerprint", hex64(r.config_fingerprint)}};
}

nlohmann::json to_json(const MomentReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back(
        {{"N", row.N}, {"zeta_sup", row.zeta_sup}, {"kappa_sup", row.kappa_sup}});
  return {{"report", "moments"},
          {"rows", rows},
          {"zeta_ratio", r.zeta_ratio},
          {"kappa_ratio", r.kappa_ratio},
          {"seed", r.master_seed},
          {"fingerprint", hex64(r.config_fingerprint)}};
}

void write_lln_csv(const LlnReport& r, std::ostream& os) {
  os << header_comment(r.config_fingerprint, r.master_seed) << "\n";
  os << "N,mean_sup_l1,std_err\n";
  for (const auto& row : r.rows)
    os << row.N << ',' << fmt_g17(row.mean_sup_l1) << ',' << fmt_g17(row.std_err)
       << "\n";
}

void write_clt_csv(const CltReport& r, std::ostream& os) {
  os << header_comment(r.config_fingerprint, r.master_seed) << "\n";
  os << "N,t,frob_rel_err,max_abs_z,mean_w2\n";
  for (const auto& b : r.blocks)
    os << b.N << ',' << fmt_g17(b.t) << ',' << fmt_g17(b.frob_rel_err) << ','
       << fmt_g17(b.max_abs_z) << ',' << fmt_g17(b.mean_w2) << "\n";
}

void write_qv_csv(const QvLimitReport& r, std::ostream& os) {
  os << header_comment(r.config_fingerprint, r.master_seed) << "\n";
  os << "channel,mean_integrated_over_N,ode_integral,rel_err,variance_ratio,"
        "total_counts,active\n";
  for (const auto& row : r.rows)
    os << row.channel << ',' << fmt_g17(row.mean_integrated_over_N) << ','
       << fmt_g17(row.ode_integral) << ',' << fmt_g17(row.rel_err) << ','
       << fmt_g17(row.variance_ratio) << ',' << row.total_counts << ','
       << (row.active ? 1 : 0) << "\n";
}

void write_moments_csv(const MomentReport& r, std::ostream& os) {
  os << header_comment(r.config_fingerprint, r.master_seed) << "\n";
  os << "N,zeta_sup,kappa_sup\n";
  for (const auto& row : r.rows)
    os << row.N << ',' << fmt_g17(row.zeta_sup) << ',' << fmt_g17(row.kappa_sup)
       << "\n";
}

void write_trajectory_csv(const OdeTrajectory& traj, std::uint64_t fingerprint,
                          std::uint64_t seed, std::ostream& os) {
  os << header_comment(fingerprint, seed) << "\n";
  const std::size_t K = traj.states.empty() ? 0 : traj.states.front().size();
  os << "t";
  for (std::size_t k = 1; k <= K; ++k) os << ",c_" << k;
  os << ",mass\n";
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    os << fmt_g17(traj.times[i]);
    for (double v : traj.states[i].v) os << ',' << fmt_g17(v);
    os << ',' << fmt_g17(mass(traj.states[i].v)) << "\n";
  }
}

void write_ssa_csv(const SsaTrajectory& traj, std::int64_t N, std::uint64_t events,
                   std::uint64_t fingerprint, std::uint64_t seed, std::ostream& os) {
  os << header_comment(fingerprint, seed) << "\n";
  const std::size_t kout = traj.snapshots.empty() ? 0 : traj.snapshots.front().size();
  os << "t";
  for (std::size_t k = 1; k <= kout; ++k) os << ",x_" << k;
  os << ",mass,events\n";
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    os << fmt_g17(traj.times[i]);
    for (auto v : traj.snapshots[i]) os << ',' << v;
    os << ',' << N << ',' << events << "\n";
  }
}

void write_qv_report_csv(const std::vector<QvChannelRecord>& records,
                         std::uint64_t fingerprint, std::uint64_t seed,
                         std::ostream& os) {
  os << header_comment(fingerprint, seed) << "\n";
  os << "channel,counts,integrated_rate,zscore\n";
  for (const auto& rec : records) {
    os << rec.channel << ',' << rec.counts << ',' << fmt_g17(rec.integrated_rate)
       << ',';
    if (rec.zscore)
      os << fmt_g17(*rec.zscore);
    else
      os << "null";
    os << "\n";
  }
}

void write_covariance_csv(const Eigen::MatrixXd& S, std::uint64_t fingerprint,
                          std::uint64_t seed, std::ostream& os) {
  os << header_comment(fingerprint, seed) << "\n";
  os << "row,col,value\n";
  for (Eigen::Index i = 0; i < S.rows(); ++i)
    for (Eigen::Index j = 0; j < S.cols(); ++j)
      os << (i + 1) << ',' << (j + 1) << ',' << fmt_g17(S(i, j)) << "\n";
}

nlohmann::json covariance_summary(const Eigen::MatrixXd& S, std::size_t block) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      (0.5 * (S + S.transpose())).eval());
  const auto b = std::min<std::size_t>(block, static_cast<std::size_t>(S.rows()));
  nlohmann::json top = nlohmann::json::array();
  for (std::size_t i = 0; i < b; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < b; ++j)
      row.push_back(S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    top.push_back(row);
  }
  return {{"dim", S.rows()},
          {"trace", S.trace()},
          {"min_eigenvalue", es.eigenvalues().minCoeff()},
          {"top_left_block", top}};
}

}  // namespace bd
