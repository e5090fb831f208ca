#include "bd/operators.hpp"

#include <cmath>
#include <string>

#include "bd/errors.hpp"

namespace bd {

namespace {

void check_species(std::span<const double> v, std::size_t K, const char* what) {
  if (v.size() != K)
    throw DimensionError(std::string(what) + ": species vector has length " +
                         std::to_string(v.size()) + ", expected " + std::to_string(K));
}

void check_flux(std::span<const double> z, std::size_t K, const char* what) {
  if (z.size() != channel_count(K))
    throw DimensionError(std::string(what) + ": flux vector has length " +
                         std::to_string(z.size()) + ", expected " +
                         std::to_string(channel_count(K)));
}

}  // namespace

void eval_s(std::span<const double> c, const RateKernel& kernel, std::span<double> out) {
  const std::size_t K = kernel.truncation();
  check_species(c, K, "eval_s");
  check_flux(out, K, "eval_s");
  const double c1 = c[0];
  for (std::size_t k = 1; k <= K - 1; ++k) {
    out[agg_channel(k)] = kernel.a(k) * c1 * c[k - 1];
    out[frag_channel(k)] = kernel.b(k + 1) * c[k];
  }
}

Vec eval_s(const Concentration& c, const RateKernel& kernel) {
  Vec out(channel_count(kernel.truncation()));
  eval_s(c.v, kernel, out);
  return out;
}

void apply_tau(std::span<const double> z, std::span<double> out) {
  const std::size_t K = out.size();
  check_flux(z, K, "apply_tau");
  // Monomer row: aggregation k consumes 1+1{k=1} monomers, fragmentation of a
  // size-(k+1) cluster releases 1+1{k=1}.
  double acc = 0.0;
  for (std::size_t k = 1; k <= K - 1; ++k) {
    const double za = z[agg_channel(k)];
    const double zf = z[frag_channel(k)];
    acc += (zf - za);
    if (k == 1) acc += (zf - za);
  }
  out[0] = acc;
  for (std::size_t k = 2; k <= K; ++k) {
    double v = z[agg_channel(k - 1)] - z[frag_channel(k - 1)];
    if (k <= K - 1) v += z[frag_channel(k)] - z[agg_channel(k)];
    out[k - 1] = v;
  }
}

Vec apply_tau(std::span<const double> z, std::size_t K) {
  Vec out(K);
  apply_tau(z, out);
  return out;
}

void jacobian_apply(std::span<const double> c, std::span<const double> x,
                    const RateKernel& kernel, std::span<double> out) {
  const std::size_t K = kernel.truncation();
  check_species(c, K, "jacobian_apply");
  check_species(x, K, "jacobian_apply");
  check_flux(out, K, "jacobian_apply");
  const double c1 = c[0];
  const double x1 = x[0];
  for (std::size_t k = 1; k <= K - 1; ++k) {
    out[agg_channel(k)] = kernel.a(k) * (x1 * c[k - 1] + c1 * x[k - 1]);
    out[frag_channel(k)] = kernel.b(k + 1) * x[k];
  }
}

Vec jacobian_apply(const Concentration& c, std::span<const double> x,
                   const RateKernel& kernel) {
  Vec out(channel_count(kernel.truncation()));
  jacobian_apply(c.v, x, kernel, out);
  return out;
}

void drift_apply(std::span<const double> c, std::span<const double> x,
                 const RateKernel& kernel, std::span<double> out,
                 std::span<double> scratch) {
  jacobian_apply(c, x, kernel, scratch);
  apply_tau(scratch, out);
}

double net_flux(std::span<const double> c, const RateKernel& kernel, std::size_t k) {
  const std::size_t K = kernel.truncation();
  check_species(c, K, "net_flux");
  if (k < 1 || k > K - 1)
    throw DomainError("net_flux: channel index " + std::to_string(k) +
                      " outside 1.." + std::to_string(K - 1));
  return kernel.a(k) * c[0] * c[k - 1] - kernel.b(k + 1) * c[k];
}

std::vector<double> drift_matrix(std::span<const double> c, const RateKernel& kernel,
                                 std::size_t dense_cap) {
  const std::size_t K = kernel.truncation();
  check_species(c, K, "drift_matrix");
  if (K > dense_cap)
    throw DimensionError("drift_matrix: K = " + std::to_string(K) +
                         " exceeds dense cap " + std::to_string(dense_cap));
  std::vector<double> A(K * K, 0.0);
  Vec unit(K, 0.0), col(K), scratch(channel_count(K));
  for (std::size_t j = 0; j < K; ++j) {
    unit[j] = 1.0;
    drift_apply(c, unit, kernel, col, scratch);
    unit[j] = 0.0;
    for (std::size_t i = 0; i < K; ++i) A[i * K + j] = col[i];
  }
  return A;
}

namespace {

// Flux of channel j with a small clamp: dense-output interpolation of an ODE
// trajectory can undershoot 0 by a few ulp.
double channel_flux_checked(std::span<const double> s, std::size_t j) {
  const double v = s[j];
  if (v < -1e-13)
    throw DomainError("diffusion: negative channel flux at index " + std::to_string(j));
  return v < 0.0 ? 0.0 : v;
}

}  // namespace

std::vector<double> diffusion_matrix(std::span<const double> c, const RateKernel& kernel,
                                     std::size_t dense_cap) {
  const std::size_t K = kernel.truncation();
  check_species(c, K, "diffusion_matrix");
  if (K > dense_cap)
    throw DimensionError("diffusion_matrix: K = " + std::to_string(K) +
                         " exceeds dense cap " + std::to_string(dense_cap));
  const std::size_t C = channel_count(K);
  Vec s(C);
  eval_s(c, kernel, s);
  std::vector<double> B(K * C, 0.0);
  for (std::size_t k = 1; k <= K - 1; ++k) {
    const double sa = std::sqrt(channel_flux_checked(s, agg_channel(k)));
    const double sf = std::sqrt(channel_flux_checked(s, frag_channel(k)));
    const double m1 = (k == 1) ? 2.0 : 1.0;  // monomers consumed / released
    const std::size_t ja = agg_channel(k), jf = frag_channel(k);
    B[0 * C + ja] -= m1 * sa;
    B[0 * C + jf] += m1 * sf;
    if (k >= 2) {
      B[(k - 1) * C + ja] -= sa;
      B[(k - 1) * C + jf] += sf;
    }
    B[k * C + ja] += sa;
    B[k * C + jf] -= sf;
  }
  return B;
}

std::vector<double> noise_covariance_matrix(std::span<const double> c,
                                            const RateKernel& kernel,
                                            std::size_t dense_cap) {
  const std::size_t K = kernel.truncation();
  check_species(c, K, "noise_covariance_matrix");
  if (K > dense_cap)
    throw DimensionError("noise_covariance_matrix: K = " + std::to_string(K) +
                         " exceeds dense cap " + std::to_string(dense_cap));
  const std::size_t C = channel_count(K);
  Vec s(C);
  eval_s(c, kernel, s);
  std::vector<double> Q(K * K, 0.0);
  // The fragmentation column of channel k is the negated aggregation column,
  // so both share one rank-1 update weighted by the summed flux.
  std::size_t idx[3];
  double g[3];
  for (std::size_t k = 1; k <= K - 1; ++k) {
    const double wgt = channel_flux_checked(s, agg_channel(k)) +
                       channel_flux_checked(s, frag_channel(k));
    std::size_t n = 0;
    if (k == 1) {
      idx[n] = 0; g[n++] = -2.0;
    } else {
      idx[n] = 0; g[n++] = -1.0;
      idx[n] = k - 1; g[n++] = -1.0;
    }
    idx[n] = k; g[n++] = 1.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = 0; q < n; ++q)
        Q[idx[p] * K + idx[q]] += wgt * g[p] * g[q];
  }
  return Q;
}

double weighted_norm(std::span<const double> v, const WeightSequence& w) {
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) acc += w.weight(i + 1) * v[i] * v[i];
  return std::sqrt(acc);
}

double weighted_norm(std::span<const double> v, std::span<const double> w_table) {
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) acc += w_table[i] * v[i] * v[i];
  return std::sqrt(acc);
}

double gamma_tau(const WeightSequence& w) {
  return std::sqrt(4.0 * w.weight(1) * w.inv_sum() + 8.0 + w.weight(2) / w.weight(1));
}

double gamma_drift(std::span<const double> c, const WeightSequence& w,
                   const RateKernel& kernel) {
  double wc = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) wc += w.weight(i + 1) * c[i];
  const double lam = kernel.lambda_max();
  return w.gamma0() * lam * lam * (3.0 + 2.0 * wc);
}

double drift_lower_bound_diagnostic(std::span<const double> c, const RateKernel& kernel,
                                    const WeightSequence& w, std::size_t k) {
  const std::size_t K = kernel.truncation();
  check_species(c, K, "drift_lower_bound_diagnostic");
  if (k < 2 || k > K)
    throw DomainError("drift_lower_bound_diagnostic: index " + std::to_string(k) +
                      " outside 2.." + std::to_string(K));
  Vec h(K, 0.0);
  h[k - 1] = 1.0 / std::sqrt(w.weight(k));
  Vec out(K), scratch(channel_count(K));
  drift_apply(c, h, kernel, out, scratch);
  return weighted_norm(out, w);
}

}  // namespace bd
