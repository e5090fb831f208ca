#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bd/kernel.hpp"
#include "bd/state.hpp"
#include "bd/weights.hpp"

namespace bd {

// Reaction channels at truncation K, stored densely as one vector of length
// 2(K-1). Channel 2k-2 (0-based) is the aggregation of a monomer onto a size-k
// cluster (1 <= k <= K-1); channel 2k-1 is the fragmentation of a size-(k+1)
// cluster. This mirrors the odd/even channel convention of the flux operator.
inline std::size_t channel_count(std::size_t K) { return 2 * (K - 1); }
inline std::size_t agg_channel(std::size_t k) { return 2 * k - 2; }
inline std::size_t frag_channel(std::size_t k) { return 2 * k - 1; }

// Per-channel reaction flux s(c): aggregation channel k carries a_k c_1 c_k,
// fragmentation channel k carries b_{k+1} c_{k+1}.
void eval_s(std::span<const double> c, const RateKernel& kernel, std::span<double> out);
Vec eval_s(const Concentration& c, const RateKernel& kernel);

// Stoichiometry map from channel fluxes to per-species net rates. z entries
// beyond the truncation read as 0. Annihilates mass channel by channel.
void apply_tau(std::span<const double> z, std::span<double> out);
Vec apply_tau(std::span<const double> z, std::size_t K);

// Directional derivative of s at c in direction x: channel 2k-2 carries
// a_k (x_1 c_k + c_1 x_k), channel 2k-1 carries b_{k+1} x_{k+1}.
void jacobian_apply(std::span<const double> c, std::span<const double> x,
                    const RateKernel& kernel, std::span<double> out);
Vec jacobian_apply(const Concentration& c, std::span<const double> x,
                   const RateKernel& kernel);

// tau(grad s(c) . x), the drift operator of the fluctuation dynamics, applied
// matrix-free. scratch must have channel_count(K) capacity.
void drift_apply(std::span<const double> c, std::span<const double> x,
                 const RateKernel& kernel, std::span<double> out,
                 std::span<double> scratch);

// Net flux through channel k: J_k(c) = a_k c_1 c_k - b_{k+1} c_{k+1}, 1 <= k <= K-1.
double net_flux(std::span<const double> c, const RateKernel& kernel, std::size_t k);

// Dense K x K matrix of tau . grad s(c); columns annihilate mass. Refuses
// K > dense_cap (use drift_apply beyond the cap).
std::vector<double> drift_matrix(std::span<const double> c, const RateKernel& kernel,
                                 std::size_t dense_cap = 512);

// Dense K x 2(K-1) noise matrix: column j is tau(e_j) scaled by sqrt(s_j(c)).
// Flux entries below -1e-13 raise DomainError; tiny negatives from interpolated
// concentrations are clamped to 0.
std::vector<double> diffusion_matrix(std::span<const double> c, const RateKernel& kernel,
                                     std::size_t dense_cap = 512);

// B B^T accumulated directly from the channel stoichiometry in O(K).
std::vector<double> noise_covariance_matrix(std::span<const double> c,
                                            const RateKernel& kernel,
                                            std::size_t dense_cap = 512);

// Weighted l2 norm sqrt(sum w_i v_i^2); weights are positional (1-based).
double weighted_norm(std::span<const double> v, const WeightSequence& w);
double weighted_norm(std::span<const double> v, std::span<const double> w_table);

// Explicit operator-norm bound for tau on L2(w):
// gamma_tau = sqrt(4 w_1 ||1/w||_l1 + 8 + w_2/w_1).
double gamma_tau(const WeightSequence& w);

// Explicit bound gamma(c, w) = gamma0 Lambda^2 (3 + 2 sum w_k c_k) with
// ||grad s(c) . x||_w^2 <= gamma(c, w) ||x||_w^2.
double gamma_drift(std::span<const double> c, const WeightSequence& w,
                   const RateKernel& kernel);

// ||tau(grad s(c)) . h_k||_w for the normalized basis vector h_k = e_k/sqrt(w_k),
// 2 <= k <= K. Its k-th coordinate is -(b_k + a_k c_1)/sqrt(w_k) before
// weighting, which grows without bound when the rates do. Diagnostic only.
double drift_lower_bound_diagnostic(std::span<const double> c, const RateKernel& kernel,
                                    const WeightSequence& w, std::size_t k);

}  // namespace bd
