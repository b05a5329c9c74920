#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "cfee/params.hpp"
#include "cfee/topology.hpp"

namespace cfee {

using CMat = Eigen::MatrixXcd;

// ===========================================================================
// ChannelStats: closed-form estimation statistics.  Self-contained for the
// performance layer (carries the group structure and noise levels).
// ===========================================================================
struct ChannelStats {
  int num_aps = 0;
  int antennas_per_ap = 0;
  int num_ues = 0;
  int num_groups = 0;

  Mat beta;           ///< N x K true large-scale gains
  Mat sqrt_beta;      ///< entries beta^(1/2) (the diagonal of Xi_k per column)
  Mat bar_beta;       ///< N x K estimator gain
  Mat beta_hat;       ///< N x K estimate variance
  Mat sqrt_beta_hat;  ///< entries beta_hat^(1/2) (xi_hat_k per column)
  Mat varrho;         ///< N x G sum of member betas
  Mat bar_alpha;      ///< N x G group estimator gain
  Mat alpha_hat;      ///< N x G group estimate variance

  std::vector<std::vector<int>> groups;
  std::vector<int> group_of;

  Arr delta2;  ///< per-UE antenna noise [W]
  Arr sigma2;  ///< per-UE splitter noise [W]
};

/// Closed-form MMSE statistics.  With tr = tau_p * pilot_snr():
///   bar_beta  = sqrt(tr) beta / (1 + tr varrho_g)
///   beta_hat  = tr beta^2    / (1 + tr varrho_g)
///   bar_alpha = sqrt(tr) varrho / (1 + tr varrho)
///   alpha_hat = tr varrho^2  / (1 + tr varrho)
[[nodiscard]] ChannelStats derive_stats(const SystemParams& params, const Topology& topo);

// ===========================================================================
// ChannelRealization: one small-scale draw with estimates and beamformers.
// Storage is stacked: column k of `g` is [g_{1,k}; ...; g_{N,k}] with M rows
// per AP (total N*M x K); same layout for the others.
// ===========================================================================
struct ChannelRealization {
  CMat g;      ///< N*M x K true channels
  CMat g_hat;  ///< N*M x K MMSE estimates
  CMat f_hat;  ///< N*M x G group-channel estimates
  CMat w;      ///< N*M x G multicast beamformers (E||w_{n,g}||^2 = 1)
  CMat v;      ///< N*M x K unicast beamformers  (E||v_{n,k}||^2 = 1)
};

/// Draw one realization: h ~ CN(0, I_M) per (n,k) with g = sqrt(beta) h.
/// Estimates share the per-(n,g) pilot noise across group members (pilot
/// contamination), and the beamformers are normalized by the analytic
/// denominators sqrt(M alpha_hat) and sqrt(M beta_hat) — the choice that
/// makes the closed-form rate expressions exact.
[[nodiscard]] ChannelRealization draw_realization(const SystemParams& params,
                                                  const Topology& topo,
                                                  const ChannelStats& stats,
                                                  std::mt19937_64& rng);

}  // namespace cfee
