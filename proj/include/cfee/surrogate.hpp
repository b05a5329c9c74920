#pragma once

#include <vector>

#include "cfee/channel.hpp"
#include "cfee/params.hpp"
#include "cfee/performance.hpp"

namespace cfee {

// ===========================================================================
// SurrogateCoeffs: one immutable bundle of convex replacements, expanded at
// v0.  The per-UE rates and the pre-split RF power get concave/affine LOWER
// bounds that are tight at v0; the smoothed backhaul load and the smoothed
// total consumed power get affine-in-amplitude UPPER bounds (tangents of the
// concave-in-amplitude indicator, valid for expansion powers >= theta).
// The bundle is self-contained (snapshots of the statistics and constants),
// so it can be shared across threads without extra synchronization.
// ===========================================================================
struct SurrogateCoeffs {
  ChannelStats stats;   ///< quadratic-form weights (snapshot)
  SystemParams params;  ///< device constants (snapshot)
  PowerAllocation v0;   ///< expansion point (amplitudes >= 0, rho interior)

  // Concave rate lower bounds, per UE k (column k of the N x K matrices):
  //   rbar_k(V) = zeta[k] + 2 psi.col(k).dot(a_k)
  //               - curv[k] * (phi_k(V) + M (xi_hat_k.dot(a_k))^2)
  // where a_k is q.col(g_k) for the multicast bound and p.col(k) for the
  // unicast bound, and phi_k is the matching exact denominator functional.
  Arr zeta_m;  ///< K constant terms [nats/s/Hz]
  Arr curv_m;  ///< K curvature weights [1/W]
  Mat psi_m;   ///< N x K linear coefficients [1/sqrt(W)]
  Arr zeta_u;
  Arr curv_u;
  Mat psi_u;

  // Affine lower bound on the pre-split RF power (gradient plane of the
  // convex quadratic part of phi_e):
  //   phibar_e_k(V) = zeta_e[k] + 2 sum_{n,g} energy_q[k](n,g) q(n,g)
  //                             + 2 sum_{n,j} energy_p[k](n,j) p(n,j)
  Arr zeta_e;                 ///< K constant terms [W]
  std::vector<Mat> energy_q;  ///< K matrices, N x G [sqrt(W) weights]
  std::vector<Mat> energy_p;  ///< K matrices, N x K

  // Per-stream amplitude tangents of the smoothed activity indicator:
  //   f_theta(a^2) <= ind_h(n,s) + ind_slope(n,s) * a   for a >= 0.
  Mat ind_slope_m, ind_h_m;  ///< N x G (multicast streams)
  Mat ind_slope_u, ind_h_u;  ///< N x K (unicast streams)

  // Amplitude tangents of the smoothed per-AP activity indicator:
  //   f_theta(p_tr_n) <= act_h[n] + sum_g act_slope_m(n,g) q(n,g)
  //                               + sum_k act_slope_u(n,k) p(n,k)
  Mat act_slope_m;  ///< N x G
  Mat act_slope_u;  ///< N x K
  Arr act_h;        ///< N

  // Rates at the expansion point, frozen for the backhaul bound.
  Arr rate_u0;  ///< K unicast rates [nats/s/Hz]
  Arr rate_m0;  ///< G group rates (min over members)
};

/// Expand every surrogate at v_t.  Amplitudes are snapshotted clamped to the
/// nonnegative orthant and rho is nudged into [1e-6, 1 - 1e-6]; with those
/// adjustments every bound is tight at the stored expansion point.
[[nodiscard]] SurrogateCoeffs build_surrogate(const ChannelStats& stats,
                                              const SystemParams& params,
                                              const PowerAllocation& v_t);

/// Concave lower bound on the unicast rate of UE k [nats/s/Hz].
[[nodiscard]] double surrogate_unicast_rate(const SurrogateCoeffs& c,
                                            const PowerAllocation& v, int k);
/// Concave lower bound on the per-UE multicast rate R_k [nats/s/Hz].
[[nodiscard]] double surrogate_multicast_rate_ue(const SurrogateCoeffs& c,
                                                 const PowerAllocation& v, int k);
/// Affine lower bound on the pre-split RF power phi_e,k [W].
[[nodiscard]] double surrogate_energy_phi(const SurrogateCoeffs& c,
                                          const PowerAllocation& v, int k);
/// Affine upper bound on the smoothed backhaul load of AP n [nats/s/Hz]
/// (frozen expansion-point rates times linearized indicators).
[[nodiscard]] double surrogate_backhaul(const SurrogateCoeffs& c,
                                        const PowerAllocation& v, int n);
/// Convex upper bound on the smoothed total consumed power [W].
[[nodiscard]] double surrogate_total_power(const SurrogateCoeffs& c,
                                           const PowerAllocation& v);

}  // namespace cfee
