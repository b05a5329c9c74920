#pragma once

#include <utility>

#include "cfee/channel.hpp"
#include "cfee/params.hpp"

namespace cfee {

// ===========================================================================
// PowerAllocation: transmit amplitudes (sqrt-watts) and splitting factors.
// q(n,g) and p(n,k) are the per-AP amplitude entries of the stacked vectors
// q_bar_g / p_bar_k; rho_k in (0,1] is the share routed to the decoder.
// ===========================================================================
struct PowerAllocation {
  Mat q;    ///< N x G multicast amplitudes [sqrt(W)]
  Mat p;    ///< N x K unicast amplitudes [sqrt(W)]
  Arr rho;  ///< K splitting factors

  [[nodiscard]] static PowerAllocation zeros(int n, int g, int k);
};

// ===========================================================================
// PerfReport: all closed-form performance figures for one allocation.
// ===========================================================================
struct PerfReport {
  Arr r_unicast;          ///< K unicast rates [nats/s/Hz]
  Arr r_multicast_ue;     ///< K per-UE multicast rates R_k
  Arr r_multicast;        ///< G group rates (min over members)
  Arr phi_e;              ///< K pre-split RF powers [W]
  Arr p_in;               ///< K received RF powers (1-rho) phi_e [W]
  Arr harvested;          ///< K harvested powers [W]
  Arr c_bh;               ///< N backhaul loads, exact indicator [nats/s/Hz]
  Arr c_bh_smooth;        ///< N backhaul loads, smooth indicator
  Arr p_tr;               ///< N per-AP transmit powers [W]
  double p_total = 0;     ///< exact-indicator total consumption [W]
  double p_total_smooth = 0;
  double sum_rate_nats = 0;     ///< sum of group + unicast rates [nats/s/Hz]
  double ee_bits_per_joule = 0; ///< exact-indicator energy efficiency
  double ee_smooth_bits_per_joule = 0;
  Arr rho;                ///< copy of the splitting factors
  std::vector<int> group_of;  ///< UE -> group map used for the rate floors
};

/// Per-constraint slacks (>= 0 iff satisfied).  The energy slack is kept in
/// the penalty form phi_e - Finv(e)/(1-rho) [W] so that the feasibility
/// penalty equals the sum of clamped negative slacks term-by-term.
struct ConstraintSlacks {
  Arr mc_rate;   ///< K: R_k - rate_floor_mc[g_k]
  Arr uc_rate;   ///< K: R_u,k - rate_floor_uc[k]
  Arr energy;    ///< K: phi_e,k - Finv(e_k)/(1-rho_k)
  Arr backhaul;  ///< N: backhaul_cap - C_bh,n (exact indicator)
  Arr power;     ///< N: power_cap - p_tr,n

  [[nodiscard]] double min_slack() const;
  /// Sum of clamped violations over the first four families (the penalty
  /// objective; the per-AP power cap is handled by projection instead).
  [[nodiscard]] double penalty_sum() const;
};

// --- scalar maps -----------------------------------------------------------
/// x / (x + theta): smooth step standing in for the activity indicator.
[[nodiscard]] double smooth_indicator(double x, double theta);
/// Clipped-logistic harvested power F(p_in) in [0, eh_max].
[[nodiscard]] double harvest(double p_in, const SystemParams& params);
/// Pseudo-inverse: 0 for x <= 0, +inf for x >= eh_max, else the exact inverse.
[[nodiscard]] double harvest_inverse(double x, const SystemParams& params);

// --- interference functionals (denominators) --------------------------------
[[nodiscard]] double phi_u(const ChannelStats& s, const PowerAllocation& v, int k);
[[nodiscard]] double phi_m(const ChannelStats& s, const PowerAllocation& v, int k);
[[nodiscard]] double phi_e(const ChannelStats& s, const PowerAllocation& v, int k);

// --- rates and harvested power ----------------------------------------------
[[nodiscard]] double unicast_rate(const ChannelStats& s, const PowerAllocation& v, int k);
[[nodiscard]] double multicast_rate_ue(const ChannelStats& s, const PowerAllocation& v, int k);
/// (group rate, per-member rates); ties broken toward the lowest UE index.
[[nodiscard]] std::pair<double, Arr> multicast_rate(const ChannelStats& s,
                                                    const PowerAllocation& v, int g);
[[nodiscard]] double received_rf_power(const ChannelStats& s, const PowerAllocation& v, int k);

// --- power model --------------------------------------------------------------
[[nodiscard]] Arr ap_transmit_power(const PowerAllocation& v);
[[nodiscard]] double backhaul_load(const ChannelStats& s, const SystemParams& params,
                                   const PowerAllocation& v, int n, bool use_smooth);
[[nodiscard]] double total_power(const ChannelStats& s, const SystemParams& params,
                                 const PowerAllocation& v, bool use_smooth);

// --- objective ------------------------------------------------------------------
[[nodiscard]] PerfReport evaluate(const ChannelStats& s, const SystemParams& params,
                                  const PowerAllocation& v);
[[nodiscard]] ConstraintSlacks check_constraints(const PerfReport& report,
                                                 const SystemParams& params);

}  // namespace cfee
