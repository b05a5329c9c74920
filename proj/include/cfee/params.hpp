#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace cfee {

using Arr = Eigen::ArrayXd;
using Mat = Eigen::ArrayXXd;

/// Configuration was rejected (bad key, bad value, inconsistent sizes).
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The instance is infeasible by construction (e.g. an energy floor at or
/// above the harvester saturation level, which no allocation can meet).
struct infeasible_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ===========================================================================
// SystemParams: every scenario constant, in SI units (watts, Hz, meters,
// nats/s/Hz).  Config files use friendlier units (dBm, mW, bps/Hz) and are
// converted once at load.
// ===========================================================================
struct SystemParams {
  // --- network dimensions -------------------------------------------------
  int num_aps = 20;         ///< N
  int antennas_per_ap = 2;  ///< M
  int num_ues = 8;          ///< K
  int num_groups = 4;       ///< G

  // --- geometry / large-scale fading --------------------------------------
  double area_side = 300.0;    ///< D [m], square coverage area
  double ref_distance = 5.0;   ///< d0 [m]
  double pathloss_exp = 3.76;  ///< unitless
  double shadow_std_db = 8.0;  ///< log-normal shadowing std [dB]
  bool ap_grid = false;        ///< grid AP placement instead of uniform

  // --- frame / pilot ------------------------------------------------------
  double bandwidth_hz = 20e6;
  double coherence_len = 200.0;  ///< tau_c [symbols]
  double pilot_len = 4.0;        ///< tau_p [symbols]
  double pilot_power_w = 0.1;    ///< rho_p [W]

  // --- noise ---------------------------------------------------------------
  Arr antenna_noise_w;   ///< delta^2 per UE [W]
  Arr splitter_noise_w;  ///< sigma^2 per UE [W]

  // --- nonlinear energy harvester ------------------------------------------
  double eh_sensitivity_w = 0.08e-3;  ///< P0
  double eh_max_w = 37.5e-3;          ///< P_max
  double eh_iota1 = 116.0;            ///< iota_1 [1/W]
  double eh_iota2 = 2.3;              ///< iota_2 [unitless]

  // --- power consumption model ---------------------------------------------
  Arr pa_efficiency;                      ///< xi_n per AP
  double ap_active_w = 10.65;             ///< p_ac
  double ap_sleep_w = 5.05;               ///< p_sl
  double bh_traffic_w_per_bps = 0.25e-9;  ///< p_bh [W per bit/s]
  double bh_fixed_w = 0.825;              ///< p_0

  // --- constraints -----------------------------------------------------------
  Arr rate_floor_mc_nats;  ///< per group [nats/s/Hz]
  Arr rate_floor_uc_nats;  ///< per UE [nats/s/Hz]
  Arr energy_floor_w;      ///< per UE [W]
  Arr power_cap_w;         ///< per AP [W]
  Arr backhaul_cap_nats;   ///< per AP [nats/s/Hz]

  // --- smoothing -------------------------------------------------------------
  double smooth_theta_w = 1e-5;  ///< theta of the indicator approximation

  // --- derived helpers -------------------------------------------------------
  /// Fraction of the coherence block left for data.
  [[nodiscard]] double prelog() const { return 1.0 - pilot_len / coherence_len; }
  /// Backhaul traffic power per unit spectral rate [W per nat/s/Hz]:
  /// traffic in bit/s is C_nats * B / ln 2.
  [[nodiscard]] double bh_w_per_nats() const;
  /// Pilot SNR: the estimator closed forms use a noise-normalized pilot power
  /// (the "+1" in their denominators is the unit receiver noise).  The AP
  /// receiver noise level is taken equal to the mean configured antenna noise.
  [[nodiscard]] double pilot_snr() const;
  [[nodiscard]] double delta_p(int) const { return ap_active_w - ap_sleep_w; }

  /// Fill vector fields from scalars and check consistency; throws
  /// config_error / infeasible_error.
  void finalize_and_validate();
};

// --- unit conversions --------------------------------------------------------
[[nodiscard]] double dbm_to_watts(double dbm);
[[nodiscard]] double watts_to_dbm(double w);
[[nodiscard]] double db_to_linear(double db);
[[nodiscard]] double bpshz_to_nats(double bps_hz);
[[nodiscard]] double nats_to_bpshz(double nats);

/// Parse a JSON config text into SystemParams.  Unknown keys are rejected.
/// Scalar entries broadcast to per-entity vectors; arrays must match the
/// entity count.  Throws config_error on malformed input and
/// infeasible_error when an energy floor reaches the harvester saturation.
[[nodiscard]] SystemParams load_params(const std::string& config_text);

/// Desk-scale default scenario (N=20, M=2, K=8, G=4) as a JSON string; used
/// by tests and as the template emitted by the CLI.
[[nodiscard]] std::string default_config_json();

}  // namespace cfee
