#include "cfee/params.hpp"

#include <cmath>
#include <set>

#include <json.hpp>

namespace cfee {

using nlohmann::json;

double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }
double watts_to_dbm(double w) { return 10.0 * std::log10(w / 1e-3); }
double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double bpshz_to_nats(double bps_hz) { return bps_hz * M_LN2; }
double nats_to_bpshz(double nats) { return nats / M_LN2; }

double SystemParams::bh_w_per_nats() const {
  return bh_traffic_w_per_bps * bandwidth_hz / M_LN2;
}

double SystemParams::pilot_snr() const {
  return pilot_power_w / antenna_noise_w.mean();
}

namespace {

Arr broadcast(const json& v, int count, const char* key) {
  Arr out(count);
  if (v.is_number()) {
    out.setConstant(v.get<double>());
  } else if (v.is_array()) {
    if (static_cast<int>(v.size()) != count) {
      throw config_error(std::string(key) + ": expected " + std::to_string(count) +
                         " entries, got " + std::to_string(v.size()));
    }
    for (int i = 0; i < count; ++i) out[i] = v[i].get<double>();
  } else {
    throw config_error(std::string(key) + ": expected number or array");
  }
  return out;
}

void require_positive(double x, const char* key) {
  if (!(x > 0) || !std::isfinite(x)) {
    throw config_error(std::string(key) + ": must be positive and finite");
  }
}

}  // namespace

void SystemParams::finalize_and_validate() {
  if (num_aps < 1 || num_ues < 1 || num_groups < 1 || antennas_per_ap < 1) {
    throw config_error("network dimensions must be >= 1");
  }
  if (num_groups > num_ues) {
    throw config_error("num_groups may not exceed num_ues (every group needs a member)");
  }
  require_positive(area_side, "area_side_m");
  require_positive(ref_distance, "ref_distance_m");
  require_positive(bandwidth_hz, "bandwidth_hz");
  require_positive(coherence_len, "coherence_len");
  require_positive(pilot_len, "pilot_len");
  if (pilot_len >= coherence_len) {
    throw config_error("pilot_len must be smaller than coherence_len");
  }
  require_positive(pilot_power_w, "pilot_power");
  require_positive(eh_max_w, "eh_max_mw");
  require_positive(eh_iota1, "eh_iota1_per_w");
  if (eh_sensitivity_w < 0) throw config_error("eh_sensitivity_mw: must be >= 0");
  require_positive(smooth_theta_w, "smooth_theta_w");

  auto fill = [&](Arr& a, int count, double dflt) {
    if (a.size() == 0) {
      a = Arr::Constant(count, dflt);
    } else if (a.size() != count) {
      throw config_error("per-entity vector has the wrong length");
    }
  };
  fill(antenna_noise_w, num_ues, dbm_to_watts(-70.0));
  fill(splitter_noise_w, num_ues, dbm_to_watts(-104.0));
  fill(pa_efficiency, num_aps, 0.25);
  fill(rate_floor_mc_nats, num_groups, bpshz_to_nats(0.5));
  fill(rate_floor_uc_nats, num_ues, bpshz_to_nats(0.5));
  fill(energy_floor_w, num_ues, 0.01e-3);
  fill(power_cap_w, num_aps, dbm_to_watts(30.0));
  fill(backhaul_cap_nats, num_aps, bpshz_to_nats(10.0));

  if ((antenna_noise_w <= 0).any()) throw config_error("antenna_noise: must be positive");
  if ((splitter_noise_w <= 0).any()) throw config_error("splitter_noise: must be positive");
  if ((pa_efficiency <= 0).any() || (pa_efficiency > 1).any()) {
    throw config_error("pa_efficiency: must lie in (0, 1]");
  }
  if ((power_cap_w <= 0).any()) throw config_error("power_cap: must be positive");
  if ((rate_floor_mc_nats < 0).any() || (rate_floor_uc_nats < 0).any()) {
    throw config_error("rate floors must be >= 0");
  }
  if ((backhaul_cap_nats < 0).any()) throw config_error("backhaul_cap: must be >= 0");
  if ((energy_floor_w < 0).any()) throw config_error("energy_floor: must be >= 0");
  // A floor at or above the harvester saturation can never be met: the
  // pseudo-inverse is +inf there, so reject the scenario outright.
  for (int k = 0; k < num_ues; ++k) {
    if (energy_floor_w[k] >= eh_max_w) {
      throw infeasible_error("energy_floor for UE " + std::to_string(k) +
                             " is at or above the harvester saturation eh_max");
    }
  }
}

SystemParams load_params(const std::string& config_text) {
  json j;
  try {
    j = json::parse(config_text);
  } catch (const json::parse_error& e) {
    throw config_error(std::string("config parse error: ") + e.what());
  }
  if (!j.is_object()) throw config_error("config root must be an object");

  static const std::set<std::string> known = {
      "num_aps", "antennas_per_ap", "num_ues", "num_groups",
      "area_side_m", "ref_distance_m", "pathloss_exp", "shadow_std_db", "ap_grid",
      "bandwidth_hz", "coherence_len", "pilot_len",
      "pilot_power_w", "pilot_power_dbm",
      "antenna_noise_dbm", "splitter_noise_dbm",
      "eh_sensitivity_mw", "eh_max_mw", "eh_iota1_per_w", "eh_iota2",
      "pa_efficiency", "ap_active_w", "ap_sleep_w",
      "bh_traffic_w_per_gbps", "bh_fixed_w",
      "rate_floor_mc_bps_hz", "rate_floor_uc_bps_hz",
      "energy_floor_mw", "power_cap_dbm", "backhaul_cap_bps_hz",
      "smooth_theta_w"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) {
      throw config_error("unknown config key: " + it.key());
    }
  }

  SystemParams p;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].template get<std::decay_t<decltype(field)>>();
  };
  get("num_aps", p.num_aps);
  get("antennas_per_ap", p.antennas_per_ap);
  get("num_ues", p.num_ues);
  get("num_groups", p.num_groups);
  get("area_side_m", p.area_side);
  get("ref_distance_m", p.ref_distance);
  get("pathloss_exp", p.pathloss_exp);
  get("shadow_std_db", p.shadow_std_db);
  get("ap_grid", p.ap_grid);
  get("bandwidth_hz", p.bandwidth_hz);
  get("coherence_len", p.coherence_len);
  get("pilot_len", p.pilot_len);
  if (j.contains("pilot_power_w") && j.contains("pilot_power_dbm")) {
    throw config_error("give pilot_power_w or pilot_power_dbm, not both");
  }
  get("pilot_power_w", p.pilot_power_w);
  if (j.contains("pilot_power_dbm")) p.pilot_power_w = dbm_to_watts(j["pilot_power_dbm"].get<double>());
  get("eh_iota2", p.eh_iota2);
  get("eh_iota1_per_w", p.eh_iota1);
  if (j.contains("eh_sensitivity_mw")) p.eh_sensitivity_w = 1e-3 * j["eh_sensitivity_mw"].get<double>();
  if (j.contains("eh_max_mw")) p.eh_max_w = 1e-3 * j["eh_max_mw"].get<double>();
  get("ap_active_w", p.ap_active_w);
  get("ap_sleep_w", p.ap_sleep_w);
  if (j.contains("bh_traffic_w_per_gbps")) {
    p.bh_traffic_w_per_bps = 1e-9 * j["bh_traffic_w_per_gbps"].get<double>();
  }
  get("bh_fixed_w", p.bh_fixed_w);
  get("smooth_theta_w", p.smooth_theta_w);

  // Vector-capable entries (converted to SI after broadcasting).
  if (j.contains("antenna_noise_dbm")) {
    Arr dbm = broadcast(j["antenna_noise_dbm"], p.num_ues, "antenna_noise_dbm");
    p.antenna_noise_w = dbm.unaryExpr([](double x) { return dbm_to_watts(x); });
  }
  if (j.contains("splitter_noise_dbm")) {
    Arr dbm = broadcast(j["splitter_noise_dbm"], p.num_ues, "splitter_noise_dbm");
    p.splitter_noise_w = dbm.unaryExpr([](double x) { return dbm_to_watts(x); });
  }
  if (j.contains("pa_efficiency")) {
    p.pa_efficiency = broadcast(j["pa_efficiency"], p.num_aps, "pa_efficiency");
  }
  if (j.contains("rate_floor_mc_bps_hz")) {
    p.rate_floor_mc_nats =
        broadcast(j["rate_floor_mc_bps_hz"], p.num_groups, "rate_floor_mc_bps_hz") * M_LN2;
  }
  if (j.contains("rate_floor_uc_bps_hz")) {
    p.rate_floor_uc_nats =
        broadcast(j["rate_floor_uc_bps_hz"], p.num_ues, "rate_floor_uc_bps_hz") * M_LN2;
  }
  if (j.contains("energy_floor_mw")) {
    p.energy_floor_w = broadcast(j["energy_floor_mw"], p.num_ues, "energy_floor_mw") * 1e-3;
  }
  if (j.contains("power_cap_dbm")) {
    Arr dbm = broadcast(j["power_cap_dbm"], p.num_aps, "power_cap_dbm");
    p.power_cap_w = dbm.unaryExpr([](double x) { return dbm_to_watts(x); });
  }
  if (j.contains("backhaul_cap_bps_hz")) {
    p.backhaul_cap_nats =
        broadcast(j["backhaul_cap_bps_hz"], p.num_aps, "backhaul_cap_bps_hz") * M_LN2;
  }

  p.finalize_and_validate();
  return p;
}

std::string default_config_json() {
  return R"({
  "num_aps": 20,
  "antennas_per_ap": 2,
  "num_ues": 8,
  "num_groups": 4,
  "area_side_m": 300,
  "ref_distance_m": 5,
  "pathloss_exp": 3.76,
  "shadow_std_db": 8,
  "bandwidth_hz": 2e7,
  "coherence_len": 200,
  "pilot_len": 4,
  "pilot_power_w": 0.1,
  "antenna_noise_dbm": -70,
  "splitter_noise_dbm": -104,
  "eh_sensitivity_mw": 0.08,
  "eh_max_mw": 37.5,
  "eh_iota1_per_w": 116,
  "eh_iota2": 2.3,
  "pa_efficiency": 0.25,
  "ap_active_w": 10.65,
  "ap_sleep_w": 5.05,
  "bh_traffic_w_per_gbps": 0.25,
  "bh_fixed_w": 0.825,
  "rate_floor_mc_bps_hz": 0.5,
  "rate_floor_uc_bps_hz": 0.5,
  "energy_floor_mw": 0.01,
  "power_cap_dbm": 30,
  "backhaul_cap_bps_hz": 10,
  "smooth_theta_w": 1e-5
})";
}

}  // namespace cfee
