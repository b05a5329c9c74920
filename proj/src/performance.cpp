#include "cfee/performance.hpp"

#include <cmath>
#include <limits>

namespace cfee {

namespace {
// Exact activity threshold: the indicator treats anything below this as off.
constexpr double kActiveEps = 1e-12;
}  // namespace

PowerAllocation PowerAllocation::zeros(int n, int g, int k) {
  PowerAllocation v;
  v.q = Mat::Zero(n, g);
  v.p = Mat::Zero(n, k);
  v.rho = Arr::Ones(k);
  return v;
}

double ConstraintSlacks::min_slack() const {
  double m = std::numeric_limits<double>::infinity();
  m = std::min(m, mc_rate.minCoeff());
  m = std::min(m, uc_rate.minCoeff());
  m = std::min(m, energy.minCoeff());
  m = std::min(m, backhaul.minCoeff());
  m = std::min(m, power.minCoeff());
  return m;
}

double ConstraintSlacks::penalty_sum() const {
  const auto viol = [](const Arr& s) { return (-s).max(0.0).sum(); };
  return viol(mc_rate) + viol(uc_rate) + viol(energy) + viol(backhaul);
}

double smooth_indicator(double x, double theta) { return x / (x + theta); }

double harvest(double p_in, const SystemParams& params) {
  const double d1 = std::exp(-params.eh_iota1 * params.eh_sensitivity_w + params.eh_iota2);
  const double logistic =
      (1.0 + d1) / (1.0 + std::exp(-params.eh_iota1 * p_in + params.eh_iota2));
  const double val = params.eh_max_w / d1 * (logistic - 1.0);
  return std::max(val, 0.0);
}

double harvest_inverse(double x, const SystemParams& params) {
  if (x <= 0.0) return 0.0;
  if (x >= params.eh_max_w) return std::numeric_limits<double>::infinity();
  const double d1 = std::exp(-params.eh_iota1 * params.eh_sensitivity_w + params.eh_iota2);
  const double d2 = d1 / params.eh_max_w;
  return (params.eh_iota2 - std::log((1.0 + d1) / (1.0 + d2 * x) - 1.0)) / params.eh_iota1;
}

// ---------------------------------------------------------------------------
// Interference functionals.  All are quadratic forms in the amplitudes with
// per-AP weights beta (true gain) and beta_hat (estimate variance); the
// M-weighted sums carry the conjugate-beamforming coherence bonus.
// ---------------------------------------------------------------------------
double phi_u(const ChannelStats& s, const PowerAllocation& v, int k) {
  const int gk = s.group_of[k];
  const double m = s.antennas_per_ap;
  double acc = 0.0;
  for (int j = 0; j < s.num_ues; ++j) {
    acc += (s.beta.col(k) * v.p.col(j).square()).sum();
  }
  for (int j : s.groups[gk]) {
    if (j == k) continue;
    acc += m * (s.beta_hat.col(k) * v.p.col(j).square()).sum();
  }
  for (int g = 0; g < s.num_groups; ++g) {
    acc += (s.beta.col(k) * v.q.col(g).square()).sum();
  }
  return acc + s.delta2[k] + s.sigma2[k] / v.rho[k];
}

double phi_m(const ChannelStats& s, const PowerAllocation& v, int k) {
  const int gk = s.group_of[k];
  const double m = s.antennas_per_ap;
  double acc = 0.0;
  for (int g = 0; g < s.num_groups; ++g) {
    acc += (s.beta.col(k) * v.q.col(g).square()).sum();
  }
  for (int j = 0; j < s.num_ues; ++j) {
    acc += (s.beta.col(k) * v.p.col(j).square()).sum();
  }
  for (int j : s.groups[gk]) {
    acc += m * (s.beta_hat.col(k) * v.p.col(j).square()).sum();
  }
  return acc + s.delta2[k] + s.sigma2[k] / v.rho[k];
}

double phi_e(const ChannelStats& s, const PowerAllocation& v, int k) {
  const int gk = s.group_of[k];
  const double m = s.antennas_per_ap;
  double acc = 0.0;
  for (int g = 0; g < s.num_groups; ++g) {
    acc += (s.beta.col(k) * v.q.col(g).square()).sum();
  }
  acc += m * (s.beta_hat.col(k) * v.q.col(gk).square()).sum();
  for (int j = 0; j < s.num_ues; ++j) {
    acc += (s.beta.col(k) * v.p.col(j).square()).sum();
  }
  for (int j : s.groups[gk]) {
    acc += m * (s.beta_hat.col(k) * v.p.col(j).square()).sum();
  }
  return acc + s.delta2[k];
}

double unicast_rate(const ChannelStats& s, const PowerAllocation& v, int k) {
  if (!(v.rho[k] > 0)) throw std::domain_error("unicast_rate: rho must be positive");
  const double num = (s.sqrt_beta_hat.col(k) * v.p.col(k)).sum();
  return std::log1p(s.antennas_per_ap * num * num / phi_u(s, v, k));
}

double multicast_rate_ue(const ChannelStats& s, const PowerAllocation& v, int k) {
  if (!(v.rho[k] > 0)) throw std::domain_error("multicast_rate: rho must be positive");
  const double num = (s.sqrt_beta_hat.col(k) * v.q.col(s.group_of[k])).sum();
  return std::log1p(s.antennas_per_ap * num * num / phi_m(s, v, k));
}

std::pair<double, Arr> multicast_rate(const ChannelStats& s, const PowerAllocation& v, int g) {
  const auto& members = s.groups[g];
  Arr rates(static_cast<int>(members.size()));
  for (std::size_t i = 0; i < members.size(); ++i) {
    rates[static_cast<int>(i)] = multicast_rate_ue(s, v, members[i]);
  }
  // min over members; Eigen's minCoeff picks the first minimum, which is the
  // lowest UE index under the round-robin ordering.
  return {rates.minCoeff(), rates};
}

double received_rf_power(const ChannelStats& s, const PowerAllocation& v, int k) {
  return (1.0 - v.rho[k]) * phi_e(s, v, k);
}

Arr ap_transmit_power(const PowerAllocation& v) {
  return v.q.square().rowwise().sum() + v.p.square().rowwise().sum();
}

double backhaul_load(const ChannelStats& s, const SystemParams& params,
                     const PowerAllocation& v, int n, bool use_smooth) {
  double load = 0.0;
  for (int g = 0; g < s.num_groups; ++g) {
    const double x = v.q(n, g) * v.q(n, g);
    const double ind = use_smooth ? smooth_indicator(x, params.smooth_theta_w)
                                  : (x > kActiveEps ? 1.0 : 0.0);
    if (ind > 0.0) load += ind * multicast_rate(s, v, g).first;
  }
  for (int k = 0; k < s.num_ues; ++k) {
    const double x = v.p(n, k) * v.p(n, k);
    const double ind = use_smooth ? smooth_indicator(x, params.smooth_theta_w)
                                  : (x > kActiveEps ? 1.0 : 0.0);
    if (ind > 0.0) load += ind * unicast_rate(s, v, k);
  }
  return load;
}

double total_power(const ChannelStats& s, const SystemParams& params,
                   const PowerAllocation& v, bool use_smooth) {
  const Arr p_tr = ap_transmit_power(v);
  double total = 0.0;
  for (int n = 0; n < params.num_aps; ++n) {
    const double ind = use_smooth ? smooth_indicator(p_tr[n], params.smooth_theta_w)
                                  : (p_tr[n] > kActiveEps ? 1.0 : 0.0);
    total += params.ap_sleep_w + p_tr[n] / params.pa_efficiency[n] + ind * params.delta_p(n);
    total += params.bh_w_per_nats() * backhaul_load(s, params, v, n, use_smooth) +
             params.bh_fixed_w;
  }
  return total;
}

PerfReport evaluate(const ChannelStats& s, const SystemParams& params,
                    const PowerAllocation& v) {
  PerfReport r;
  const int n_ue = s.num_ues;
  const int n_gr = s.num_groups;
  const int n_ap = s.num_aps;

  r.r_unicast.resize(n_ue);
  r.r_multicast_ue.resize(n_ue);
  r.phi_e.resize(n_ue);
  r.p_in.resize(n_ue);
  r.harvested.resize(n_ue);
  for (int k = 0; k < n_ue; ++k) {
    r.r_unicast[k] = unicast_rate(s, v, k);
    r.r_multicast_ue[k] = multicast_rate_ue(s, v, k);
    r.phi_e[k] = phi_e(s, v, k);
    r.p_in[k] = (1.0 - v.rho[k]) * r.phi_e[k];
    r.harvested[k] = harvest(r.p_in[k], params);
  }
  r.r_multicast.resize(n_gr);
  for (int g = 0; g < n_gr; ++g) {
    double m = std::numeric_limits<double>::infinity();
    for (int k : s.groups[g]) m = std::min(m, r.r_multicast_ue[k]);
    r.r_multicast[g] = m;
  }
  r.c_bh.resize(n_ap);
  r.c_bh_smooth.resize(n_ap);
  for (int n = 0; n < n_ap; ++n) {
    r.c_bh[n] = backhaul_load(s, params, v, n, false);
    r.c_bh_smooth[n] = backhaul_load(s, params, v, n, true);
  }
  r.p_tr = ap_transmit_power(v);
  r.p_total = total_power(s, params, v, false);
  r.p_total_smooth = total_power(s, params, v, true);
  r.sum_rate_nats = r.r_multicast.sum() + r.r_unicast.sum();
  const double scale = params.bandwidth_hz * params.prelog() / M_LN2;
  r.ee_bits_per_joule = scale * r.sum_rate_nats / r.p_total;
  r.ee_smooth_bits_per_joule = scale * r.sum_rate_nats / r.p_total_smooth;
  r.rho = v.rho;
  r.group_of = s.group_of;
  return r;
}

ConstraintSlacks check_constraints(const PerfReport& report, const SystemParams& params) {
  ConstraintSlacks c;
  const int n_ue = static_cast<int>(report.r_unicast.size());
  c.mc_rate.resize(n_ue);
  c.uc_rate.resize(n_ue);
  c.energy.resize(n_ue);
  for (int k = 0; k < n_ue; ++k) {
    const int g = report.group_of[k];
    c.mc_rate[k] = report.r_multicast_ue[k] - params.rate_floor_mc_nats[g];
    c.uc_rate[k] = report.r_unicast[k] - params.rate_floor_uc_nats[k];
    const double need = harvest_inverse(params.energy_floor_w[k], params);
    double required = 0.0;
    if (need > 0.0) {
      required = report.rho[k] < 1.0 ? need / (1.0 - report.rho[k])
                                     : std::numeric_limits<double>::infinity();
    }
    c.energy[k] = report.phi_e[k] - required;
  }
  c.backhaul = params.backhaul_cap_nats - report.c_bh;
  c.power = params.power_cap_w - report.p_tr;
  return c;
}

}  // namespace cfee
