#include "cfee/surrogate.hpp"

#include <cassert>
#include <cmath>

namespace cfee {

namespace {

/// Tangent of f_theta(a^2) in amplitude space at a0 >= 0: returns
/// (slope, intercept) with f_theta(a^2) <= intercept + slope * a for a >= 0
/// whenever a0^2 >= theta (interior expansion; see build_surrogate).
struct Tangent {
  double slope = 0;
  double intercept = 0;
};

[[nodiscard]] Tangent indicator_tangent(double a0, double theta) {
  const double x0 = a0 * a0;
  Tangent t;
  t.slope = 2.0 * theta * a0 / ((x0 + theta) * (x0 + theta));
  t.intercept = x0 / (x0 + theta) - t.slope * a0;
  return t;
}

}  // namespace

SurrogateCoeffs build_surrogate(const ChannelStats& stats, const SystemParams& params,
                                const PowerAllocation& v_t) {
  SurrogateCoeffs c;
  c.stats = stats;
  c.params = params;
  c.v0.q = v_t.q.max(0.0);
  c.v0.p = v_t.p.max(0.0);
  c.v0.rho = v_t.rho.min(1.0 - 1e-6).max(1e-6);

  const int n_ap = stats.num_aps;
  const int n_ue = stats.num_ues;
  const int n_gr = stats.num_groups;
  const double m = stats.antennas_per_ap;
  const double theta = params.smooth_theta_w;

  c.zeta_m.resize(n_ue);
  c.curv_m.resize(n_ue);
  c.psi_m.resize(n_ap, n_ue);
  c.zeta_u.resize(n_ue);
  c.curv_u.resize(n_ue);
  c.psi_u.resize(n_ap, n_ue);
  c.zeta_e.resize(n_ue);
  c.energy_q.resize(n_ue);
  c.energy_p.resize(n_ue);

  for (int k = 0; k < n_ue; ++k) {
    const int gk = stats.group_of[k];

    // Multicast bound: numerator sqrt M * (xi_hat . q), denominator phi_m.
    {
      const double num = (stats.sqrt_beta_hat.col(k) * c.v0.q.col(gk)).sum();
      const double sig = m * num * num;
      const double den = phi_m(stats, c.v0, k);
      assert(den > 0.0);
      c.zeta_m[k] = std::log1p(sig / den) - sig / den;
      c.curv_m[k] = sig / (den * (den + sig));
      c.psi_m.col(k) = m * num * stats.sqrt_beta_hat.col(k) / den;
    }
    // Unicast bound, same construction with p and phi_u.
    {
      const double num = (stats.sqrt_beta_hat.col(k) * c.v0.p.col(k)).sum();
      const double sig = m * num * num;
      const double den = phi_u(stats, c.v0, k);
      assert(den > 0.0);
      c.zeta_u[k] = std::log1p(sig / den) - sig / den;
      c.curv_u[k] = sig / (den * (den + sig));
      c.psi_u.col(k) = m * num * stats.sqrt_beta_hat.col(k) / den;
    }
    // Energy bound: gradient plane of the convex quadratic part of phi_e.
    c.energy_q[k].resize(n_ap, n_gr);
    for (int g = 0; g < n_gr; ++g) {
      Arr w = stats.beta.col(k);
      if (g == gk) w += m * stats.beta_hat.col(k);
      c.energy_q[k].col(g) = w * c.v0.q.col(g);
    }
    c.energy_p[k].resize(n_ap, n_ue);
    for (int j = 0; j < n_ue; ++j) {
      Arr w = stats.beta.col(k);
      if (stats.group_of[j] == gk) w += m * stats.beta_hat.col(k);
      c.energy_p[k].col(j) = w * c.v0.p.col(j);
    }
    c.zeta_e[k] = 2.0 * stats.delta2[k] - phi_e(stats, c.v0, k);
  }

  // Stream and AP activity tangents.
  c.ind_slope_m.resize(n_ap, n_gr);
  c.ind_h_m.resize(n_ap, n_gr);
  c.ind_slope_u.resize(n_ap, n_ue);
  c.ind_h_u.resize(n_ap, n_ue);
  c.act_slope_m.resize(n_ap, n_gr);
  c.act_slope_u.resize(n_ap, n_ue);
  c.act_h.resize(n_ap);
  const Arr p_tr0 = ap_transmit_power(c.v0);
  for (int n = 0; n < n_ap; ++n) {
    const double denom = (p_tr0[n] + theta) * (p_tr0[n] + theta);
    double linear_at_v0 = 0.0;
    for (int g = 0; g < n_gr; ++g) {
      const Tangent t = indicator_tangent(c.v0.q(n, g), theta);
      c.ind_slope_m(n, g) = t.slope;
      c.ind_h_m(n, g) = t.intercept;
      c.act_slope_m(n, g) = 2.0 * theta * c.v0.q(n, g) / denom;
      linear_at_v0 += c.act_slope_m(n, g) * c.v0.q(n, g);
    }
    for (int k = 0; k < n_ue; ++k) {
      const Tangent t = indicator_tangent(c.v0.p(n, k), theta);
      c.ind_slope_u(n, k) = t.slope;
      c.ind_h_u(n, k) = t.intercept;
      c.act_slope_u(n, k) = 2.0 * theta * c.v0.p(n, k) / denom;
      linear_at_v0 += c.act_slope_u(n, k) * c.v0.p(n, k);
    }
    c.act_h[n] = smooth_indicator(p_tr0[n], theta) - linear_at_v0;
  }

  // Frozen rates.
  c.rate_u0.resize(n_ue);
  for (int k = 0; k < n_ue; ++k) c.rate_u0[k] = unicast_rate(stats, c.v0, k);
  c.rate_m0.resize(n_gr);
  for (int g = 0; g < n_gr; ++g) c.rate_m0[g] = multicast_rate(stats, c.v0, g).first;
  return c;
}

double surrogate_unicast_rate(const SurrogateCoeffs& c, const PowerAllocation& v, int k) {
  const double num = (c.stats.sqrt_beta_hat.col(k) * v.p.col(k)).sum();
  const double quad = phi_u(c.stats, v, k) + c.stats.antennas_per_ap * num * num;
  return c.zeta_u[k] + 2.0 * (c.psi_u.col(k) * v.p.col(k)).sum() - c.curv_u[k] * quad;
}

double surrogate_multicast_rate_ue(const SurrogateCoeffs& c, const PowerAllocation& v,
                                   int k) {
  const int gk = c.stats.group_of[k];
  const double num = (c.stats.sqrt_beta_hat.col(k) * v.q.col(gk)).sum();
  const double quad = phi_m(c.stats, v, k) + c.stats.antennas_per_ap * num * num;
  return c.zeta_m[k] + 2.0 * (c.psi_m.col(k) * v.q.col(gk)).sum() - c.curv_m[k] * quad;
}

double surrogate_energy_phi(const SurrogateCoeffs& c, const PowerAllocation& v, int k) {
  return c.zeta_e[k] +
         2.0 * ((c.energy_q[k] * v.q).sum() + (c.energy_p[k] * v.p).sum());
}

double surrogate_backhaul(const SurrogateCoeffs& c, const PowerAllocation& v, int n) {
  double load = 0.0;
  for (int g = 0; g < c.stats.num_groups; ++g) {
    load += c.rate_m0[g] * (c.ind_h_m(n, g) + c.ind_slope_m(n, g) * v.q(n, g));
  }
  for (int k = 0; k < c.stats.num_ues; ++k) {
    load += c.rate_u0[k] * (c.ind_h_u(n, k) + c.ind_slope_u(n, k) * v.p(n, k));
  }
  return load;
}

double surrogate_total_power(const SurrogateCoeffs& c, const PowerAllocation& v) {
  const Arr p_tr = ap_transmit_power(v);
  double total = 0.0;
  for (int n = 0; n < c.stats.num_aps; ++n) {
    double act = c.act_h[n];
    for (int g = 0; g < c.stats.num_groups; ++g) act += c.act_slope_m(n, g) * v.q(n, g);
    for (int k = 0; k < c.stats.num_ues; ++k) act += c.act_slope_u(n, k) * v.p(n, k);
    total += c.params.ap_sleep_w + p_tr[n] / c.params.pa_efficiency[n] +
             act * c.params.delta_p(n);
    total += c.params.bh_w_per_nats() * surrogate_backhaul(c, v, n) + c.params.bh_fixed_w;
  }
  return total;
}

}  // namespace cfee
