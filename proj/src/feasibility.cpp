#include "cfee/feasibility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace cfee {

namespace {

[[nodiscard]] double hinge(double x) { return x > 0.0 ? x : 0.0; }

/// Energy-binding splitter for the current amplitudes: the largest share the
/// decoder can take while the harvester still meets its floor.
void bind_splitters(const ChannelStats& stats, const SystemParams& params,
                    PowerAllocation& v) {
  for (int k = 0; k < stats.num_ues; ++k) {
    const double finv = harvest_inverse(params.energy_floor_w[k], params);
    if (finv <= 0.0) {
      v.rho[k] = 1.0 - 1e-6;
    } else {
      v.rho[k] = std::clamp(1.0 - finv / phi_e(stats, v, k), 1e-6, 1.0 - 1e-6);
    }
  }
}

}  // namespace

void sparsify_streams(PowerAllocation& v, double theta_w) {
  v.q = (v.q.square() < theta_w).select(0.0, v.q);
  v.p = (v.p.square() < theta_w).select(0.0, v.p);
}

double penalty(const ChannelStats& stats, const SystemParams& params,
               const PowerAllocation& v, bool use_smooth_backhaul) {
  double h = 0.0;
  for (int k = 0; k < stats.num_ues; ++k) {
    const int gk = stats.group_of[k];
    h += hinge(params.rate_floor_mc_nats[gk] - multicast_rate_ue(stats, v, k));
    h += hinge(params.rate_floor_uc_nats[k] - unicast_rate(stats, v, k));
    const double finv = harvest_inverse(params.energy_floor_w[k], params);
    if (finv > 0.0) {
      h += hinge(finv / (1.0 - v.rho[k]) - phi_e(stats, v, k));
    }
  }
  for (int n = 0; n < stats.num_aps; ++n) {
    h += hinge(backhaul_load(stats, params, v, n, use_smooth_backhaul) -
               params.backhaul_cap_nats[n]);
  }
  return h;
}

double penalty_surrogate(const SurrogateCoeffs& c, const PowerAllocation& v) {
  const ChannelStats& s = c.stats;
  double h = 0.0;
  for (int k = 0; k < s.num_ues; ++k) {
    const int gk = s.group_of[k];
    h += hinge(c.params.rate_floor_mc_nats[gk] - surrogate_multicast_rate_ue(c, v, k));
    h += hinge(c.params.rate_floor_uc_nats[k] - surrogate_unicast_rate(c, v, k));
    const double finv = harvest_inverse(c.params.energy_floor_w[k], c.params);
    if (finv > 0.0) {
      h += hinge(finv / (1.0 - v.rho[k]) - surrogate_energy_phi(c, v, k));
    }
  }
  for (int n = 0; n < s.num_aps; ++n) {
    h += hinge(surrogate_backhaul(c, v, n) - c.params.backhaul_cap_nats[n]);
  }
  return h;
}

PenaltyGrad penalty_subgradient(const SurrogateCoeffs& c, const PowerAllocation& v) {
  const ChannelStats& s = c.stats;
  const int n_aps = s.num_aps;
  const int n_ues = s.num_ues;
  const int n_groups = s.num_groups;
  const double m = static_cast<double>(s.antennas_per_ap);

  PenaltyGrad grad;
  grad.q = Mat::Zero(n_aps, n_groups);
  grad.p = Mat::Zero(n_aps, n_ues);
  grad.rho = Arr::Zero(n_ues);

  for (int k = 0; k < n_ues; ++k) {
    const int gk = s.group_of[k];
    const double inv_rho2 = 1.0 / (v.rho[k] * v.rho[k]);

    if (c.params.rate_floor_mc_nats[gk] - surrogate_multicast_rate_ue(c, v, k) > 0.0) {
      const double cw = 2.0 * c.curv_m[k];
      for (int g = 0; g < n_groups; ++g) {
        grad.q.col(g) += cw * (s.beta.col(k) * v.q.col(g));
      }
      const double amp = (s.sqrt_beta_hat.col(k) * v.q.col(gk)).sum();
      grad.q.col(gk) += -2.0 * c.psi_m.col(k) + cw * m * amp * s.sqrt_beta_hat.col(k);
      for (int j = 0; j < n_ues; ++j) {
        grad.p.col(j) += cw * (s.beta.col(k) * v.p.col(j));
        if (s.group_of[j] == gk) {
          grad.p.col(j) += cw * m * (s.beta_hat.col(k) * v.p.col(j));
        }
      }
      grad.rho[k] -= c.curv_m[k] * s.sigma2[k] * inv_rho2;
    }

    if (c.params.rate_floor_uc_nats[k] - surrogate_unicast_rate(c, v, k) > 0.0) {
      const double cw = 2.0 * c.curv_u[k];
      for (int g = 0; g < n_groups; ++g) {
        grad.q.col(g) += cw * (s.beta.col(k) * v.q.col(g));
      }
      for (int j = 0; j < n_ues; ++j) {
        grad.p.col(j) += cw * (s.beta.col(k) * v.p.col(j));
        if (s.group_of[j] == gk && j != k) {
          grad.p.col(j) += cw * m * (s.beta_hat.col(k) * v.p.col(j));
        }
      }
      const double amp = (s.sqrt_beta_hat.col(k) * v.p.col(k)).sum();
      grad.p.col(k) += -2.0 * c.psi_u.col(k) + cw * m * amp * s.sqrt_beta_hat.col(k);
      grad.rho[k] -= c.curv_u[k] * s.sigma2[k] * inv_rho2;
    }

    const double finv = harvest_inverse(c.params.energy_floor_w[k], c.params);
    if (finv > 0.0 &&
        finv / (1.0 - v.rho[k]) - surrogate_energy_phi(c, v, k) > 0.0) {
      for (int g = 0; g < n_groups; ++g) {
        grad.q.col(g) -= 2.0 * c.energy_q[k].col(g);
      }
      for (int j = 0; j < n_ues; ++j) {
        grad.p.col(j) -= 2.0 * c.energy_p[k].col(j);
      }
      const double one_minus = 1.0 - v.rho[k];
      grad.rho[k] += finv / (one_minus * one_minus);
    }
  }

  for (int n = 0; n < n_aps; ++n) {
    if (surrogate_backhaul(c, v, n) - c.params.backhaul_cap_nats[n] > 0.0) {
      for (int g = 0; g < n_groups; ++g) {
        grad.q(n, g) += c.rate_m0[g] * c.ind_slope_m(n, g);
      }
      for (int j = 0; j < n_ues; ++j) {
        grad.p(n, j) += c.rate_u0[j] * c.ind_slope_u(n, j);
      }
    }
  }
  return grad;
}

void project_power(PowerAllocation& v, const SystemParams& params) {
  v.q = v.q.max(0.0);
  v.p = v.p.max(0.0);
  const Arr load = ap_transmit_power(v);
  for (int n = 0; n < static_cast<int>(load.size()); ++n) {
    if (load[n] > params.power_cap_w[n]) {
      const double scale = std::sqrt(params.power_cap_w[n] / load[n]);
      v.q.row(n) *= scale;
      v.p.row(n) *= scale;
    }
  }
  v.rho = v.rho.max(1e-6).min(1.0 - 1e-6);
}

FeasibilityResult find_feasible(const ChannelStats& stats, const SystemParams& params,
                                const FeasibilityOptions& opts) {
  const int n_aps = stats.num_aps;
  const int n_ues = stats.num_ues;
  const int n_groups = stats.num_groups;
  const double m = static_cast<double>(stats.antennas_per_ap);

  FeasibilityResult res;

  // Uniform full-power start: every AP splits its cap evenly over all streams.
  PowerAllocation v;
  v.q.resize(n_aps, n_groups);
  v.p.resize(n_aps, n_ues);
  v.rho = Arr::Constant(n_ues, 1.0 - 1e-6);
  for (int n = 0; n < n_aps; ++n) {
    const double amp =
        std::sqrt(params.power_cap_w[n] / static_cast<double>(n_groups + n_ues));
    v.q.row(n) = amp;
    v.p.row(n) = amp;
  }

  // Energy-binding splitters; a UE whose floor exceeds its full-power
  // received RF power cannot be served from this start at all.
  for (int k = 0; k < n_ues; ++k) {
    const double finv = harvest_inverse(params.energy_floor_w[k], params);
    if (finv <= 0.0) continue;
    if (1.0 - finv / phi_e(stats, v, k) <= 0.0) {
      res.status = FeasibilityStatus::provably_infeasible;
      res.infeasible_ue = k;
      bind_splitters(stats, params, v);
      res.alloc = v;
      res.report = evaluate(stats, params, v);
      return res;
    }
  }
  bind_splitters(stats, params, v);

  std::mt19937_64 rng(opts.seed);
  PowerAllocation best_overall = v;
  double best_exact = std::numeric_limits<double>::infinity();
  double best_prev = std::numeric_limits<double>::infinity();
  int stalled_rounds = 0;

  for (int outer = 1; outer <= opts.max_outer; ++outer) {
    res.outer_iterations = outer;
    const SurrogateCoeffs c = build_surrogate(stats, params, v);

    PowerAllocation cur = v;
    PowerAllocation best = cur;
    double best_h = penalty_surrogate(c, cur);
    double window_ref = best_h;
    for (int s_it = 1; s_it <= opts.max_inner && best_h > 0.0; ++s_it) {
      const PenaltyGrad g = penalty_subgradient(c, cur);
      const double nu = 2.0 / (m * std::sqrt(static_cast<double>(s_it)));
      cur.q -= nu * g.q;
      cur.p -= nu * g.p;
      cur.rho -= nu * g.rho;
      project_power(cur, params);
      const double h = penalty_surrogate(c, cur);
      if (h < best_h) {
        best_h = h;
        best = cur;
      }
      if (s_it % opts.window == 0) {
        if (window_ref - best_h <
            opts.tol_improve * std::max(window_ref, 1e-300)) {
          break;
        }
        window_ref = best_h;
      }
    }
    v = best;

    // Refine the inner solution by the exact penalty: rebind the splitters
    // (energy exactly tight, splits as large as the floors allow) and snap
    // indicator-scale streams to zero -- the smooth backhaul model already
    // discounted those streams to almost nothing while the exact stream count
    // charges them in full. Keep whichever point violates least.
    {
      PowerAllocation bound = v;
      bind_splitters(stats, params, bound);
      PowerAllocation snapped = bound;
      sparsify_streams(snapped, params.smooth_theta_w);
      bind_splitters(stats, params, snapped);
      const double hv = penalty(stats, params, v, false);
      const double hb = penalty(stats, params, bound, false);
      const double hs = penalty(stats, params, snapped, false);
      if (hs <= hb && hs <= hv) {
        v = snapped;
      } else if (hb <= hv) {
        v = bound;
      }
    }

    const double h_exact = penalty(stats, params, v, false);
    res.h_trace.push_back(h_exact);
    if (h_exact < best_exact) {
      best_exact = h_exact;
      best_overall = v;
    }
    const PerfReport rep = evaluate(stats, params, v);
    if (h_exact < 1e-8 && check_constraints(rep, params).min_slack() >= -1e-10) {
      res.status = FeasibilityStatus::feasible;
      res.alloc = v;
      res.report = rep;
      return res;
    }

    // A stall means the best exact penalty stopped improving for two
    // consecutive rebuilds; single flat rounds are normal while the tangents
    // re-center after a snap.
    if (best_prev - best_exact <
        opts.tol_improve * std::max(best_prev, 1e-300)) {
      ++stalled_rounds;
    } else {
      stalled_rounds = 0;
    }
    best_prev = best_exact;
    if (stalled_rounds >= 2) {
      if (res.restarts >= opts.max_restarts) break;
      ++res.restarts;
      stalled_rounds = 0;
      v = best_overall;
      std::uniform_real_distribution<double> u(std::log(1.0 - opts.jitter),
                                               std::log(1.0 + opts.jitter));
      for (int n = 0; n < n_aps; ++n) {
        for (int g = 0; g < n_groups; ++g) v.q(n, g) *= std::exp(u(rng));
        for (int k = 0; k < n_ues; ++k) v.p(n, k) *= std::exp(u(rng));
      }
      project_power(v, params);
      bind_splitters(stats, params, v);
      best_prev = std::numeric_limits<double>::infinity();
      continue;
    }
  }

  res.status = FeasibilityStatus::stationary;
  res.alloc = best_overall;
  res.report = evaluate(stats, params, best_overall);
  return res;
}

}  // namespace cfee
