#include "cfee/ee_solver.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "cfee/feasibility.hpp"

namespace cfee {

namespace {

constexpr double kRhoCap = 1.0 - 1e-9;

using FamilyPtr = Arr DualState::*;
using GradPtr = Arr DualGradient::*;

constexpr std::array<FamilyPtr, 6> kMultipliers = {
    &DualState::lambda_m, &DualState::lambda_m_bar, &DualState::lambda_u,
    &DualState::lambda_e, &DualState::lambda_c,     &DualState::lambda_p};
constexpr std::array<FamilyPtr, 6> kShadows = {
    &DualState::shadow_m, &DualState::shadow_m_bar, &DualState::shadow_u,
    &DualState::shadow_e, &DualState::shadow_c,     &DualState::shadow_p};
constexpr std::array<GradPtr, 6> kGrads = {
    &DualGradient::d_m, &DualGradient::d_m_bar, &DualGradient::d_u,
    &DualGradient::d_e, &DualGradient::d_c,     &DualGradient::d_p};

[[nodiscard]] Arr unicast_bounds(const SurrogateCoeffs& c, const PowerAllocation& v) {
  Arr r(c.stats.num_ues);
  for (int k = 0; k < c.stats.num_ues; ++k) r[k] = surrogate_unicast_rate(c, v, k);
  return r;
}

[[nodiscard]] Arr multicast_bounds(const SurrogateCoeffs& c, const PowerAllocation& v) {
  Arr r(c.stats.num_ues);
  for (int k = 0; k < c.stats.num_ues; ++k) r[k] = surrogate_multicast_rate_ue(c, v, k);
  return r;
}

[[nodiscard]] Arr group_min(const ChannelStats& s, const Arr& per_ue) {
  Arr out(s.num_groups);
  for (int g = 0; g < s.num_groups; ++g) {
    double m = std::numeric_limits<double>::infinity();
    for (int k : s.groups[g]) m = std::min(m, per_ue[k]);
    out[g] = m;
  }
  return out;
}

/// chi weights of the splitter/interference quadratics:
/// chi_u = (eta' + lambda_u) curv_u, chi_m = lambda_m_bar curv_m.
struct ChiWeights {
  Arr u, m;
};

[[nodiscard]] ChiWeights chi_weights(const SurrogateCoeffs& c, const DualState& d) {
  const double ep = d.eta * c.params.prelog();
  ChiWeights w;
  w.u = (ep + d.lambda_u) * c.curv_u;
  w.m = d.lambda_m_bar * c.curv_m;
  return w;
}

/// The energy multipliers live 3-6 orders of magnitude below every other
/// family (their constraint is W-scale with sigma^2 ~ 4e-14 W), and the dual
/// has square-root geometry in them near zero, so a fixed-step ascent on this
/// family alone oscillates over many decades.  At frozen stream amplitudes
/// the dual is concave in each lambda_e,k alone with the closed maximizer
///   target_k = chi_k sigma_k^2 Finv / (E_k - Finv)^2,
/// where E_k is the harvest bound, and the splitter it induces makes the
/// energy slack vanish identically.  The amplitudes recovered at the next
/// iterate move E_k with lambda_e,k (the energy pull), and that composed map
/// is monotone decreasing with unbounded log-slope near a binding floor, so
/// no fixed relaxation of it is stable.  It is, however, a one-dimensional
/// root per UE: each refresh records on which side of the root the current
/// multiplier sits, bisects once both sides are known, and otherwise slides
/// toward the target by at most a factor 4.  A collapsed bracket means the
/// root has drifted outside, so the stale side is dropped and the slide
/// resumes.
void refresh_energy_multipliers(const SurrogateCoeffs& c, const PowerAllocation& v_prev,
                                DualState& d) {
  constexpr double kMaxLogMove = 1.3862943611198906;  // ln 4
  constexpr double kUnknown = 1e300;
  const ChiWeights w = chi_weights(c, d);
  for (int k = 0; k < c.stats.num_ues; ++k) {
    const double finv = harvest_inverse(c.params.energy_floor_w[k], c.params);
    if (finv <= 0.0) {
      d.lambda_e[k] = 0.0;
      d.shadow_e[k] = 0.0;
      continue;
    }
    const double a = (w.u[k] + w.m[k]) * c.stats.sigma2[k];
    const double den = surrogate_energy_phi(c, v_prev, k) - finv;
    double& lo = d.bracket_lo_e[k];
    double& hi = d.bracket_hi_e[k];
    if (den > 0.0 && a > 0.0) {
      const double target = a * finv / (den * den);
      if (d.lambda_e[k] <= 0.0) {
        d.lambda_e[k] = target;  // entering from zero: land on the block maximizer
        d.shadow_e[k] = target;
        continue;
      }
      const double x = std::log(d.lambda_e[k]);
      const double gap = std::log(target) - x;
      if (gap > 0.0) {
        lo = x;
        if (hi - lo < 1e-12) hi = kUnknown;
      } else if (gap < 0.0) {
        hi = x;
        if (hi - lo < 1e-12) lo = -kUnknown;
      }
      const double x_next = (lo > -kUnknown && hi < kUnknown)
                                ? 0.5 * (lo + hi)
                                : x + std::clamp(gap, -kMaxLogMove, kMaxLogMove);
      d.lambda_e[k] = std::exp(x_next);
    } else {
      // even the full harvest misses the floor: the multiplier must climb
      // until its amplitude pull lifts the bound above the requirement.
      if (d.lambda_e[k] > 0.0) {
        lo = std::log(d.lambda_e[k]);
        if (hi - lo < 1e-12) hi = kUnknown;
      }
      d.lambda_e[k] = hi < kUnknown ? std::exp(0.5 * (lo + hi))
                                    : std::max(4.0 * d.lambda_e[k], 1e-8);
    }
    d.shadow_e[k] = d.lambda_e[k];
  }
}

/// Minimize 1/2 x' A x - b' x over x >= 0 for positive-definite A: block
/// principal pivoting on the bound's active set, degrading to single
/// least-index pivots (finite by Murty's rule) if a block flip ever cycles.
/// The free minimizer is the fast path; it is exact whenever it lands in the
/// orthant, which is the common case away from binding stream-activity caps.
[[nodiscard]] Eigen::VectorXd solve_nonneg_quadratic(const Eigen::MatrixXd& A,
                                                     const Eigen::VectorXd& b) {
  const int n = static_cast<int>(A.rows());
  Eigen::VectorXd x = A.llt().solve(b);
  if ((x.array() >= 0.0).all()) return x;
  const double tol =
      1e-11 * (1.0 + b.cwiseAbs().maxCoeff() / A.diagonal().minCoeff());
  std::vector<bool> passive(n);
  for (int i = 0; i < n; ++i) passive[i] = x[i] > 0.0;
  int block_credit = 3;
  int last_bad = n + 1;
  for (int round = 0; round < 20 * n + 40; ++round) {
    std::vector<int> idx;
    idx.reserve(n);
    for (int i = 0; i < n; ++i) {
      if (passive[i]) idx.push_back(i);
    }
    x.setZero();
    if (!idx.empty()) {
      const int m = static_cast<int>(idx.size());
      Eigen::MatrixXd Ar(m, m);
      Eigen::VectorXd br(m);
      for (int r = 0; r < m; ++r) {
        br[r] = b[idx[r]];
        for (int s = 0; s < m; ++s) Ar(r, s) = A(idx[r], idx[s]);
      }
      const Eigen::VectorXd xr = Ar.llt().solve(br);
      for (int r = 0; r < m; ++r) x[idx[r]] = xr[r];
    }
    const Eigen::VectorXd grad = A * x - b;
    std::vector<int> flips;
    for (int i = 0; i < n; ++i) {
      if (passive[i] ? x[i] < -tol : grad[i] < -tol) flips.push_back(i);
    }
    if (flips.empty()) return x.cwiseMax(0.0);
    const int bad = static_cast<int>(flips.size());
    if (bad < last_bad) {
      last_bad = bad;
      block_credit = 3;
    } else if (block_credit > 0) {
      --block_credit;
    } else {
      flips.resize(1);  // least-index single pivot: finite termination
    }
    for (int i : flips) passive[i] = !passive[i];
  }
  return x.cwiseMax(0.0);
}

}  // namespace

DualState make_initial_dual(const SurrogateCoeffs& c, double eta) {
  const ChannelStats& s = c.stats;
  DualState d;
  d.eta = eta;
  d.lambda_m = Arr::Zero(s.num_groups);
  d.lambda_m_bar = Arr::Zero(s.num_ues);
  const double ep = eta * c.params.prelog();
  for (int g = 0; g < s.num_groups; ++g) {
    for (int k : s.groups[g]) {
      d.lambda_m_bar[k] = ep / static_cast<double>(s.groups[g].size());
    }
  }
  d.lambda_u = Arr::Zero(s.num_ues);
  d.lambda_e = Arr::Zero(s.num_ues);
  d.lambda_c = Arr::Zero(s.num_aps);
  d.lambda_p = Arr::Zero(s.num_aps);
  for (std::size_t i = 0; i < kMultipliers.size(); ++i) d.*kShadows[i] = d.*kMultipliers[i];
  d.pi = 1.0;
  d.bracket_lo_e = Arr::Constant(s.num_ues, -1e300);
  d.bracket_hi_e = Arr::Constant(s.num_ues, 1e300);
  return d;
}

namespace {

PowerAllocation recover_primal_impl(const SurrogateCoeffs& c,
                                    const DualState& d, bool bounded) {
  const ChannelStats& s = c.stats;
  const int n_aps = s.num_aps;
  const int n_ues = s.num_ues;
  const int n_groups = s.num_groups;
  const double m = static_cast<double>(s.antennas_per_ap);
  const double ep = d.eta * c.params.prelog();
  const double pbh = c.params.bh_w_per_nats();

  const ChiWeights w = chi_weights(c, d);
  const Arr chi = w.u + w.m;

  Arr diag_base = 1.0 / c.params.pa_efficiency + d.lambda_p;
  for (int j = 0; j < n_ues; ++j) diag_base += chi[j] * s.beta.col(j);

  Mat eq_pull = Mat::Zero(n_aps, n_groups);
  Mat ep_pull = Mat::Zero(n_aps, n_ues);
  for (int j = 0; j < n_ues; ++j) {
    if (d.lambda_e[j] > 0.0) {
      eq_pull += d.lambda_e[j] * c.energy_q[j];
      ep_pull += d.lambda_e[j] * c.energy_p[j];
    }
  }

  PowerAllocation v;
  v.q.resize(n_aps, n_groups);
  v.p.resize(n_aps, n_ues);
  v.rho.resize(n_ues);

  for (int g = 0; g < n_groups; ++g) {
    Eigen::MatrixXd A = (2.0 * diag_base).matrix().asDiagonal();
    Eigen::VectorXd a = 2.0 * eq_pull.col(g).matrix();
    for (int j : s.groups[g]) {
      const Eigen::VectorXd xi = s.sqrt_beta_hat.col(j).matrix();
      A.noalias() += (2.0 * m * w.m[j]) * (xi * xi.transpose());
      a += 2.0 * d.lambda_m_bar[j] * c.psi_m.col(j).matrix();
    }
    for (int n = 0; n < n_aps; ++n) {
      a[n] -= c.params.delta_p(n) * c.act_slope_m(n, g) +
              (pbh + d.lambda_c[n]) * c.rate_m0[g] * c.ind_slope_m(n, g);
    }
    if (bounded) {
      v.q.col(g) = solve_nonneg_quadratic(A, a).array();
    } else {
      Eigen::LLT<Eigen::MatrixXd> llt(A);
      assert(llt.info() == Eigen::Success);
      v.q.col(g) = llt.solve(a).array();
    }
  }

  for (int k = 0; k < n_ues; ++k) {
    const int gk = s.group_of[k];
    Arr diag = diag_base;
    for (int j : s.groups[gk]) {
      diag += m * w.m[j] * s.beta_hat.col(j);
      if (j != k) diag += m * w.u[j] * s.beta_hat.col(j);
    }
    Eigen::MatrixXd B = (2.0 * diag).matrix().asDiagonal();
    const Eigen::VectorXd xi = s.sqrt_beta_hat.col(k).matrix();
    B.noalias() += (2.0 * m * w.u[k]) * (xi * xi.transpose());
    Eigen::VectorXd b = (2.0 * (ep + d.lambda_u[k])) * c.psi_u.col(k).matrix();
    b += 2.0 * ep_pull.col(k).matrix();
    for (int n = 0; n < n_aps; ++n) {
      b[n] -= c.params.delta_p(n) * c.act_slope_u(n, k) +
              (pbh + d.lambda_c[n]) * c.rate_u0[k] * c.ind_slope_u(n, k);
    }
    if (bounded) {
      v.p.col(k) = solve_nonneg_quadratic(B, b).array();
    } else {
      Eigen::LLT<Eigen::MatrixXd> llt(B);
      assert(llt.info() == Eigen::Success);
      v.p.col(k) = llt.solve(b).array();
    }
  }

  for (int k = 0; k < n_ues; ++k) {
    const double a = chi[k] * s.sigma2[k];
    const double b =
        d.lambda_e[k] * harvest_inverse(c.params.energy_floor_w[k], c.params);
    if (b <= 0.0) {
      v.rho[k] = 1.0;
    } else if (a <= 0.0) {
      v.rho[k] = 1e-9;
    } else {
      const double sa = std::sqrt(a);
      v.rho[k] = sa / (sa + std::sqrt(b));
    }
  }
  return v;
}

/// Lagrangian minimizer over the nonnegative amplitude orthant — the domain
/// on which the stream-activity tangents majorize their smoothed indicators.
/// The dual machinery evaluates everything here so the resulting dual value
/// is a true lower bound of the subproblem and every multiplier stays finite;
/// the unconstrained closed form extrapolates those tangents below zero,
/// where a binding backhaul cap sends its multiplier racing the power cap's.
[[nodiscard]] PowerAllocation recover_bounded(const SurrogateCoeffs& c,
                                              const DualState& d) {
  return recover_primal_impl(c, d, true);
}

}  // namespace

PowerAllocation recover_primal(const SurrogateCoeffs& c, const DualState& d) {
  return recover_primal_impl(c, d, false);
}

DualGradient dual_gradient(const SurrogateCoeffs& c, const PowerAllocation& v_min) {
  const ChannelStats& s = c.stats;
  DualGradient g;
  g.d_m = c.params.rate_floor_mc_nats;
  g.d_m_bar = -multicast_bounds(c, v_min);
  g.d_u = c.params.rate_floor_uc_nats - unicast_bounds(c, v_min);
  g.d_e.resize(s.num_ues);
  for (int k = 0; k < s.num_ues; ++k) {
    const double finv = harvest_inverse(c.params.energy_floor_w[k], c.params);
    const double rho_eff = std::min(v_min.rho[k], kRhoCap);
    g.d_e[k] = finv / (1.0 - rho_eff) - surrogate_energy_phi(c, v_min, k);
  }
  g.d_c.resize(s.num_aps);
  for (int n = 0; n < s.num_aps; ++n) {
    g.d_c[n] = surrogate_backhaul(c, v_min, n) - c.params.backhaul_cap_nats[n];
  }
  g.d_p = ap_transmit_power(v_min) - c.params.power_cap_w;
  return g;
}

double dual_value(const SurrogateCoeffs& c, const DualState& d,
                  const PowerAllocation& v_min) {
  const ChannelStats& s = c.stats;
  const double ep = d.eta * c.params.prelog();
  const Arr ru = unicast_bounds(c, v_min);
  const Arr rm = multicast_bounds(c, v_min);

  double val = surrogate_total_power(c, v_min);
  val -= ep * ru.sum();
  val -= (d.lambda_m_bar * rm).sum();
  val += (d.lambda_m * c.params.rate_floor_mc_nats).sum();
  val += (d.lambda_u * (c.params.rate_floor_uc_nats - ru)).sum();
  for (int k = 0; k < s.num_ues; ++k) {
    if (d.lambda_e[k] > 0.0) {
      const double finv = harvest_inverse(c.params.energy_floor_w[k], c.params);
      const double rho_eff = std::min(v_min.rho[k], kRhoCap);
      val += d.lambda_e[k] *
             (finv / (1.0 - rho_eff) - surrogate_energy_phi(c, v_min, k));
    }
  }
  for (int n = 0; n < s.num_aps; ++n) {
    val += d.lambda_c[n] *
           (surrogate_backhaul(c, v_min, n) - c.params.backhaul_cap_nats[n]);
  }
  val += (d.lambda_p * (ap_transmit_power(v_min) - c.params.power_cap_w)).sum();
  return val;
}

double surrogate_objective(const SurrogateCoeffs& c, const PowerAllocation& v,
                           double eta) {
  const Arr ru = unicast_bounds(c, v);
  const Arr rg = group_min(c.stats, multicast_bounds(c, v));
  return surrogate_total_power(c, v) -
         eta * c.params.prelog() * (rg.sum() + ru.sum());
}

DualState project_dual(const DualState& raw, double eta_prime,
                       const std::vector<std::vector<int>>& groups) {
  DualState out = raw;
  out.lambda_u = raw.lambda_u.max(0.0);
  out.lambda_e = raw.lambda_e.max(0.0);
  out.lambda_c = raw.lambda_c.max(0.0);
  out.lambda_p = raw.lambda_p.max(0.0);

  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double mu_m = raw.lambda_m[static_cast<int>(g)];
    const auto& members = groups[g];
    const auto residual = [&](double w) {
      double r = -std::max(mu_m + 0.5 * w, 0.0) - eta_prime;
      for (int k : members) r += std::max(raw.lambda_m_bar[k] - 0.5 * w, 0.0);
      return r;
    };
    double lo = 0.0, hi = 0.0;
    if (residual(0.0) > 0.0) {
      hi = 1.0;
      while (residual(hi) > 0.0) hi *= 2.0;
    } else {
      lo = -1.0;
      while (residual(lo) < 0.0) lo *= 2.0;
    }
    double w = 0.5 * (lo + hi);
    for (int it = 0; it < 500; ++it) {
      const double r = residual(w);
      if (std::abs(r) < 1e-10) break;
      (r > 0.0 ? lo : hi) = w;
      w = 0.5 * (lo + hi);
    }
    out.lambda_m[static_cast<int>(g)] = std::max(mu_m + 0.5 * w, 0.0);
    for (int k : members) {
      out.lambda_m_bar[k] = std::max(raw.lambda_m_bar[k] - 0.5 * w, 0.0);
    }
  }
  return out;
}

double coupling_residual(const DualState& d, double eta_prime,
                         const std::vector<std::vector<int>>& groups) {
  double worst = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    double sum = -d.lambda_m[static_cast<int>(g)] - eta_prime;
    for (int k : groups[g]) sum += d.lambda_m_bar[k];
    worst = std::max(worst, std::abs(sum));
  }
  return worst;
}

DualState momentum_step(const SurrogateCoeffs& c, const DualState& prev,
                        const DualGradient& g, double nu, bool momentum) {
  DualState next = prev;
  if (momentum) {
    const double pi_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * prev.pi * prev.pi));
    const double weight = (prev.pi - 1.0) / pi_new;
    for (std::size_t i = 0; i < kMultipliers.size(); ++i) {
      const Arr step = prev.*kMultipliers[i] + nu * g.*kGrads[i];
      next.*kMultipliers[i] = step + weight * (step - prev.*kShadows[i]);
      next.*kShadows[i] = step;
    }
    next.pi = pi_new;
  } else {
    for (std::size_t i = 0; i < kMultipliers.size(); ++i) {
      next.*kMultipliers[i] = prev.*kMultipliers[i] + nu * g.*kGrads[i];
    }
  }
  return project_dual(next, prev.eta * c.params.prelog(), c.stats.groups);
}

double kkt_residual(const SurrogateCoeffs& c, const DualState& d,
                    const PowerAllocation& v_min) {
  const ChannelStats& s = c.stats;
  const Arr ru = unicast_bounds(c, v_min);
  const Arr rm = multicast_bounds(c, v_min);
  const Arr rg = group_min(s, rm);

  double worst = 0.0;
  for (int g = 0; g < s.num_groups; ++g) {
    worst = std::max(
        worst, std::abs(d.lambda_m[g] * (rg[g] - c.params.rate_floor_mc_nats[g])));
  }
  for (int k = 0; k < s.num_ues; ++k) {
    const int gk = s.group_of[k];
    worst = std::max(worst, std::abs(d.lambda_m_bar[k] * (rm[k] - rg[gk])));
    worst = std::max(
        worst, std::abs(d.lambda_u[k] * (ru[k] - c.params.rate_floor_uc_nats[k])));
    const double finv = harvest_inverse(c.params.energy_floor_w[k], c.params);
    const double rho_eff = std::min(v_min.rho[k], kRhoCap);
    worst = std::max(
        worst, std::abs(d.lambda_e[k] * (surrogate_energy_phi(c, v_min, k) -
                                         finv / (1.0 - rho_eff))));
  }
  const Arr ptr = ap_transmit_power(v_min);
  for (int n = 0; n < s.num_aps; ++n) {
    worst = std::max(
        worst, std::abs(d.lambda_c[n] * (c.params.backhaul_cap_nats[n] -
                                         surrogate_backhaul(c, v_min, n))));
    worst = std::max(worst,
                     std::abs(d.lambda_p[n] * (c.params.power_cap_w[n] - ptr[n])));
  }
  return worst;
}

namespace {

/// Recover the primal with the energy multipliers settled onto their root at
/// the induced amplitudes, until the energy complementarity products
/// themselves are below the certificate target.  Every polish residual is
/// evaluated through this composed map, so the energy family can never be
/// disturbed by the other families' moves: it is an implicit function of
/// them, not a separate sweep target.  A short bracketed per-UE phase handles
/// the common mildly coupled case; UEs still violating after it are settled
/// jointly, because per-UE bisection records bracket sides against the other
/// multipliers' stale values and orbits a limit cycle when two stiff UEs are
/// amplitude-coupled.
PowerAllocation settled_primal(const SurrogateCoeffs& c, DualState& d,
                               double target, int& budget) {
  const int n_ues = c.stats.num_ues;
  Arr finv_all(n_ues);
  for (int k = 0; k < n_ues; ++k) {
    finv_all[k] = harvest_inverse(c.params.energy_floor_w[k], c.params);
  }
  auto product = [&](const PowerAllocation& vv, int k) {
    const double rho_eff = std::min(vv.rho[k], kRhoCap);
    return std::abs(d.lambda_e[k] * (finv_all[k] / (1.0 - rho_eff) -
                                     surrogate_energy_phi(c, vv, k)));
  };
  auto worst_product = [&](const PowerAllocation& vv) {
    double worst = 0.0;
    for (int k = 0; k < n_ues; ++k) worst = std::max(worst, product(vv, k));
    return worst;
  };

  PowerAllocation v = recover_bounded(c, d);
  --budget;
  for (int r = 0; r < 12 && budget > 0; ++r) {
    if (worst_product(v) <= 0.03 * target) return v;
    refresh_energy_multipliers(c, v, d);
    v = recover_bounded(c, d);
    --budget;
  }

  for (int round = 0; round < 3 && budget > 0; ++round) {
    std::vector<int> act;
    for (int k = 0; k < n_ues; ++k) {
      if (d.lambda_e[k] > 0.0 && product(v, k) > 0.03 * target) act.push_back(k);
    }
    if (act.empty()) break;
    const int m = static_cast<int>(act.size());
    Eigen::VectorXd y(m);
    for (int i = 0; i < m; ++i) y[i] = std::log(d.lambda_e[act[i]]);
    // floor-relative residuals of the active block; zero at the joint root
    Eigen::VectorXd f(m), fp(m);
    auto eval = [&](const Eigen::VectorXd& yy, Eigen::VectorXd& ff) {
      for (int i = 0; i < m; ++i) d.lambda_e[act[i]] = std::exp(yy[i]);
      v = recover_bounded(c, d);
      --budget;
      for (int i = 0; i < m; ++i) {
        const int k = act[i];
        const double rho_eff = std::min(v.rho[k], kRhoCap);
        ff[i] = (finv_all[k] / (1.0 - rho_eff) - surrogate_energy_phi(c, v, k)) /
                finv_all[k];
      }
    };
    eval(y, f);
    for (int it = 0; it < 30 && budget > 0; ++it) {
      if (worst_product(v) <= 0.03 * target) break;
      Eigen::MatrixXd jac(m, m);
      for (int j = 0; j < m; ++j) {
        Eigen::VectorXd yh = y;
        yh[j] += 1e-6;
        eval(yh, fp);
        jac.col(j) = (fp - f) / 1e-6;
      }
      Eigen::VectorXd delta = jac.fullPivLu().solve(-f);
      if (!delta.allFinite()) break;
      const double mx = delta.lpNorm<Eigen::Infinity>();
      if (mx > 2.0) delta *= 2.0 / mx;  // trust region: two e-folds per step
      const double fn = f.norm();
      double alpha = 1.0;
      bool improved = false;
      for (int bt = 0; bt < 6 && budget > 0; ++bt) {
        eval(y + alpha * delta, fp);
        if (fp.norm() < fn) {
          y += alpha * delta;
          f = fp;
          improved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!improved) {
        eval(y, f);  // leave the state at the best point seen
        break;
      }
    }
    // collapse the brackets onto the joint solution so the per-UE refresh
    // cannot undo it with side information recorded against stale neighbors
    for (int i = 0; i < m; ++i) {
      const int k = act[i];
      const double x = std::log(d.lambda_e[k]);
      d.bracket_lo_e[k] = x;
      d.bracket_hi_e[k] = x;
      d.shadow_e[k] = d.lambda_e[k];
    }
  }
  return v;
}

/// Move one multiplier onto the root of its monotone increasing residual, or
/// to the zero corner when the residual is already nonnegative there, until
/// the complementarity product |x * resid(x)| falls below target.  apply
/// writes a candidate value into the dual state; resid recovers the primal
/// there and returns the constraint slack.  The state is left at the last
/// candidate, which always satisfies the dual-cone invariants.
template <class Apply, class Resid>
void drive_root(double x0, double target, int& budget, Apply apply,
                Resid resid) {
  auto eval = [&](double x) {
    apply(x);
    --budget;
    return resid();
  };
  double f = eval(x0);
  if (std::abs(x0 * f) <= target || budget <= 0) return;
  double lo = 0.0;
  double hi = 0.0;
  if (f > 0.0) {
    if (x0 <= 0.0) return;
    const double f0 = eval(0.0);
    if (f0 >= -1e-300 || budget <= 0) return;  // slack at zero: corner solution
    hi = x0;
  } else {
    lo = x0;
    hi = std::max(4.0 * x0, 1.0);
    double fh = eval(hi);
    int grow = 0;
    while (fh < 0.0 && grow < 12 && budget > 0) {
      lo = hi;
      hi *= 4.0;
      fh = eval(hi);
      ++grow;
    }
    if (fh < 0.0) return;  // no root in range: leave the strongest push applied
  }
  for (int it = 0; it < 40 && budget > 0; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = eval(mid);
    if (std::abs(mid * fm) <= 0.5 * target || hi - lo <= 1e-13 * (1.0 + hi)) {
      return;
    }
    if (fm < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
}

/// Jointly settle one group's multiplier block.  A valid certificate needs
/// every positive-mass member rate on a common value: the group floor when
/// the group multiplier is active, a free common level otherwise, with the
/// group multiplier equal to the mass excess over eta'.  Alternating per-pair
/// fixes diverges on stiff groups (the floor pin rescales members of unequal
/// sensitivity, transfers shift the group minimum), so the coupled root is
/// solved by a damped Newton iteration on the member masses with a
/// finite-difference Jacobian, switching the active case on sign violations.
void solve_group_block(const SurrogateCoeffs& c, DualState& d, int g,
                       double target, int& budget) {
  const auto& members = c.stats.groups[g];
  const int m = static_cast<int>(members.size());
  const double ep = d.eta * c.params.prelog();
  const double floor_g = c.params.rate_floor_mc_nats[g];

  Eigen::VectorXd x(m);
  for (int i = 0; i < m; ++i) x[i] = d.lambda_m_bar[members[i]];

  auto apply = [&](const Eigen::VectorXd& xx, bool pinned) {
    double sum = 0.0;
    for (int i = 0; i < m; ++i) {
      d.lambda_m_bar[members[i]] = xx[i];
      sum += xx[i];
    }
    d.lambda_m[g] = pinned ? std::max(sum - ep, 0.0) : 0.0;
  };
  auto rates = [&](const Eigen::VectorXd& xx, bool pinned, Eigen::VectorXd& r) {
    apply(xx, pinned);
    PowerAllocation vv = settled_primal(c, d, target, budget);
    for (int i = 0; i < m; ++i) {
      r[i] = surrogate_multicast_rate_ue(c, vv, members[i]);
    }
  };
  // residual: pinned case pins every positive-mass member on the floor;
  // unpinned case ties them to member 0 and fixes the total mass at eta'.
  auto residual = [&](const Eigen::VectorXd& r, const Eigen::VectorXd& xx,
                      bool pinned, Eigen::VectorXd& f) {
    if (pinned) {
      for (int i = 0; i < m; ++i) f[i] = r[i] - floor_g;
    } else {
      for (int i = 1; i < m; ++i) f[i - 1] = r[i] - r[0];
      f[m - 1] = xx.sum() - ep;
    }
  };
  auto products_ok = [&](const Eigen::VectorXd& r, const Eigen::VectorXd& xx,
                         bool pinned) {
    const double rg = r.minCoeff();
    const double lm = pinned ? std::max(xx.sum() - ep, 0.0) : 0.0;
    double worst = std::abs(lm * (rg - floor_g));
    for (int i = 0; i < m; ++i) {
      worst = std::max(worst, xx[i] * (r[i] - rg));
    }
    return worst <= 0.7 * target;
  };

  bool pinned = x.sum() - ep > 1e-12;
  Eigen::VectorXd r(m), f(m), rp(m), fp(m);
  for (int attempt = 0; attempt < 2; ++attempt) {
    rates(x, pinned, r);
    for (int iter = 0; iter < 12 && budget > 0; ++iter) {
      residual(r, x, pinned, f);
      if (products_ok(r, x, pinned)) return;
      Eigen::MatrixXd jac(m, m);
      for (int j = 0; j < m; ++j) {
        // the step must dominate the settle tolerance of the composed
        // evaluation or the difference quotient is noise
        const double h = std::max(1e-5, 1e-4 * x[j]);
        Eigen::VectorXd xh = x;
        xh[j] += h;
        rates(xh, pinned, rp);
        residual(rp, xh, pinned, fp);
        jac.col(j) = (fp - f) / h;
      }
      Eigen::VectorXd delta = jac.fullPivLu().solve(-f);
      if (!delta.allFinite()) break;
      const double fn = f.norm();
      double alpha = 1.0;
      bool improved = false;
      for (int bt = 0; bt < 5 && budget > 0; ++bt) {
        Eigen::VectorXd xt = (x + alpha * delta).cwiseMax(0.0);
        rates(xt, pinned, rp);
        residual(rp, xt, pinned, fp);
        if (fp.norm() < fn) {
          x = xt;
          r = rp;
          improved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!improved) break;
      if (pinned && x.sum() <= ep) {
        pinned = false;  // pin released: mass fell to the coupling boundary
        x *= ep / std::max(x.sum(), 1e-300);
        break;
      }
    }
    // validate the case: an unpinned solve must still clear the floor
    rates(x, pinned, r);
    if (!pinned && r.minCoeff() < floor_g - 1e-12) {
      pinned = true;
      continue;
    }
    break;
  }
}

/// Final joint settle of every active multiplier across all families.  The
/// per-family sweeps stall when two active constraints of different families
/// share a UE's amplitudes with cross-gain near one (each drive re-disturbs
/// the other by the same amount every sweep), so the end game solves the full
/// active complementarity system at once: one residual per active multiplier
/// (its constraint slack, with group blocks in their pinned or free-level
/// form), the energy family settled implicitly inside every evaluation.  The
/// dimension is the number of active constraints, a handful at this scale,
/// and a damped Newton iteration with a finite-difference Jacobian closes the
/// remaining products quadratically.
void polish_joint_newton(const SurrogateCoeffs& c, DualState& d, double target,
                         int& budget) {
  const double ep = d.eta * c.params.prelog();
  const int n_groups = c.stats.num_groups;
  struct Var {
    char fam;  // 'p' power cap, 'c' backhaul cap, 'u' unicast floor, 'g' group
    int a;     // AP, UE, or group index
    int b;     // member position within the group block
  };
  for (int round = 0; round < 3 && budget > 0; ++round) {
    {
      PowerAllocation v = settled_primal(c, d, target, budget);
      if (kkt_residual(c, d, v) <= 0.7 * target) return;
    }
    std::vector<Var> vars;
    for (int n = 0; n < c.stats.num_aps; ++n) {
      if (d.lambda_p[n] > 1e-11) vars.push_back({'p', n, 0});
      if (d.lambda_c[n] > 1e-11) vars.push_back({'c', n, 0});
    }
    for (int k = 0; k < c.stats.num_ues; ++k) {
      if (d.lambda_u[k] > 1e-11) vars.push_back({'u', k, 0});
    }
    std::vector<char> pinned(n_groups);
    for (int g = 0; g < n_groups; ++g) {
      pinned[g] = d.lambda_m[g] > 1e-11;
      const auto& members = c.stats.groups[g];
      for (int i = 0; i < static_cast<int>(members.size()); ++i) {
        vars.push_back({'g', g, i});
      }
    }
    const int m = static_cast<int>(vars.size());
    if (m == 0) return;

    Eigen::VectorXd x(m);
    for (int i = 0; i < m; ++i) {
      const Var& vr = vars[i];
      x[i] = vr.fam == 'p'   ? d.lambda_p[vr.a]
             : vr.fam == 'c' ? d.lambda_c[vr.a]
             : vr.fam == 'u' ? d.lambda_u[vr.a]
                             : d.lambda_m_bar[c.stats.groups[vr.a][vr.b]];
    }
    auto apply = [&](const Eigen::VectorXd& xx) {
      Arr mass = Arr::Zero(n_groups);
      for (int i = 0; i < m; ++i) {
        const Var& vr = vars[i];
        const double val = std::max(xx[i], 0.0);
        switch (vr.fam) {
          case 'p': d.lambda_p[vr.a] = val; break;
          case 'c': d.lambda_c[vr.a] = val; break;
          case 'u': d.lambda_u[vr.a] = val; break;
          default:
            d.lambda_m_bar[c.stats.groups[vr.a][vr.b]] = val;
            mass[vr.a] += val;
        }
      }
      for (int g = 0; g < n_groups; ++g) {
        d.lambda_m[g] = pinned[g] ? std::max(mass[g] - ep, 0.0) : 0.0;
      }
    };
    Eigen::VectorXd f(m), fp(m);
    auto resid = [&](const Eigen::VectorXd& xx, Eigen::VectorXd& ff) {
      apply(xx);
      PowerAllocation vv = settled_primal(c, d, target, budget);
      const Arr ptr = ap_transmit_power(vv);
      for (int i = 0; i < m; ++i) {
        const Var& vr = vars[i];
        switch (vr.fam) {
          case 'p':
            ff[i] = c.params.power_cap_w[vr.a] - ptr[vr.a];
            break;
          case 'c':
            ff[i] = c.params.backhaul_cap_nats[vr.a] -
                    surrogate_backhaul(c, vv, vr.a);
            break;
          case 'u':
            ff[i] = surrogate_unicast_rate(c, vv, vr.a) -
                    c.params.rate_floor_uc_nats[vr.a];
            break;
          default: {
            const auto& members = c.stats.groups[vr.a];
            const double rm = surrogate_multicast_rate_ue(c, vv, members[vr.b]);
            if (pinned[vr.a]) {
              ff[i] = rm - c.params.rate_floor_mc_nats[vr.a];
            } else if (vr.b > 0) {
              ff[i] = rm - surrogate_multicast_rate_ue(c, vv, members[0]);
            } else {
              double mass = 0.0;
              for (int j : members) mass += d.lambda_m_bar[j];
              ff[i] = mass - ep;
            }
          }
        }
      }
    };

    resid(x, f);
    bool progressed = false;
    for (int it = 0; it < 15 && budget > 0; ++it) {
      {
        PowerAllocation v = recover_bounded(c, d);
        --budget;
        if (kkt_residual(c, d, v) <= 0.7 * target) return;
      }
      Eigen::MatrixXd jac(m, m);
      for (int j = 0; j < m; ++j) {
        const double h = std::max(1e-6, 1e-5 * std::abs(x[j]));
        Eigen::VectorXd xh = x;
        xh[j] += h;
        resid(xh, fp);
        jac.col(j) = (fp - f) / h;
      }
      Eigen::VectorXd delta = jac.fullPivLu().solve(-f);
      if (!delta.allFinite()) break;
      for (int i = 0; i < m; ++i) {  // trust region per coordinate
        const double cap = std::max(1.0, 0.5 * std::abs(x[i]));
        delta[i] = std::clamp(delta[i], -cap, cap);
      }
      const double fn = f.norm();
      double alpha = 1.0;
      bool improved = false;
      for (int bt = 0; bt < 6 && budget > 0; ++bt) {
        Eigen::VectorXd xt = (x + alpha * delta).cwiseMax(0.0);
        resid(xt, fp);
        if (fp.norm() < fn) {
          x = xt;
          f = fp;
          improved = true;
          progressed = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!improved) {
        resid(x, f);  // leave the state at the best point seen
        break;
      }
    }
    if (!progressed) break;  // active set cannot improve: avoid spinning
  }
}

/// Complementarity polish, run once the subgradient phase has settled on the
/// dual value: every multiplier family pairs with a scalar slack through a
/// monotone primal response, so each product is driven to zero by bracketed
/// one-dimensional moves, re-sweeping over families, and any residual
/// cross-family stall is closed by a joint Newton pass over the active set.
/// The subgradient iteration itself cannot reach tight certificates: its
/// fixed step orbits the dual optimum, while a vanishing step freezes the
/// rate-tie equalization before the ties close.
void polish_kkt(const SurrogateCoeffs& c, DualState& d, double target,
                int budget) {
  for (int sweep = 0; sweep < 4 && budget > 0; ++sweep) {
    {
      PowerAllocation v = settled_primal(c, d, target, budget);
      if (kkt_residual(c, d, v) <= target) break;
    }
    for (int n = 0; n < c.stats.num_aps; ++n) {
      drive_root(
          d.lambda_p[n], target, budget,
          [&](double x) { d.lambda_p[n] = x; },
          [&]() {
            PowerAllocation vv = settled_primal(c, d, target, budget);
            return c.params.power_cap_w[n] - ap_transmit_power(vv)[n];
          });
      drive_root(
          d.lambda_c[n], target, budget,
          [&](double x) { d.lambda_c[n] = x; },
          [&]() {
            PowerAllocation vv = settled_primal(c, d, target, budget);
            return c.params.backhaul_cap_nats[n] - surrogate_backhaul(c, vv, n);
          });
    }
    for (int k = 0; k < c.stats.num_ues; ++k) {
      drive_root(
          d.lambda_u[k], target, budget,
          [&](double x) { d.lambda_u[k] = x; },
          [&]() {
            PowerAllocation vv = settled_primal(c, d, target, budget);
            return surrogate_unicast_rate(c, vv, k) -
                   c.params.rate_floor_uc_nats[k];
          });
    }
    for (int g = 0; g < c.stats.num_groups; ++g) {
      solve_group_block(c, d, g, target, budget);
    }
  }
  polish_joint_newton(c, d, target, budget);
  // leave the energy family exactly on its root at the final amplitudes
  settled_primal(c, d, target, budget);
  for (std::size_t i = 0; i < kMultipliers.size(); ++i) {
    d.*kShadows[i] = d.*kMultipliers[i];
  }
  d.pi = 1.0;
}

void push_trace_row(SolveTrace* trace, const SurrogateCoeffs& c,
                    const DualState& d, const PowerAllocation& v, double val,
                    int sca_round, int dink_iter, int inner_iter) {
  if (trace == nullptr) return;
  TraceRow row;
  row.sca_round = sca_round;
  row.dinkelbach_iter = dink_iter;
  row.inner_iter = inner_iter;
  row.dual_value = val;
  row.eta = d.eta;

  PowerAllocation clamped;
  clamped.q = v.q.max(0.0);
  clamped.p = v.p.max(0.0);
  clamped.rho = v.rho.min(kRhoCap).max(1e-9);
  const PerfReport r = evaluate(c.stats, c.params, clamped);
  row.ee_bits_per_joule = r.ee_smooth_bits_per_joule;
  row.ee_nats = r.ee_smooth_bits_per_joule * M_LN2;
  row.max_violation =
      std::max(0.0, -check_constraints(r, c.params).min_slack());
  row.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - trace->start)
                    .count();
  trace->rows.push_back(row);
}

void check_weak_duality(SolveTrace* trace, double val, double obj_ref) {
  if (trace == nullptr) return;
  if (val > obj_ref + 1e-6 * (1.0 + std::abs(obj_ref))) {
    trace->weak_duality_ok = false;
  }
}

}  // namespace

InnerResult inner_solve(const SurrogateCoeffs& c, DualState dual,
                        const SolverOptions& opts, double obj_ref,
                        SolveTrace* trace, int sca_round) {
  const int dink_iter = trace == nullptr
                            ? 0
                            : static_cast<int>(trace->eta_sequence.size()) + 1;
  double nu = opts.step;
  PowerAllocation v = recover_bounded(c, dual);
  double val = dual_value(c, dual, v);
  check_weak_duality(trace, val, obj_ref);

  InnerResult out;
  int done = 0;
  for (int s = 1; s <= opts.max_iter_inner; ++s) {
    DualGradient g = dual_gradient(c, v);
    // The energy family is owned entirely by its bracketed block refresh: its
    // ascent gradient finv/(1-rho) spikes unboundedly whenever a splitter
    // nears the decode end, and one such step poisons every other family
    // through the junk primal it induces.
    g.d_e.setZero();
    nu = opts.step;
    DualState cand = momentum_step(c, dual, g, nu, opts.momentum);
    refresh_energy_multipliers(c, v, cand);
    PowerAllocation v_cand = recover_bounded(c, cand);
    double val_cand = dual_value(c, cand, v_cand);
    // Adaptive restart: a material drop in the dual value means the
    // extrapolation overshot, so retake the move as a plain projected step
    // and reset the momentum state.
    if (opts.momentum && val_cand < val - 1e-3 * (1.0 + std::abs(val))) {
      cand = momentum_step(c, dual, g, nu, false);
      cand.pi = 1.0;
      for (std::size_t i = 0; i < kMultipliers.size(); ++i) {
        cand.*kShadows[i] = cand.*kMultipliers[i];
      }
      refresh_energy_multipliers(c, v, cand);
      v_cand = recover_bounded(c, cand);
      val_cand = dual_value(c, cand, v_cand);
    }
    if (opts.backtracking) {
      int halvings = 0;
      while (val_cand < val - 1e-12 * (1.0 + std::abs(val)) && halvings < 20) {
        nu *= 0.5;
        ++halvings;
        cand = momentum_step(c, dual, g, nu, false);
        cand.pi = 1.0;  // restart the extrapolation after a rejected step
        for (std::size_t i = 0; i < kMultipliers.size(); ++i) {
          cand.*kShadows[i] = cand.*kMultipliers[i];
        }
        refresh_energy_multipliers(c, v, cand);
        v_cand = recover_bounded(c, cand);
        val_cand = dual_value(c, cand, v_cand);
      }
    }
    dual = std::move(cand);
    v = std::move(v_cand);
    if (std::getenv("EE_DEBUG") != nullptr) {
      int kw = 0;
      dual.lambda_e.maxCoeff(&kw);
      const double finv =
          harvest_inverse(c.params.energy_floor_w[kw], c.params);
      std::fprintf(stderr,
                   "s=%d val=%.6g le[%d]=%.3g den=%.3g qn=%.3g pn=%.3g\n", s,
                   val_cand, kw, dual.lambda_e[kw],
                   surrogate_energy_phi(c, v, kw) - finv,
                   v.q.col(c.stats.group_of[kw]).matrix().norm(),
                   v.p.col(kw).matrix().norm());
    }
    check_weak_duality(trace, val_cand, obj_ref);
    push_trace_row(trace, c, dual, v, val_cand, sca_round, dink_iter, s);
    done = s;

    const double rel = std::abs(val_cand - val) / std::max(1.0, std::abs(val));
    val = val_cand;
    if (rel < opts.tol_inner || s == opts.max_iter_inner) {
      out.kkt = kkt_residual(c, dual, v);
      if (opts.kkt_target > 0.0 && out.kkt > opts.kkt_target) {
        polish_kkt(c, dual, opts.kkt_target, 60000);
        v = recover_bounded(c, dual);
        val = dual_value(c, dual, v);
        out.kkt = kkt_residual(c, dual, v);
      }
      if (rel < opts.tol_inner) break;
    }
  }
  out.v = std::move(v);
  out.dual = std::move(dual);
  out.iterations = done;
  out.value = val;
  return out;
}

namespace {

/// Carry multipliers into a subproblem with a different ratio (or a rebuilt
/// surrogate): re-project the multicast block onto the new coupling set, and
/// discard state that is only meaningful within one ascent run (momentum
/// shadows and the energy-root brackets, which record residual signs against
/// multipliers that have since moved).
DualState rewarm_dual(const SurrogateCoeffs& c, const DualState& prev,
                      double eta) {
  DualState d = prev;
  d.eta = eta;
  d = project_dual(d, eta * c.params.prelog(), c.stats.groups);
  for (std::size_t i = 0; i < kMultipliers.size(); ++i) {
    d.*kShadows[i] = d.*kMultipliers[i];
  }
  d.pi = 1.0;
  d.bracket_lo_e = Arr::Constant(c.stats.num_ues, -1e300);
  d.bracket_hi_e = Arr::Constant(c.stats.num_ues, 1e300);
  return d;
}

}  // namespace

DinkelbachResult dinkelbach_solve(const SurrogateCoeffs& c, double eta_init,
                                  const SolverOptions& opts, SolveTrace* trace,
                                  int sca_round, const DualState* warm) {
  DinkelbachResult out;
  out.eta = eta_init;
  bool have_dual = false;
  DualState d;
  if (warm != nullptr) {
    d = *warm;
    have_dual = true;
  }
  for (int it = 1; it <= opts.max_iter_dink; ++it) {
    const DualState d0 =
        have_dual ? rewarm_dual(c, d, out.eta) : make_initial_dual(c, out.eta);
    const double obj_ref = surrogate_objective(c, c.v0, out.eta);
    InnerResult ir = inner_solve(c, d0, opts, obj_ref, trace, sca_round);
    out.inner_iterations += ir.iterations;
    out.kkt = ir.kkt;
    out.v = std::move(ir.v);
    out.dual = std::move(ir.dual);
    out.iterations = it;
    d = out.dual;
    have_dual = true;

    const Arr ru = unicast_bounds(c, out.v);
    const Arr rg = group_min(c.stats, multicast_bounds(c, out.v));
    const double rate_sum = rg.sum() + ru.sum();
    if (!(rate_sum > 1e-12)) {
      out.rate_sum_guard = true;
      break;
    }
    const double eta_new =
        surrogate_total_power(c, out.v) / (c.params.prelog() * rate_sum);
    if (eta_new > out.eta * (1.0 + 1e-6)) out.eta_monotone = false;
    // the canonical ratio sequence is the efficiency (rate per watt), which
    // climbs as the power-per-rate subproblem parameter falls
    if (trace != nullptr) trace->eta_sequence.push_back(1.0 / eta_new);
    const double rel = std::abs(eta_new - out.eta) / std::max(out.eta, 1e-300);
    out.eta = eta_new;
    if (rel < opts.tol_dink) break;
  }
  return out;
}

SolveResult solve(const ChannelStats& stats, const SystemParams& params,
                  const PowerAllocation& v0, const SolverOptions& opts) {
  SolveResult res;
  SolveTrace& tr = res.trace;

  PerfReport r = evaluate(stats, params, v0);
  const double slack0 = check_constraints(r, params).min_slack();
  if (slack0 < -1e-8) {
    throw infeasible_error(
        "starting allocation violates the constraints (min slack " +
        std::to_string(slack0) + "); run the feasibility search first");
  }

  PowerAllocation v = v0;
  double ee_prev = r.ee_smooth_bits_per_joule;
  tr.ee_per_round.push_back(ee_prev);

  DualState dual_prev;
  bool have_prev = false;

  for (int t = 1; t <= opts.max_iter_sca; ++t) {
    const SurrogateCoeffs c = build_surrogate(stats, params, v);
    const double eta0 =
        r.p_total_smooth / (params.prelog() * std::max(r.sum_rate_nats, 1e-12));
    const DinkelbachResult dk = dinkelbach_solve(
        c, eta0, opts, &tr, t, have_prev ? &dual_prev : nullptr);
    dual_prev = dk.dual;
    have_prev = true;
    tr.max_dinkelbach_iterations =
        std::max(tr.max_dinkelbach_iterations, dk.iterations);
    tr.total_inner_iterations += dk.inner_iterations;
    tr.eta_monotone = tr.eta_monotone && dk.eta_monotone;
    tr.final_kkt = dk.kkt;

    PowerAllocation vn;
    tr.clamped_entries += (dk.v.q < 0.0).count() + (dk.v.p < 0.0).count();
    vn.q = dk.v.q.max(0.0);
    vn.p = dk.v.p.max(0.0);
    vn.rho = dk.v.rho.min(kRhoCap).max(1e-9);
    project_power(vn, params);
    for (int k = 0; k < stats.num_ues; ++k) {
      const double finv = harvest_inverse(params.energy_floor_w[k], params);
      if (finv <= 0.0) {
        vn.rho[k] = kRhoCap;
      } else {
        // Complementary-slackness repair: the largest energy-feasible split
        // given the amplitudes, which also maximizes every rate.
        vn.rho[k] =
            std::clamp(1.0 - finv / phi_e(stats, vn, k), 1e-9, kRhoCap);
      }
    }

    const PerfReport rn = evaluate(stats, params, vn);
    const double ee_new = rn.ee_smooth_bits_per_joule;
    if (ee_new < ee_prev - 1e-9 * std::max(1.0, std::abs(ee_prev))) {
      tr.monotone_guard_tripped = true;
      break;
    }
    v = vn;
    r = rn;
    tr.sca_rounds = t;
    tr.ee_per_round.push_back(ee_new);
    const double rel = std::abs(ee_new - ee_prev) / std::max(ee_prev, 1e-300);
    ee_prev = ee_new;
    if (rel < opts.tol_sca) {
      tr.converged = true;
      break;
    }
  }

  res.v = v;
  res.report = evaluate(stats, params, v);
  return res;
}

}  // namespace cfee
