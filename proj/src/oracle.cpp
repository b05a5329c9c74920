#include "cfee/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

namespace cfee {

namespace {

/// Mean and standard error of a stream of real samples.
struct RunningStat {
  double sum = 0.0;
  double sumsq = 0.0;
  void add(double x) {
    sum += x;
    sumsq += x * x;
  }
  [[nodiscard]] McEstimate finish(int n) const {
    McEstimate e;
    e.value = sum / n;
    const double var = std::max(0.0, (sumsq - n * e.value * e.value) / (n - 1.0));
    e.std_error = std::sqrt(var / n);
    return e;
  }
};

/// |E x|^2 from complex samples, bias-corrected by the sample variance:
/// E|mean|^2 = |E x|^2 + var/n, so subtract var/n and propagate both error
/// sources (first order in the mean, plus the variance term itself).
struct RunningCplx {
  std::complex<double> sum = 0.0;
  double sumsq = 0.0;
  void add(std::complex<double> x) {
    sum += x;
    sumsq += std::norm(x);
  }
  [[nodiscard]] McEstimate finish(int n) const {
    const std::complex<double> mean = sum / static_cast<double>(n);
    const double var =
        std::max(0.0, (sumsq - n * std::norm(mean)) / (n - 1.0));
    McEstimate e;
    e.value = std::norm(mean) - var / n;
    const double s = std::sqrt(var);
    e.std_error = 2.0 * std::abs(mean) * s / std::sqrt(static_cast<double>(n)) +
                  var / n;
    return e;
  }
};

}  // namespace

McRateCheck mc_rate_terms(const SystemParams& params, const Topology& topo,
                          const ChannelStats& stats, const PowerAllocation& v,
                          int k, int num_draws, std::mt19937_64& rng) {
  const int n_aps = stats.num_aps;
  const int n_ues = stats.num_ues;
  const int n_groups = stats.num_groups;
  const int m = stats.antennas_per_ap;
  const double md = static_cast<double>(m);
  const int gk = stats.group_of[k];

  RunningCplx mc_gain, uc_gain;
  RunningStat mc_var, mc_cross, uc_same, uc_cross, uc_var, uc_denom, rf_power,
      excess;

  std::vector<std::complex<double>> dq(n_groups), ep(n_ues);
  for (int draw = 0; draw < num_draws; ++draw) {
    const ChannelRealization ch = draw_realization(params, topo, stats, rng);

    std::complex<double> d_m = 0.0, v_m = 0.0, d_u = 0.0, v_u = 0.0, full = 0.0;
    double own_gran_m = 0.0, same_gran = 0.0, own_gran_u = 0.0;
    std::fill(dq.begin(), dq.end(), std::complex<double>(0.0));
    std::fill(ep.begin(), ep.end(), std::complex<double>(0.0));
    double cross_m = 0.0, cross_u = 0.0;

    for (int n = 0; n < n_aps; ++n) {
      const auto gkn = ch.g.col(k).segment(n * m, m);
      for (int g = 0; g < n_groups; ++g) {
        const std::complex<double> d =
            v.q(n, g) * gkn.dot(ch.w.col(g).segment(n * m, m));
        dq[g] += d;
        full += d;
        if (g == gk) {
          d_m += d;
          own_gran_m += std::norm(d);
          v_m += d - v.q(n, g) * std::sqrt(md * stats.beta_hat(n, k));
        }
      }
      for (int j = 0; j < n_ues; ++j) {
        const std::complex<double> e =
            v.p(n, j) * gkn.dot(ch.v.col(j).segment(n * m, m));
        ep[j] += e;
        full += e;
        if (stats.group_of[j] == gk) {
          same_gran += std::norm(e);
          if (j == k) {
            d_u += e;
            own_gran_u += std::norm(e);
            v_u += e - v.p(n, j) * std::sqrt(md * stats.beta_hat(n, k));
          }
        }
      }
    }
    for (int g = 0; g < n_groups; ++g) {
      if (g != gk) cross_m += std::norm(dq[g]);
    }
    for (int j = 0; j < n_ues; ++j) {
      if (stats.group_of[j] != gk) cross_u += std::norm(ep[j]);
    }

    const double granular = cross_m + own_gran_m + same_gran + cross_u;
    mc_gain.add(d_m);
    mc_var.add(std::norm(v_m));
    mc_cross.add(cross_m);
    uc_same.add(same_gran);
    uc_cross.add(cross_u);
    uc_gain.add(d_u);
    uc_var.add(std::norm(v_u));
    uc_denom.add(same_gran - own_gran_u + cross_u);
    rf_power.add(granular + stats.delta2[k]);
    excess.add(std::norm(full) - granular);
  }

  // Closed forms, all in UE k's large-scale coefficients.
  const Arr beta_k = stats.beta.col(k);
  const Arr bhat_k = stats.beta_hat.col(k);
  const Arr sbhat_k = stats.sqrt_beta_hat.col(k);

  double c_cross_m = 0.0;
  for (int g = 0; g < n_groups; ++g) {
    if (g != gk) c_cross_m += (beta_k * v.q.col(g).square()).sum();
  }
  double c_same = 0.0, c_cross_u = 0.0, c_denom = 0.0;
  for (int j = 0; j < n_ues; ++j) {
    const double bp = (beta_k * v.p.col(j).square()).sum();
    const double hp = md * (bhat_k * v.p.col(j).square()).sum();
    if (stats.group_of[j] == gk) {
      c_same += bp + hp;
      if (j != k) c_denom += bp + hp;
    } else {
      c_cross_u += bp;
      c_denom += bp;
    }
  }

  McRateCheck out;
  const auto push = [&out](std::string name, double closed, McEstimate mc) {
    out.terms.push_back({std::move(name), closed, mc});
  };
  const double coh_m = md * (sbhat_k * v.q.col(gk)).sum() *
                       (sbhat_k * v.q.col(gk)).sum();
  const double coh_u = md * (sbhat_k * v.p.col(k)).sum() *
                       (sbhat_k * v.p.col(k)).sum();
  push("multicast_coherent_gain", coh_m, mc_gain.finish(num_draws));
  push("multicast_beam_variance", (beta_k * v.q.col(gk).square()).sum(),
       mc_var.finish(num_draws));
  push("multicast_cross_group_interference", c_cross_m,
       mc_cross.finish(num_draws));
  push("unicast_same_group_interference", c_same, uc_same.finish(num_draws));
  push("unicast_cross_group_interference", c_cross_u,
       uc_cross.finish(num_draws));
  push("unicast_coherent_gain", coh_u, uc_gain.finish(num_draws));
  push("unicast_beam_variance", (beta_k * v.p.col(k).square()).sum(),
       uc_var.finish(num_draws));
  push("unicast_denominator_interference", c_denom, uc_denom.finish(num_draws));
  push("received_rf_power", phi_e(stats, v, k), rf_power.finish(num_draws));
  out.coherent_excess = excess.finish(num_draws);
  return out;
}

FdGradient fd_gradient(const std::function<double(const Arr&)>& f, const Arr& x) {
  const int n = static_cast<int>(x.size());
  FdGradient out;
  out.grad.resize(n);
  out.kink.assign(n, false);
  const double f0 = f(x);
  Arr xw = x;
  for (int i = 0; i < n; ++i) {
    const double h = 1e-6 * (1.0 + std::abs(x[i]));
    xw[i] = x[i] + h;
    const double fp = f(xw);
    xw[i] = x[i] - h;
    const double fm = f(xw);
    xw[i] = x[i];
    out.grad[i] = (fp - fm) / (2.0 * h);
    const double fwd = (fp - f0) / h;
    const double bwd = (f0 - fm) / h;
    if (std::abs(fwd - bwd) > 0.1 * std::max({std::abs(fwd), std::abs(bwd), 1e-12})) {
      out.kink[i] = true;
    }
  }
  return out;
}

DualGroupProjection brute_project_dual_group(const Arr& mu_bar, double mu_m,
                                             double eta_prime) {
  const int n = static_cast<int>(mu_bar.size());
  DualGroupProjection best;
  best.lambda_bar = Arr::Zero(n);
  double best_dist = std::numeric_limits<double>::infinity();

  Arr lam(n);
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    for (int b = 0; b <= 1; ++b) {
      const int free_count = __builtin_popcount(mask) + b;
      double w = 0.0;
      if (free_count == 0) {
        if (std::abs(eta_prime) > 1e-15) continue;
      } else {
        double s = -b * mu_m - eta_prime;
        for (int i = 0; i < n; ++i) {
          if (mask & (1u << i)) s += mu_bar[i];
        }
        w = 2.0 * s / free_count;
      }
      bool ok = true;
      for (int i = 0; i < n; ++i) {
        lam[i] = (mask & (1u << i)) ? mu_bar[i] - 0.5 * w : 0.0;
        if (lam[i] < -1e-12) ok = false;
      }
      const double lam_m = b ? mu_m + 0.5 * w : 0.0;
      if (!ok || lam_m < -1e-12) continue;
      const double dist =
          (lam - mu_bar).square().sum() + (lam_m - mu_m) * (lam_m - mu_m);
      if (dist < best_dist) {
        best_dist = dist;
        best.lambda_bar = lam.max(0.0);
        best.lambda_m = std::max(lam_m, 0.0);
      }
    }
  }
  return best;
}

Arr brute_project_power_row(const Arr& y, double cap) {
  const Arr base = y.max(0.0);
  const double norm2 = base.square().sum();
  if (norm2 <= 0.0) return base;
  const double s_hi = std::min(1.0, std::sqrt(cap / norm2));
  const auto dist = [&](double s) { return (s * base - y).square().sum(); };

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0, hi = s_hi;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = dist(x1), f2 = dist(x2);
  while (hi - lo > 1e-12) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = dist(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = dist(x2);
    }
  }
  return 0.5 * (lo + hi) * base;
}

}  // namespace cfee
