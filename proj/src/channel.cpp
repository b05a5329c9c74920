#include "cfee/channel.hpp"

#include <cmath>

namespace cfee {

ChannelStats derive_stats(const SystemParams& params, const Topology& topo) {
  const int n_ap = params.num_aps;
  const int n_ue = params.num_ues;
  const int n_gr = params.num_groups;
  const double tr = params.pilot_len * params.pilot_snr();

  ChannelStats s;
  s.num_aps = n_ap;
  s.antennas_per_ap = params.antennas_per_ap;
  s.num_ues = n_ue;
  s.num_groups = n_gr;
  s.groups = topo.groups;
  s.group_of = topo.group_of;
  s.delta2 = params.antenna_noise_w;
  s.sigma2 = params.splitter_noise_w;

  s.beta = topo.beta;
  s.sqrt_beta = topo.beta.sqrt();

  s.varrho.setZero(n_ap, n_gr);
  for (int g = 0; g < n_gr; ++g) {
    for (int k : topo.groups[g]) s.varrho.col(g) += topo.beta.col(k);
  }

  s.bar_beta.resize(n_ap, n_ue);
  s.beta_hat.resize(n_ap, n_ue);
  for (int k = 0; k < n_ue; ++k) {
    const Arr den = 1.0 + tr * s.varrho.col(topo.group_of[k]);
    s.bar_beta.col(k) = std::sqrt(tr) * topo.beta.col(k) / den;
    s.beta_hat.col(k) = tr * topo.beta.col(k).square() / den;
  }
  s.sqrt_beta_hat = s.beta_hat.sqrt();

  {
    const Mat den = 1.0 + tr * s.varrho;
    s.bar_alpha = std::sqrt(tr) * s.varrho / den;
    s.alpha_hat = tr * s.varrho.square() / den;
  }
  return s;
}

ChannelRealization draw_realization(const SystemParams& params, const Topology& topo,
                                    const ChannelStats& stats, std::mt19937_64& rng) {
  const int n_ap = params.num_aps;
  const int m = params.antennas_per_ap;
  const int n_ue = params.num_ues;
  const int n_gr = params.num_groups;
  const double sqrt_trs = std::sqrt(params.pilot_len * params.pilot_snr());

  // Complex Gaussian entries as independent real/imag N(0, 1/2) pairs.
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
  auto cgauss = [&]() { return std::complex<double>(gauss(rng), gauss(rng)); };

  ChannelRealization r;
  r.g.resize(n_ap * m, n_ue);
  for (int k = 0; k < n_ue; ++k) {
    for (int n = 0; n < n_ap; ++n) {
      const double scale = stats.sqrt_beta(n, k);
      for (int a = 0; a < m; ++a) r.g(n * m + a, k) = scale * cgauss();
    }
  }

  // Per-(n,g) pilot observation y = sqrt(tau rho) sum_members g + noise; the
  // SAME noise vector enters every member's estimate (pilot contamination).
  CMat y_pilot(n_ap * m, n_gr);
  for (int g = 0; g < n_gr; ++g) {
    for (int i = 0; i < n_ap * m; ++i) y_pilot(i, g) = cgauss();
    for (int k : topo.groups[g]) y_pilot.col(g) += sqrt_trs * r.g.col(k);
  }

  r.g_hat.resize(n_ap * m, n_ue);
  r.f_hat.resize(n_ap * m, n_gr);
  r.w.resize(n_ap * m, n_gr);
  r.v.resize(n_ap * m, n_ue);
  for (int g = 0; g < n_gr; ++g) {
    for (int n = 0; n < n_ap; ++n) {
      const auto block = y_pilot.col(g).segment(n * m, m);
      r.f_hat.col(g).segment(n * m, m) = stats.bar_alpha(n, g) * block;
      // Normalization by the analytic expectation M*alpha_hat keeps the
      // closed-form rate expressions exact.
      r.w.col(g).segment(n * m, m) =
          r.f_hat.col(g).segment(n * m, m) /
          std::sqrt(static_cast<double>(m) * stats.alpha_hat(n, g));
    }
    for (int k : topo.groups[g]) {
      for (int n = 0; n < n_ap; ++n) {
        const auto block = y_pilot.col(g).segment(n * m, m);
        r.g_hat.col(k).segment(n * m, m) = stats.bar_beta(n, k) * block;
        r.v.col(k).segment(n * m, m) =
            r.g_hat.col(k).segment(n * m, m) /
            std::sqrt(static_cast<double>(m) * stats.beta_hat(n, k));
      }
    }
  }
  return r;
}

}  // namespace cfee
