#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cfee/channel.hpp"
#include "cfee/performance.hpp"

namespace cfee {

/// One Monte-Carlo estimate with its standard error (sample std / sqrt(n)).
struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// A closed-form quantity next to its independent simulation estimate.
struct TermCheck {
  std::string name;
  double closed_form = 0.0;
  McEstimate mc;

  /// Standardized deviation of the estimate from the closed form.
  [[nodiscard]] double z() const {
    return (mc.value - closed_form) / std::max(mc.std_error, 1e-300);
  }
};

/// The nine statistics the rate and energy expressions are assembled from,
/// estimated for one UE over fresh small-scale draws, plus the coherent
/// same-group cross-AP power that the incoherent assembly leaves out
/// (reported as a diagnostic, not checked against a closed form).
struct McRateCheck {
  std::vector<TermCheck> terms;
  McEstimate coherent_excess;
};

/// Estimate every term for UE k with num_draws channel draws. Statistics
/// follow the assembly granularity: per-AP second moments for the
/// pilot-sharing (same-group) terms, full cross-AP aggregates for the
/// independent cross-group terms. Pairing draws antithetically would not
/// reduce the variance here: every statistic is even in the channels.
[[nodiscard]] McRateCheck mc_rate_terms(const SystemParams& params,
                                        const Topology& topo,
                                        const ChannelStats& stats,
                                        const PowerAllocation& v, int k,
                                        int num_draws, std::mt19937_64& rng);

/// Central-difference gradient with per-coordinate kink flags (raised when
/// the one-sided differences disagree by more than 10%).
struct FdGradient {
  Arr grad;
  std::vector<bool> kink;
};

[[nodiscard]] FdGradient fd_gradient(const std::function<double(const Arr&)>& f,
                                     const Arr& x);

/// Exact projection of (mu_bar, mu_m) onto the coupled multiplier block
/// { lambda >= 0, sum(lambda_bar) - lambda_m = eta_prime } by enumerating
/// every active set and keeping the feasible stationary point of least
/// distance. Reference oracle for the bisection-based projection.
struct DualGroupProjection {
  Arr lambda_bar;
  double lambda_m = 0.0;
};

[[nodiscard]] DualGroupProjection brute_project_dual_group(const Arr& mu_bar,
                                                           double mu_m,
                                                           double eta_prime);

/// Reference projection of one AP's amplitude row onto the nonnegative
/// orthant intersected with the power-cap ball: golden-section search over
/// the radial scale of the clipped vector (the ray the projection must lie
/// on), refined to 1e-12.
[[nodiscard]] Arr brute_project_power_row(const Arr& y, double cap);

}  // namespace cfee
