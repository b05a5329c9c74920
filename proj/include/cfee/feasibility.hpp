#pragma once

#include <cstdint>
#include <vector>

#include "cfee/performance.hpp"
#include "cfee/surrogate.hpp"

namespace cfee {

/// Subgradient of the convexified penalty with respect to each variable block.
struct PenaltyGrad {
  Mat q;    ///< N x G
  Mat p;    ///< N x K
  Arr rho;  ///< K
};

/// Knobs of the penalty-minimization search.
struct FeasibilityOptions {
  int max_outer = 30;       ///< surrogate rebuilds
  int max_inner = 500;      ///< subgradient steps per rebuild
  double tol_improve = 1e-4;///< relative improvement gate (inner window, outer)
  int window = 10;          ///< inner improvement window [steps]
  int max_restarts = 5;     ///< jittered restarts after stagnation
  double jitter = 0.2;      ///< log-uniform amplitude jitter half-range
  std::uint64_t seed = 0;   ///< jitter RNG seed
};

enum class FeasibilityStatus {
  feasible,             ///< exact penalty vanished, all slacks nonnegative
  stationary,           ///< search stalled above zero after all restarts
  provably_infeasible,  ///< a UE's energy floor exceeds its received power at
                        ///< the full-power starting point
};

/// Search outcome; `alloc` is the best point found (feasible iff status says so).
struct FeasibilityResult {
  FeasibilityStatus status = FeasibilityStatus::stationary;
  PowerAllocation alloc;
  PerfReport report;
  int outer_iterations = 0;
  int restarts = 0;
  int infeasible_ue = -1;         ///< set for provably_infeasible
  std::vector<double> h_trace;    ///< exact penalty after each rebuild
};

/// Exact-model penalty: hinge sum of the multicast-rate, unicast-rate, energy
/// and backhaul violations (amplitude caps are handled by projection, not
/// penalized). `use_smooth_backhaul` swaps the exact stream indicator for the
/// smooth one.
[[nodiscard]] double penalty(const ChannelStats& stats, const SystemParams& params,
                             const PowerAllocation& v, bool use_smooth_backhaul);

/// Convex majorant of the smoothed penalty: rates and received powers from
/// the concave lower bounds, backhaul from the affine tangents. Equals the
/// smoothed penalty at the expansion point.
[[nodiscard]] double penalty_surrogate(const SurrogateCoeffs& c,
                                       const PowerAllocation& v);

/// One subgradient of penalty_surrogate at v (zero on inactive hinges).
[[nodiscard]] PenaltyGrad penalty_subgradient(const SurrogateCoeffs& c,
                                              const PowerAllocation& v);

/// Project onto the per-AP power caps: negative amplitudes clip to zero, each
/// AP row scales radially onto its cap when exceeded, and the splitters clip
/// to [1e-6, 1 - 1e-6].
void project_power(PowerAllocation& v, const SystemParams& params);

/// Zero every stream amplitude whose radiated power falls below the indicator
/// scale theta_w. The smooth backhaul model already discounts such streams to
/// (almost) nothing while the exact stream count charges them in full, so
/// snapping them realizes the load the smooth model promised.
void sparsify_streams(PowerAllocation& v, double theta_w);

/// Penalty minimization: start from the uniform full-power allocation with
/// energy-binding splits, alternate surrogate rebuilds with diminishing-step
/// subgradient descent, and restart with jittered amplitudes on stagnation.
[[nodiscard]] FeasibilityResult find_feasible(const ChannelStats& stats,
                                              const SystemParams& params,
                                              const FeasibilityOptions& opts);

}  // namespace cfee
