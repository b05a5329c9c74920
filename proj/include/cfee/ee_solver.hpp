#pragma once

#include <chrono>
#include <vector>

#include "cfee/performance.hpp"
#include "cfee/surrogate.hpp"

namespace cfee {

/// Multipliers of the per-expansion concave dual plus the Dinkelbach ratio.
/// The dual domain couples the multicast families: for every group g,
/// sum_{k in g} lambda_m_bar[k] - lambda_m[g] = eta * prelog, all entries >= 0.
struct DualState {
  Arr lambda_m;      ///< per-group multicast floor multipliers (G)
  Arr lambda_m_bar;  ///< per-UE multicast rate-coupling multipliers (K)
  Arr lambda_u;      ///< per-UE unicast floor multipliers (K)
  Arr lambda_e;      ///< per-UE harvested-energy multipliers (K)
  Arr lambda_c;      ///< per-AP backhaul cap multipliers (N)
  Arr lambda_p;      ///< per-AP transmit power cap multipliers (N)
  double eta = 0.0;  ///< current power-per-rate ratio (W per bps/Hz-weighted nats)

  // Accelerated ascent bookkeeping: the previous pre-projection step and the
  // extrapolation weight sequence pi. With momentum disabled these are unused.
  Arr shadow_m, shadow_m_bar, shadow_u, shadow_e, shadow_c, shadow_p;
  double pi = 1.0;

  // Per-UE log-space bracket around the energy-multiplier fixed point,
  // maintained by its block refresh (+-1e300 marks an unknown side).
  Arr bracket_lo_e, bracket_hi_e;
};

/// Per-family partial derivatives of the dual function at a recovered primal
/// minimizer: (d_m, d_m_bar, d_u, d_e, d_c, d_p).
struct DualGradient {
  Arr d_m;      ///< G: multicast floor values r_m
  Arr d_m_bar;  ///< K: minus the per-UE multicast rate bound
  Arr d_u;      ///< K: unicast floor minus unicast rate bound
  Arr d_e;      ///< K: required split RF power minus the energy bound
  Arr d_c;      ///< N: backhaul load bound minus backhaul cap
  Arr d_p;      ///< N: transmit power minus per-AP cap
};

/// Stopping/iteration controls for the three solver layers.
struct SolverOptions {
  double tol_inner = 1e-4;  ///< relative dual-value change stop (inner ascent)
  double tol_dink = 1e-4;   ///< relative ratio change stop (ratio layer)
  double tol_sca = 1e-4;    ///< relative smoothed-EE change stop (outer layer)
  int max_iter_inner = 500;
  int max_iter_dink = 20;
  int max_iter_sca = 50;
  bool momentum = true;      ///< extrapolated ascent steps (plain when false)
  bool backtracking = false; ///< halve the step on dual-value decrease
  double step = 1.0;         ///< base ascent step size
  double kkt_target = 1e-5;  ///< if > 0, polish the terminal subproblem until
                             ///< the complementarity residual falls below this
};

/// One row per inner ascent iteration of one ratio pass of one outer round.
struct TraceRow {
  int sca_round = 0;       ///< outer expansion index t (1-based)
  int dinkelbach_iter = 0; ///< ratio pass index c (1-based)
  int inner_iter = 0;      ///< ascent step index s (1-based)
  double dual_value = 0.0;
  double eta = 0.0;
  double ee_nats = 0.0;          ///< smoothed-model EE in nats/s per W
  double ee_bits_per_joule = 0.0;///< smoothed-model EE in bits per joule
  double max_violation = 0.0;    ///< exact-model violation of the clamped iterate
  double wall_ms = 0.0;
};

/// Full solve trace plus the run-level health flags the tests assert on.
struct SolveTrace {
  std::vector<TraceRow> rows;
  std::vector<double> ee_per_round;   ///< smoothed EE (bits/J) of accepted rounds
  std::vector<double> eta_sequence;   ///< ratio value after each ratio pass
  int sca_rounds = 0;
  int max_dinkelbach_iterations = 0;
  long total_inner_iterations = 0;
  long clamped_entries = 0;      ///< negative amplitudes clamped at round ends
  bool eta_monotone = true;      ///< ratio nonincreasing within every round
  bool weak_duality_ok = true;   ///< dual value never exceeded the primal ref
  bool monotone_guard_tripped = false;
  bool converged = false;
  double final_kkt = 0.0;        ///< complementarity residual at the last pass
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
};

/// Result of one inner dual ascent run.
struct InnerResult {
  PowerAllocation v;  ///< recovered primal minimizer at the final multipliers
  DualState dual;
  int iterations = 0;
  double value = 0.0; ///< final dual value
  double kkt = 0.0;   ///< max |multiplier * constraint slack|
};

/// Result of one ratio-iteration pass over a fixed expansion.
struct DinkelbachResult {
  PowerAllocation v;
  DualState dual;
  double eta = 0.0;
  int iterations = 0;
  long inner_iterations = 0;
  double kkt = 0.0;
  bool eta_monotone = true;
  bool rate_sum_guard = false; ///< rate sum vanished; kept the previous ratio
};

/// Final allocation, exact-model report, and the full trace.
struct SolveResult {
  PowerAllocation v;
  PerfReport report;
  SolveTrace trace;
};

/// Multipliers at the listed starting point: the multicast coupling split
/// uniformly over each group, every other family at zero.
[[nodiscard]] DualState make_initial_dual(const SurrogateCoeffs& c, double eta);

/// Closed-form minimizer of the Lagrangian over amplitudes (per-group and
/// per-UE positive-definite solves) and splitters. Raw output: entries can be
/// negative, and rho is 1 where the energy multiplier vanishes.
[[nodiscard]] PowerAllocation recover_primal(const SurrogateCoeffs& c,
                                             const DualState& d);

/// Per-family dual partials at a recovered minimizer (splitters capped at
/// 1 - 1e-9 inside the energy family, matching dual_value).
[[nodiscard]] DualGradient dual_gradient(const SurrogateCoeffs& c,
                                         const PowerAllocation& v_min);

/// Lagrangian value at (v_min, d); equals the dual function when v_min is the
/// recovered minimizer for d.
[[nodiscard]] double dual_value(const SurrogateCoeffs& c, const DualState& d,
                                const PowerAllocation& v_min);

/// Surrogate objective: bound on total power minus eta * prelog * bound on
/// the weighted sum rate. Used as the weak-duality reference at v0.
[[nodiscard]] double surrogate_objective(const SurrogateCoeffs& c,
                                         const PowerAllocation& v, double eta);

/// Euclidean projection onto the dual domain: independent families clip at
/// zero; each group's coupled block is balanced by a scalar found by
/// bisection to |residual| < 1e-10.
[[nodiscard]] DualState project_dual(const DualState& raw, double eta_prime,
                                     const std::vector<std::vector<int>>& groups);

/// Coupling residual max_g |sum_{k in g} lambda_m_bar - lambda_m - eta'|.
[[nodiscard]] double coupling_residual(const DualState& d, double eta_prime,
                                       const std::vector<std::vector<int>>& groups);

/// One ascent step: gradient move of size nu, optional extrapolation against
/// the previous step, then projection. With momentum disabled the result is
/// bitwise the plain projected step.
[[nodiscard]] DualState momentum_step(const SurrogateCoeffs& c, const DualState& prev,
                                      const DualGradient& g, double nu, bool momentum);

/// Max |multiplier * constraint slack| over all six families at v_min.
[[nodiscard]] double kkt_residual(const SurrogateCoeffs& c, const DualState& d,
                                  const PowerAllocation& v_min);

/// Projected (accelerated) dual ascent to stationarity of the dual value.
/// obj_ref is a feasible primal objective value; every iterate is checked
/// against it for weak duality (recorded in the trace).
[[nodiscard]] InnerResult inner_solve(const SurrogateCoeffs& c, DualState dual,
                                      const SolverOptions& opts, double obj_ref,
                                      SolveTrace* trace, int sca_round);

/// Ratio layer: alternate inner dual solves with ratio updates
/// eta <- power bound / (prelog * rate-sum bound) until the ratio settles.
/// `warm`, when given, seeds the first pass's multipliers (re-projected onto
/// the coupling set of the pass ratio); later passes reuse their predecessor.
[[nodiscard]] DinkelbachResult dinkelbach_solve(const SurrogateCoeffs& c,
                                                double eta_init,
                                                const SolverOptions& opts,
                                                SolveTrace* trace, int sca_round,
                                                const DualState* warm = nullptr);

/// Outer loop: rebuild the surrogate at each accepted iterate, run the ratio
/// layer, clamp amplitudes, repair splitters to the energy-binding value, and
/// accept only EE-nondecreasing rounds. v0 must satisfy every constraint to
/// slack >= -1e-8 (throws infeasible_error otherwise).
[[nodiscard]] SolveResult solve(const ChannelStats& stats, const SystemParams& params,
                                const PowerAllocation& v0, const SolverOptions& opts);

}  // namespace cfee
