#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfee/ee_solver.hpp"
#include "cfee/performance.hpp"

namespace cfee {

using Json = nlohmann::json;

/// Shortest stable decimal form used for every CSV cell ("%.12g", C locale),
/// so repeated runs produce byte-identical files.
[[nodiscard]] std::string format_double(double x);

[[nodiscard]] Json arr_to_json(const Arr& a);
[[nodiscard]] Json mat_to_json(const Mat& m);
[[nodiscard]] Arr arr_from_json(const Json& j);
[[nodiscard]] Mat mat_from_json(const Json& j);

[[nodiscard]] Json allocation_to_json(const PowerAllocation& v);
[[nodiscard]] PowerAllocation allocation_from_json(const Json& j);

/// Exact-model report plus per-family slacks.
[[nodiscard]] Json report_to_json(const PerfReport& r, const ConstraintSlacks& s);

/// Inner-iteration trace: one line per ascent step with the outer, ratio and
/// inner counters, the dual value, and the smoothed-model EE of the clamped
/// iterate (nats-scaled and in bits per joule) plus its exact-model violation.
[[nodiscard]] std::string trace_csv(const SolveTrace& trace);

/// One sweep sample: a solved (or failed) instance at one axis value.
struct SweepRow {
  std::string axis;
  double value = 0.0;
  std::uint64_t seed = 0;
  int status = 0;  ///< CLI exit semantics: 0 ok, 2 stationary, 3 infeasible, 4 no convergence
  double ee_bits_per_joule = 0.0;
  double ee_smooth_bits_per_joule = 0.0;
  double p_total_w = 0.0;
  double sum_rate_nats = 0.0;
  double min_slack = 0.0;
  int sca_rounds = 0;
  long inner_iterations = 0;
};

[[nodiscard]] std::string sweep_csv(const std::vector<SweepRow>& rows);

[[nodiscard]] std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace cfee
