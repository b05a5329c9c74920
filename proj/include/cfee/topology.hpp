#pragma once

#include <cstdint>
#include <vector>

#include "cfee/params.hpp"

namespace cfee {

// ===========================================================================
// Topology: AP/UE positions, large-scale gains, and the multicast grouping.
// Deterministic given (params, seed).
// ===========================================================================
struct Topology {
  Mat ap_xy;  ///< N x 2 [m]
  Mat ue_xy;  ///< K x 2 [m]
  Mat beta;   ///< N x K large-scale gains (pathloss x shadowing), unitless

  std::vector<std::vector<int>> groups;  ///< G member lists (round-robin)
  std::vector<int> group_of;             ///< K -> group index
};

/// Generate a topology: positions i.i.d. uniform on [0, D]^2 (or a grid for
/// the APs when params.ap_grid), beta = (d0/d)^pathloss_exp * 10^(eps/10)
/// with eps ~ N(0, shadow_std^2) and distances clamped below at d0.
/// Group assignment is round-robin by UE index: UE k -> group k mod G.
[[nodiscard]] Topology generate_topology(const SystemParams& params, std::uint64_t seed);

}  // namespace cfee
