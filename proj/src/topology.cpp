#include "cfee/topology.hpp"

#include <cmath>
#include <random>

namespace cfee {

Topology generate_topology(const SystemParams& params, std::uint64_t seed) {
  const int n_ap = params.num_aps;
  const int n_ue = params.num_ues;
  const int n_gr = params.num_groups;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, params.area_side);
  std::normal_distribution<double> shadow(0.0, params.shadow_std_db);

  Topology topo;
  topo.ap_xy.resize(n_ap, 2);
  if (params.ap_grid) {
    // Regular grid at cell centers, row-major, first N positions.
    const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_ap))));
    const double cell = params.area_side / side;
    for (int n = 0; n < n_ap; ++n) {
      topo.ap_xy(n, 0) = (n % side + 0.5) * cell;
      topo.ap_xy(n, 1) = (n / side + 0.5) * cell;
    }
  } else {
    for (int n = 0; n < n_ap; ++n) {
      topo.ap_xy(n, 0) = unif(rng);
      topo.ap_xy(n, 1) = unif(rng);
    }
  }
  topo.ue_xy.resize(n_ue, 2);
  for (int k = 0; k < n_ue; ++k) {
    topo.ue_xy(k, 0) = unif(rng);
    topo.ue_xy(k, 1) = unif(rng);
  }

  topo.beta.resize(n_ap, n_ue);
  for (int n = 0; n < n_ap; ++n) {
    for (int k = 0; k < n_ue; ++k) {
      const double dx = topo.ap_xy(n, 0) - topo.ue_xy(k, 0);
      const double dy = topo.ap_xy(n, 1) - topo.ue_xy(k, 1);
      // Clamp below at the reference distance so the gain never exceeds the
      // shadowing factor alone.
      const double d = std::max(std::hypot(dx, dy), params.ref_distance);
      const double pl = std::pow(params.ref_distance / d, params.pathloss_exp);
      topo.beta(n, k) = pl * std::pow(10.0, shadow(rng) / 10.0);
    }
  }

  topo.groups.assign(n_gr, {});
  topo.group_of.resize(n_ue);
  for (int k = 0; k < n_ue; ++k) {
    const int g = k % n_gr;
    topo.groups[g].push_back(k);
    topo.group_of[k] = g;
  }
  return topo;
}

}  // namespace cfee
