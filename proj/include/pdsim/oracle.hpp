#pragma once

#include "pdsim/ccd.hpp"
#include "pdsim/subspace.hpp"
#include "pdsim/world.hpp"

#include <optional>

namespace pdsim {

// All intersecting triangle pairs of the world at x (exact predicates).
// Obstacle-obstacle pairs are skipped. With `prefilter` the candidate pairs
// come from a sweep over closed bounding boxes, which never drops an
// intersecting pair; without it every pair is tested.
std::vector<std::pair<int, int>> oracle_intersect(const CollisionWorld& world, const Positions& x,
                                                  bool prefilter = true);

// Dense time sampling of the signed pair distance with bisection refinement
// and an inside check. Returns the earliest confirmed crossing.
std::optional<double> oracle_ccd(PairKind kind, const PairPoints& x0, const PairPoints& x1, int substeps = 4096);

// |U_m^T r| for the first `modes` basis vectors (row norm over x, y, z).
std::vector<double> spectrum_report(const Subspace& sub, const Positions& residual, int modes);

// Linear pair trajectory with the quantities the sample bound needs: H0 the
// closest distance at t = 0, H1 the largest corner separation at t = 0 or 1
// (the pair difference is affine in lambda and t, so this bounds it over the
// whole step), L the longest primitive edge at t = 0 or 1.
struct Trajectory {
  PairKind kind = PairKind::VertexTriangle;
  PairPoints x0, x1;
  double H0 = 0.0, H1 = 0.0, L = 0.0;
};

struct TrajectoryParams {
  double h0_min = 0.05, h0_max = 0.5;
  double l_min = 0.05, l_max = 1.0;
  double max_jitter = 0.1;    // per-vertex random displacement bound
  double max_approach = 2.5;  // closing displacement, in units of H0
};

void trajectory_bounds(Trajectory& t);

// Random VT and EE trajectories (alternating) with H0 in [h0_min, h0_max] and
// L <= l_max. Deterministic for a seed.
std::vector<Trajectory> random_trajectories(int count, std::uint64_t seed, const TrajectoryParams& params = {});

}  // namespace pdsim
