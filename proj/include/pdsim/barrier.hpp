#pragma once

#include "pdsim/ccd.hpp"
#include "pdsim/pd_core.hpp"
#include "pdsim/world.hpp"

namespace pdsim {

enum class BarrierMode { NDB, DBB };

// A tracked primitive pair. Witness and normal are frozen at the safe state
// of the current step; the normal points from side 2 toward side 1 (from the
// triangle to the vertex for VT pairs).
struct CollisionPair {
  PrimitivePair prim;
  int life_span = 0;
  double weight = 0.0;
  Vec2 witness = Vec2::Zero();
  Vec3 normal = Vec3::UnitZ();
  double distance = 0.0;  // at the safe state (DBB: at the clamped state)
  bool active = false;    // last partial CCD verdict

  PairKind kind() const { return prim.kind; }
};

// Freezes witness, normal and distance at `x_safe` (world positions).
CollisionPair make_collision_pair(const PrimitivePair& prim, const Positions& x_safe);

// Separation of the witness points along the frozen normal at `x`.
double pair_gap(const CollisionPair& pair, const Positions& x);

// w = k K^a, capped at k K^64.
double ndb_weight(int life_span, double k, double K);

// Applies the last partial CCD verdicts: an active pair extends its life
// span, an inactive one resets it; weights follow ndb_weight.
void update_ndb_weights(std::vector<CollisionPair>& pairs, double k, double K);

// -kappa (d - d_hat)^2 ln(d / d_hat) below d_hat, zero above. Throws for d <= 0.
double dbb_weight(double d, double d_hat, double kappa);

// Positional targets for every pair that is closer than d_hat at `x` or is
// flagged active. Each side moves by its share of the deficit, spread over
// its vertices by barycentric participation. Only movable cloth vertices get
// targets. Returns the number of contributing pairs.
int collision_targets(const std::vector<CollisionPair>& pairs, const CollisionWorld& world, const Positions& x,
                       double d_hat, std::vector<CollisionTarget>& out);

}  // namespace pdsim
