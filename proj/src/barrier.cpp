#include "pdsim/barrier.hpp"

#include <algorithm>
#include <cmath>

namespace pdsim {

namespace {

constexpr int kMaxLifeExponent = 64;

// Participation of each of the four pair vertices and its side (+1 side 1,
// -1 side 2).
void participation(const CollisionPair& p, double beta[4], int side[4]) {
  const Vec2& l = p.witness;
  if (p.kind() == PairKind::VertexTriangle) {
    beta[0] = 1.0;
    beta[1] = 1.0 - l[0] - l[1];
    beta[2] = l[0];
    beta[3] = l[1];
    side[0] = 1;
    side[1] = side[2] = side[3] = -1;
  } else {
    beta[0] = 1.0 - l[0];
    beta[1] = l[0];
    beta[2] = 1.0 - l[1];
    beta[3] = l[1];
    side[0] = side[1] = 1;
    side[2] = side[3] = -1;
  }
}

}  // namespace

CollisionPair make_collision_pair(const PrimitivePair& prim, const Positions& x_safe) {
  CollisionPair p;
  p.prim = prim;
  const PairPoints pts = gather(prim, x_safe);
  const PairProximity prox = pair_proximity(prim.kind, pts);
  p.witness = prox.lambda;
  p.distance = prox.distance;
  if (prox.distance > 0.0) {
    p.normal = -prox.diff / prox.distance;
  } else if (prim.kind == PairKind::VertexTriangle) {
    const Vec3 n = (pts.p[2] - pts.p[1]).cross(pts.p[3] - pts.p[1]);
    p.normal = n.norm() > 0.0 ? Vec3(n.normalized()) : Vec3::UnitZ();
  } else {
    const Vec3 n = (pts.p[1] - pts.p[0]).cross(pts.p[3] - pts.p[2]);
    p.normal = n.norm() > 0.0 ? Vec3(n.normalized()) : Vec3::UnitZ();
  }
  return p;
}

double pair_gap(const CollisionPair& pair, const Positions& x) {
  return -pair_difference(pair.kind(), gather(pair.prim, x), pair.witness).dot(pair.normal);
}

double ndb_weight(int life_span, double k, double K) {
  return k * std::pow(K, std::clamp(life_span, 0, kMaxLifeExponent));
}

void update_ndb_weights(std::vector<CollisionPair>& pairs, double k, double K) {
  if (!(k > 0.0) || !(K > 1.0)) throw Error("NDB needs k > 0 and K > 1");
  for (auto& p : pairs) {
    p.life_span = p.active ? p.life_span + 1 : 0;
    p.weight = ndb_weight(p.life_span, k, K);
  }
}

double dbb_weight(double d, double d_hat, double kappa) {
  if (!(d > 0.0)) throw Error("distance-based barrier evaluated at a non-positive distance (infeasible state)");
  if (d >= d_hat) return 0.0;
  const double g = d - d_hat;
  return -kappa * g * g * std::log(d / d_hat);
}

int collision_targets(const std::vector<CollisionPair>& pairs, const CollisionWorld& world, const Positions& x,
                      double d_hat, std::vector<CollisionTarget>& out) {
  out.clear();
  int contributing = 0;
  for (const auto& p : pairs) {
    if (!(p.weight > 0.0)) continue;
    const double gap = pair_gap(p, x);
    if (gap >= d_hat && !p.active) continue;
    const double deficit = std::max(d_hat - gap, 0.0);

    double beta[4];
    int side[4];
    participation(p, beta, side);
    bool side_moves[2] = {false, false};
    for (int i = 0; i < 4; ++i)
      if (world.movable[p.prim.v[i]] && beta[i] > 0.0) side_moves[side[i] > 0 ? 0 : 1] = true;
    const double share = side_moves[0] && side_moves[1] ? 0.5 : 1.0;
    ++contributing;

    for (int i = 0; i < 4; ++i) {
      const int v = p.prim.v[i];
      if (!world.movable[v] || !(beta[i] > 0.0)) continue;
      CollisionTarget t;
      t.vertex = v;
      t.weight = p.weight * beta[i];
      t.target = row3(x, v) + (side[i] * share * deficit) * p.normal;
      out.push_back(t);
    }
  }
  return contributing;
}

}  // namespace pdsim
