#include "pdsim/barrier.hpp"
#include "pdsim/broad_phase.hpp"
#include "pdsim/oracle.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <set>

using namespace pdtest;

namespace {

// Canonical form: VT keeps the vertex and sorts the triangle, EE sorts each
// edge and the edge pair.
std::array<int, 5> canon(const PrimitivePair& p) {
  if (p.kind == PairKind::VertexTriangle) {
    std::array<int, 3> t{p.v[1], p.v[2], p.v[3]};
    std::sort(t.begin(), t.end());
    return {0, p.v[0], t[0], t[1], t[2]};
  }
  std::array<int, 2> a{std::min(p.v[0], p.v[1]), std::max(p.v[0], p.v[1])};
  std::array<int, 2> b{std::min(p.v[2], p.v[3]), std::max(p.v[2], p.v[3])};
  if (b < a) std::swap(a, b);
  return {1, a[0], a[1], b[0], b[1]};
}

Aabb box_of(const Positions& x0, const Positions& x1, std::initializer_list<int> vs, double margin) {
  Aabb b;
  for (int v : vs) {
    b.expand(row3(x0, v));
    b.expand(row3(x1, v));
  }
  b.inflate(margin);
  return b;
}

// Independent O(n^2) swept-box oracle over all VT and EE pairs of the world.
std::set<std::array<int, 5>> brute(const CollisionWorld& w, const Positions& x0, const Positions& x1, double m) {
  std::set<std::array<int, 5>> out;
  std::set<std::pair<int, int>> edges;
  for (const auto& t : w.triangles)
    for (int k = 0; k < 3; ++k) edges.insert({std::min(t[k], t[(k + 1) % 3]), std::max(t[k], t[(k + 1) % 3])});
  auto keep = [&](std::array<int, 4> v, bool vt) {
    std::set<int> s(v.begin(), v.end());
    if (s.size() < 4) return false;
    bool any_movable = false;
    for (int i : v) any_movable |= w.movable[i] != 0;
    const bool side1 = vt ? w.obstacle[v[0]] : (w.obstacle[v[0]] && w.obstacle[v[1]]);
    const bool side2 = vt ? (w.obstacle[v[1]] && w.obstacle[v[2]] && w.obstacle[v[3]])
                          : (w.obstacle[v[2]] && w.obstacle[v[3]]);
    return any_movable && !(side1 && side2);
  };
  for (int v = 0; v < w.vertex_count(); ++v)
    for (const auto& t : w.triangles) {
      if (!keep({v, t[0], t[1], t[2]}, true)) continue;
      if (box_of(x0, x1, {v}, m).overlaps(box_of(x0, x1, {t[0], t[1], t[2]}, m)))
        out.insert(canon({PairKind::VertexTriangle, {v, t[0], t[1], t[2]}}));
    }
  for (auto e = edges.begin(); e != edges.end(); ++e)
    for (auto f = std::next(e); f != edges.end(); ++f) {
      if (!keep({e->first, e->second, f->first, f->second}, false)) continue;
      if (box_of(x0, x1, {e->first, e->second}, m).overlaps(box_of(x0, x1, {f->first, f->second}, m)))
        out.insert(canon({PairKind::EdgeEdge, {e->first, e->second, f->first, f->second}}));
    }
  return out;
}

Obstacle floor_quad(double y, double half, int cells) {
  const ObjMesh q = quad_mesh(Vec3(0.5, y, 0.5), 2 * half, 2 * half, cells);
  return {"floor", q.vertices, q.triangles, {}};
}

}  // namespace

TEST_CASE("broad phase is a superset of the brute-force swept-box oracle") {
  std::mt19937_64 rng(17);
  // 6x6 grid = 50 triangles, crumpled, plus an obstacle.
  for (int round = 0; round < 8; ++round) {
    const std::vector<int> pins{0};
    ClothMesh cloth = grid(6, 6, 1.0, 1.0, 0.3, pins);
    REQUIRE(cloth.triangle_count() == 50);
    const std::vector<Obstacle> obs{floor_quad(-0.05, 0.6, 2)};
    const CollisionWorld w = make_world(cloth, obs);
    Positions x0 = world_positions(w, cloth.rest_positions, obs, 0.0);
    Positions x1 = x0;
    for (int v = 0; v < cloth.vertex_count(); ++v) {
      x0.row(v) += 0.15 * random_vec(rng).transpose();
      x1.row(v) = x0.row(v) + 0.2 * random_vec(rng).transpose();
    }
    const double margin = round % 2 ? 1e-3 : 0.02;
    PatchBVH bvh(w);
    const auto got = broad_phase(w, bvh, x0, x1, margin);
    std::set<std::array<int, 5>> have;
    for (const auto& p : got) have.insert(canon(p));
    CHECK(have.size() == got.size());
    const auto want = brute(w, x0, x1, margin);
    for (const auto& p : want) CHECK(have.count(p) == 1);
    // The library reference agrees with the independent one.
    std::set<std::array<int, 5>> ref;
    for (const auto& p : broad_phase_brute_force(w, x0, x1, margin)) ref.insert(canon(p));
    CHECK(ref == want);
    // Nothing sharing a vertex, nothing obstacle-only.
    for (const auto& p : got) {
      CHECK(std::set<int>(p.v.begin(), p.v.end()).size() == 4);
      bool movable = false;
      for (int v : p.v) movable |= w.movable[v] != 0;
      CHECK(movable);
    }
  }
}

TEST_CASE("broad phase examples") {
  Positions v(6, 3);
  v << 0, 0, 0, 1, 0, 0, 0, 1, 0, 10, 0, 0, 11, 0, 0, 10, 1, 0;
  const std::vector<Tri> t{{0, 1, 2}, {3, 4, 5}};
  const ClothMesh m = build_mesh(v, t, 1.0);
  const CollisionWorld w = make_world(m, {});
  PatchBVH bvh(w);
  CHECK(broad_phase(w, bvh, v, v, 1e-3).empty());

  // Vertex 3 shot through triangle 0.
  Positions a = v, b = v;
  a.row(3) << 0.2, 0.2, -1;
  b.row(3) << 0.2, 0.2, 1;
  const auto pairs = broad_phase(w, bvh, a, b, 1e-3);
  const PrimitivePair want{PairKind::VertexTriangle, {3, 0, 1, 2}};
  CHECK(std::find(pairs.begin(), pairs.end(), want) != pairs.end());
}

TEST_CASE("patch BVH invariants") {
  std::mt19937_64 rng(5);
  const ClothMesh cloth = grid(17, 13);
  const CollisionWorld w = make_world(cloth, {});
  PatchBVH bvh(w);
  std::vector<int> seen(w.triangle_count(), 0);
  for (int p = 0; p < bvh.patch_count(); ++p) {
    const auto tris = bvh.patch(p);
    CHECK(tris.size() >= 1);
    CHECK(tris.size() <= 8);
    for (int t : tris) {
      ++seen[t];
      CHECK(bvh.patch_of(t) == p);
    }
  }
  for (int s : seen) CHECK(s == 1);
  // Most patches reach the 5-8 range on a regular grid.
  int sized = 0;
  for (int p = 0; p < bvh.patch_count(); ++p) sized += bvh.patch(p).size() >= 5;
  CHECK(sized >= 0.8 * bvh.patch_count());

  const Positions x0 = cloth.rest_positions + 0.05 * random_positions(cloth.vertex_count(), rng);
  const Positions x1 = x0 + 0.05 * random_positions(cloth.vertex_count(), rng);
  bvh.refit(w, x0, x1, 1e-3);
  const auto& nodes = bvh.nodes();
  auto contains = [](const Aabb& outer, const Aabb& inner) {
    return (outer.lo.array() <= inner.lo.array()).all() && (inner.hi.array() <= outer.hi.array()).all();
  };
  for (const auto& n : nodes) {
    if (n.patch >= 0) {
      for (int t : bvh.patch(n.patch)) {
        const auto& tri = w.triangles[t];
        CHECK(contains(n.box, box_of(x0, x0, {tri[0], tri[1], tri[2]}, 0.0)));
        CHECK(contains(n.box, box_of(x1, x1, {tri[0], tri[1], tri[2]}, 0.0)));
        CHECK(contains(n.box, bvh.triangle_boxes()[t]));
      }
    } else {
      CHECK(contains(n.box, nodes[n.left].box));
      CHECK(contains(n.box, nodes[n.right].box));
    }
  }
}

TEST_CASE("NDB weights") {
  CHECK(ndb_weight(0, 1.0, 2.0) == 1.0);
  CHECK(ndb_weight(10, 1.0, 2.0) == 1024.0);
  CHECK(ndb_weight(500, 1.0, 2.0) == std::ldexp(1.0, 64));
  std::vector<CollisionPair> pairs(1);
  pairs[0].active = true;
  double prev = 0.0;
  for (int it = 0; it < 20; ++it) {
    update_ndb_weights(pairs, 3.0, 2.0);
    CHECK(pairs[0].life_span == it + 1);
    CHECK(pairs[0].weight > prev);
    prev = pairs[0].weight;
  }
  pairs[0].active = false;
  update_ndb_weights(pairs, 3.0, 2.0);
  CHECK(pairs[0].life_span == 0);
  CHECK(pairs[0].weight == 3.0);
  CHECK_THROWS_AS(update_ndb_weights(pairs, 0.0, 2.0), Error);
  CHECK_THROWS_AS(update_ndb_weights(pairs, 1.0, 1.0), Error);
}

TEST_CASE("DBB weights") {
  const double d_hat = 1e-3, kappa = 5.0;
  CHECK(dbb_weight(d_hat, d_hat, kappa) == 0.0);
  CHECK(dbb_weight(2 * d_hat, d_hat, kappa) == 0.0);
  CHECK_THROWS_AS(dbb_weight(0.0, d_hat, kappa), Error);
  CHECK_THROWS_AS(dbb_weight(-1e-4, d_hat, kappa), Error);
  double prev = 0.0;
  for (double d = 0.1 * d_hat; d > 1e-300; d *= 0.1) {
    const double w = dbb_weight(d, d_hat, kappa);
    CHECK(w > prev);
    prev = w;
  }
  CHECK(prev > 1e-4);
}

TEST_CASE("collision pairs freeze witness and normal") {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 200; ++k) {
    Positions x = random_positions(4, rng);
    const PairKind kind = k % 2 ? PairKind::EdgeEdge : PairKind::VertexTriangle;
    const CollisionPair p = make_collision_pair({kind, {0, 1, 2, 3}}, x);
    const Vec2& l = p.witness;
    CHECK(l.minCoeff() >= 0.0);
    if (kind == PairKind::VertexTriangle)
      CHECK(l.sum() <= 1.0 + 1e-12);
    else
      CHECK(l.maxCoeff() <= 1.0);
    CHECK(pair_gap(p, x) == doctest::Approx(p.distance).epsilon(1e-12));
    CHECK(p.normal.norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("collision targets push pairs out to the tolerance") {
  const double d_hat = 1e-3;
  SUBCASE("vertex over an obstacle triangle") {
    Positions v(3, 3);
    v << 0, 0, 0, 1, 0, 0, 0, 0, 1;
    const std::vector<Tri> t{{0, 1, 2}};
    const ClothMesh cloth = build_mesh(v, t, 1.0);
    Obstacle o{"tri", Positions(3, 3), {{0, 1, 2}}, {}};
    o.rest << -1, -5e-4, -1, 3, -5e-4, -1, -1, -5e-4, 3;
    const CollisionWorld w = make_world(cloth, {o});
    const Positions x = world_positions(w, v, {o}, 0.0);
    CollisionPair p = make_collision_pair({PairKind::VertexTriangle, {0, 3, 4, 5}}, x);
    p.weight = 2.0;
    std::vector<CollisionTarget> out;
    CHECK(collision_targets({p}, w, x, d_hat, out) == 1);
    REQUIRE(out.size() == 1);
    CHECK(out[0].vertex == 0);
    CHECK(out[0].weight == 2.0);
    CHECK(out[0].target.y() == doctest::Approx(5e-4).epsilon(1e-9));
    // Far enough and inactive: no target.
    Positions far = x;
    far(0, 1) = 0.01;
    CHECK(collision_targets({p}, w, far, d_hat, out) == 0);
  }
  SUBCASE("symmetric edge-edge pair") {
    Positions v(6, 3);
    v << -1, 0, 0, 1, 0, 0, 0, -0.5, -1, 0, 4e-4, -1, 0, 4e-4, 1, 0.1, 0.1, 1;
    // Two triangles carrying edges (0,1) and (3,4).
    const std::vector<Tri> t{{0, 1, 2}, {3, 4, 5}};
    const Positions x = v;
    const ClothMesh cloth = build_mesh(x, t, 1.0);
    const CollisionWorld w = make_world(cloth, {});
    CollisionPair p = make_collision_pair({PairKind::EdgeEdge, {0, 1, 3, 4}}, x);
    p.weight = 1.0;
    std::vector<CollisionTarget> out;
    collision_targets({p}, w, x, d_hat, out);
    Vec3 side1 = Vec3::Zero(), side2 = Vec3::Zero();
    for (const auto& c : out) {
      const Vec3 d = c.weight * (c.target - row3(x, c.vertex));
      (c.vertex == 0 || c.vertex == 1 ? side1 : side2) += d;
    }
    CHECK((side1 + side2).norm() < 1e-15);
    CHECK(side1.norm() > 0.0);
  }
}

TEST_CASE("TOI-clamped states pass the intersection oracle") {
  std::mt19937_64 rng(99);
  int impacts = 0;
  for (int round = 0; round < 12; ++round) {
    const ClothMesh cloth = grid(12, 12);
    const std::vector<Obstacle> obs{floor_quad(-0.1, 0.8, 4)};
    const CollisionWorld w = make_world(cloth, obs);
    const Positions x0 = world_positions(w, cloth.rest_positions, obs, 0.0);
    Positions x1 = x0;
    // Large random motion: self collisions and a push through the floor.
    for (int v = 0; v < cloth.vertex_count(); ++v)
      x1.row(v) += (0.3 * random_vec(rng) - Vec3(0, 0.15, 0)).transpose();
    PatchBVH bvh(w);
    const auto cand = broad_phase(w, bvh, x0, x1, 1e-3);
    const ToiResult r = global_toi(cand, x0, x1, 0.8);
    impacts += r.impacts > 0;
    const Positions x = x0 + r.toi * (x1 - x0);
    CHECK(oracle_intersect(w, x).empty());
  }
  CHECK(impacts == 12);
}
