#include "pdsim/ccd.hpp"
#include "pdsim/oracle.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <type_traits>

using namespace pdtest;

namespace {

PairPoints pts(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) { return {{a, b, c, d}}; }

// Vertex (0,0,-1) -> (0,0,1) through a static triangle in z = 0.
const PairPoints kCrossStart = pts({0.2, 0.2, -1}, {0, 0, 0}, {1, 0, 0}, {0, 1, 0});
const PairPoints kCrossEnd = pts({0.2, 0.2, 1}, {0, 0, 0}, {1, 0, 0}, {0, 1, 0});

PairPoints lerp(const PairPoints& a, const PairPoints& b, double t) {
  PairPoints o;
  for (int i = 0; i < 4; ++i) o.p[i] = (1 - t) * a.p[i] + t * b.p[i];
  return o;
}

}  // namespace

TEST_CASE("closest point on triangle against dense sampling") {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 300; ++k) {
    const Vec3 a = random_vec(rng), b = random_vec(rng), c = random_vec(rng), p = random_vec(rng, 2.0);
    const TriangleClosest cp = closest_point_triangle(p, a, b, c);
    CHECK(cp.lambda[0] >= 0.0);
    CHECK(cp.lambda[1] >= 0.0);
    CHECK(cp.lambda[0] + cp.lambda[1] <= 1.0 + 1e-12);
    CHECK((a + cp.lambda[0] * (b - a) + cp.lambda[1] * (c - a) - cp.point).norm() < 1e-12);
    double best = std::numeric_limits<double>::infinity();
    const int m = 60;
    for (int i = 0; i <= m; ++i)
      for (int j = 0; i + j <= m; ++j) {
        const Vec3 q = a + (double(i) / m) * (b - a) + (double(j) / m) * (c - a);
        best = std::min(best, (q - p).squaredNorm());
      }
    CHECK(cp.dist2 <= best + 1e-12);
  }
}

TEST_CASE("closest points between segments against dense sampling") {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 300; ++k) {
    const Vec3 p1 = random_vec(rng), q1 = random_vec(rng), p2 = random_vec(rng);
    // Every fifth pair is parallel.
    const Vec3 q2 = k % 5 == 0 ? Vec3(p2 + 0.7 * (q1 - p1)) : random_vec(rng);
    const SegmentClosest sc = closest_segment_segment(p1, q1, p2, q2);
    CHECK(sc.s >= 0.0);
    CHECK(sc.s <= 1.0);
    CHECK(sc.t >= 0.0);
    CHECK(sc.t <= 1.0);
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 200; ++i)
      for (int j = 0; j <= 200; ++j)
        best = std::min(best, ((p1 + (i / 200.0) * (q1 - p1)) - (p2 + (j / 200.0) * (q2 - p2))).squaredNorm());
    CHECK(sc.dist2 <= best + 1e-12);
  }
}

TEST_CASE("full_ccd examples") {
  const auto t = full_ccd(PairKind::VertexTriangle, kCrossStart, kCrossEnd);
  REQUIRE(t.has_value());
  CHECK(*t == doctest::Approx(0.5).epsilon(1e-9));

  // Parallel edges sliding past each other at constant gap.
  const PairPoints e0 = pts({0, 0, 0}, {1, 0, 0}, {0, 0.1, 0.2}, {1, 0.1, 0.2});
  const PairPoints e1 = pts({0.5, 0, 0}, {1.5, 0, 0}, {-0.5, 0.1, 0.2}, {0.5, 0.1, 0.2});
  CHECK_FALSE(full_ccd(PairKind::EdgeEdge, e0, e1).has_value());

  // Crossing edges meet halfway.
  const PairPoints c0 = pts({-1, 0, -0.5}, {1, 0, -0.5}, {0, -1, 0.5}, {0, 1, 0.5});
  const PairPoints c1 = pts({-1, 0, 0.5}, {1, 0, 0.5}, {0, -1, -0.5}, {0, 1, -0.5});
  const auto te = full_ccd(PairKind::EdgeEdge, c0, c1);
  REQUIRE(te.has_value());
  CHECK(*te == doctest::Approx(0.5).epsilon(1e-9));

  // Vertex passing beside the triangle.
  PairPoints miss0 = kCrossStart, miss1 = kCrossEnd;
  miss0.p[0].x() = miss1.p[0].x() = 1.5;
  CHECK_FALSE(full_ccd(PairKind::VertexTriangle, miss0, miss1).has_value());
}

TEST_CASE("full_ccd agrees with dense time sampling on 1e5 random trajectories") {
  TrajectoryParams prm;
  prm.max_approach = 3.0;
  const auto corpus = random_trajectories(100000, 77, prm);
  int hits = 0, missed = 0, extra = 0, off = 0;
  double worst = 0.0;
  for (const auto& tr : corpus) {
    const auto f = full_ccd(tr.kind, tr.x0, tr.x1);
    const auto o = oracle_ccd(tr.kind, tr.x0, tr.x1, 4096);
    if (o) ++hits;
    if (o && !f) ++missed;
    if (f && !o) ++extra;
    if (f && o) {
      const double e = std::abs(*f - *o);
      worst = std::max(worst, e);
      if (e > 1.0 / 2048) ++off;
    }
  }
  INFO("hits " << hits << " worst toi error " << worst);
  CHECK(hits > 20000);
  CHECK(missed == 0);
  CHECK(extra == 0);
  CHECK(off == 0);
}

TEST_CASE("global_toi examples") {
  // One VT pair on a 4-vertex world: vertex 0 crosses triangle (1, 2, 3).
  Positions x0(4, 3), x1(4, 3);
  for (int i = 0; i < 4; ++i) {
    x0.row(i) = kCrossStart.p[i].transpose();
    x1.row(i) = kCrossEnd.p[i].transpose();
  }
  const PrimitivePair pair{PairKind::VertexTriangle, {0, 1, 2, 3}};
  CHECK(global_toi({}, x0, x1, 0.8).toi == 1.0);
  const ToiResult r = global_toi({pair}, x0, x1, 0.8);
  CHECK(r.toi == doctest::Approx(0.4).epsilon(1e-9));
  CHECK(r.raw == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(r.impacts == 1);
  CHECK(r.first_pair == 0);
  // Impact at the start.
  Positions touch = x0;
  touch(0, 2) = 0.0;
  CHECK(global_toi({pair}, touch, x1, 0.8).toi == 0.0);
}

TEST_CASE("query_Q examples") {
  const PairPoints s0 = pts({0.2, 0.2, 1}, {0, 0, 0}, {1, 0, 0}, {0, 1, 0});
  // Static pair with gap 1: Q = 1 at the foot point, |d|^2 >= 1 elsewhere.
  CHECK(query_Q(PairKind::VertexTriangle, s0, s0, Vec2(0.2, 0.2)) == doctest::Approx(1.0).epsilon(1e-15));
  for (const Vec2 l : {Vec2(0.1, 0.1), Vec2(0.5, 0.2), Vec2(0, 1)})
    CHECK(query_Q(PairKind::VertexTriangle, s0, s0, l) >= 1.0);
  // Crossing pair at the foot of the vertex.
  CHECK(query_Q(PairKind::VertexTriangle, kCrossStart, kCrossEnd, Vec2(0.2, 0.2)) ==
        doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("Q at the impact witness follows the linear-motion identity") {
  const auto corpus = random_trajectories(4000, 5);
  int checked = 0;
  for (const auto& tr : corpus) {
    const auto t = full_ccd(tr.kind, tr.x0, tr.x1);
    if (!t || *t < 0.05) continue;
    const PairProximity at = pair_proximity(tr.kind, lerp(tr.x0, tr.x1, *t));
    CHECK(at.distance < 1e-6);
    const Vec3 d0 = pair_difference(tr.kind, tr.x0, at.lambda);
    const double want = (*t - 1.0) / *t * d0.squaredNorm();
    const double got = query_Q(tr.kind, tr.x0, tr.x1, at.lambda);
    CHECK(std::abs(got - want) <= 1e-5 * (1.0 + std::abs(want)) / *t);
    ++checked;
  }
  CHECK(checked > 500);
}

TEST_CASE("partial_ccd examples and return type") {
  static_assert(std::is_same_v<decltype(partial_ccd(PairKind::VertexTriangle, kCrossStart, kCrossEnd,
                                                    std::declval<const SampleSet&>())),
                               bool>);
  const SampleSet s3 = make_sample_set(PairKind::VertexTriangle, 3, false);
  // The 3-point pattern sits around the centroid; move the vertex through it.
  PairPoints a = kCrossStart, b = kCrossEnd;
  a.p[0] = Vec3(1.0 / 3, 1.0 / 3, -1);
  b.p[0] = Vec3(1.0 / 3, 1.0 / 3, 1);
  CHECK(partial_ccd(PairKind::VertexTriangle, a, b, s3));
  // Receding.
  const PairPoints r0 = pts({0.3, 0.3, 0.1}, {0, 0, 0}, {1, 0, 0}, {0, 1, 0});
  const PairPoints r1 = pts({0.3, 0.3, 0.6}, {0, 0, -0.1}, {1, 0, -0.1}, {0, 1, -0.1});
  for (int n : {1, 3, 6, 15}) {
    const SampleSet s = make_sample_set(PairKind::VertexTriangle, n);
    const Vec2 proj = pair_proximity(PairKind::VertexTriangle, r0).lambda;
    CHECK_FALSE(partial_ccd(PairKind::VertexTriangle, r0, r1, s, &proj));
    for (const Vec2& l : s.points) CHECK(query_Q(PairKind::VertexTriangle, r0, r1, l) > 0.0);
  }
}

TEST_CASE("sample sets stay in the domain and report their interval") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (PairKind kind : {PairKind::VertexTriangle, PairKind::EdgeEdge}) {
    for (int n : {1, 3, 6, 10, 12}) {
      const SampleSet s = make_sample_set(kind, n);
      CHECK(s.interval > 0.0);
      for (const Vec2& p : s.points) {
        CHECK(p.minCoeff() >= 0.0);
        CHECK(p.maxCoeff() <= 1.0);
        if (kind == PairKind::VertexTriangle) CHECK(p.sum() <= 1.0 + 1e-15);
      }
      // Random domain points are never farther than the interval.
      for (int k = 0; k < 2000; ++k) {
        Vec2 q(U(rng), U(rng));
        if (kind == PairKind::VertexTriangle && q.sum() > 1.0) q = Vec2(1.0 - q[0], 1.0 - q[1]);
        double best = std::numeric_limits<double>::infinity();
        for (const Vec2& p : s.points) best = std::min(best, (p - q).norm());
        CHECK(best <= s.interval + 1e-12);
      }
    }
    for (double rho : {0.2, 0.05, 0.01}) {
      const SampleSet l = make_lattice_samples(kind, rho);
      CHECK(l.interval <= rho);
      // The estimator is an upper bound with its own grid slack.
      CHECK(sample_interval(kind, l.points) <= rho + 1.0 / (128.0 * std::sqrt(2.0)) + 1e-12);
      for (int k = 0; k < 2000; ++k) {
        Vec2 q(U(rng), U(rng));
        if (kind == PairKind::VertexTriangle && q.sum() > 1.0) q = Vec2(1.0 - q[0], 1.0 - q[1]);
        double best = std::numeric_limits<double>::infinity();
        for (const Vec2& p : l.points) best = std::min(best, (p - q).norm());
        CHECK(best <= l.interval + 1e-12);
      }
    }
  }
}

TEST_CASE("sample_bound examples") {
  CHECK(sample_bound(0.1, 0.2, 1.0, 0.8) == doctest::Approx(4.018e-4).epsilon(1e-3));
  const double direct = (1.0 / 0.8 - 1.0) * 0.01 / (2.0 * std::sqrt(2.0) * 1.0 * (0.2 + 2.0));
  CHECK(sample_bound(0.1, 0.2, 1.0, 0.8) == doctest::Approx(direct).epsilon(1e-15));
  CHECK(sample_bound(0.1, 0.2, 1.0, 1.0 - 1e-12) < 1e-14);
  CHECK(sample_bound(0.2, 0.2, 1.0, 0.8) == doctest::Approx(4.0 * sample_bound(0.1, 0.2, 1.0, 0.8)).epsilon(1e-14));
}

TEST_CASE("gradient of Q stays below the bound behind the sample interval") {
  // Numeric maximization of |grad Q| over the domain for random trajectories.
  TrajectoryParams prm;
  prm.max_jitter = 0.3;
  const auto corpus = random_trajectories(10000, 91, prm);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double worst_ratio = 0.0;
  for (const auto& tr : corpus) {
    const double bound = 2.0 * std::sqrt(2.0) * tr.L * (tr.H1 + 2.0 * tr.L);
    double gmax = 0.0;
    for (int k = 0; k < 8; ++k) {
      Vec2 l(U(rng), U(rng));
      if (tr.kind == PairKind::VertexTriangle && l.sum() > 1.0) l = Vec2(1.0 - l[0], 1.0 - l[1]);
      // Q is quadratic in lambda, so central differences are exact up to round-off.
      const double e = 1e-4;
      Vec2 g;
      for (int c = 0; c < 2; ++c) {
        Vec2 lp = l, lm = l;
        lp[c] += e;
        lm[c] -= e;
        g[c] = (query_Q(tr.kind, tr.x0, tr.x1, lp) - query_Q(tr.kind, tr.x0, tr.x1, lm)) / (2 * e);
      }
      gmax = std::max(gmax, g.norm());
    }
    worst_ratio = std::max(worst_ratio, gmax / bound);
  }
  INFO("largest |grad Q| / bound = " << worst_ratio);
  CHECK(worst_ratio <= 1.0);
}
