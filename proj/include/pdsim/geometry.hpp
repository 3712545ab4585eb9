#pragma once

#include "pdsim/types.hpp"

namespace pdsim {

// Closest point on triangle (a, b, c) to p, q = a + l1 (b - a) + l2 (c - a).
struct TriangleClosest {
  Vec2 lambda = Vec2::Zero();
  Vec3 point = Vec3::Zero();
  double dist2 = 0.0;
};

TriangleClosest closest_point_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

// Closest points p1 + s (q1 - p1), p2 + t (q2 - p2). Parallel segments clamp
// to the endpoint-segment closest pair.
struct SegmentClosest {
  double s = 0.0;
  double t = 0.0;
  Vec3 c1 = Vec3::Zero();
  Vec3 c2 = Vec3::Zero();
  double dist2 = 0.0;
};

SegmentClosest closest_segment_segment(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2);

inline double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  return std::sqrt(closest_point_triangle(p, a, b, c).dist2);
}

inline double segment_segment_distance(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2) {
  return std::sqrt(closest_segment_segment(p1, q1, p2, q2).dist2);
}

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void expand(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void expand(const Aabb& o) {
    lo = lo.cwiseMin(o.lo);
    hi = hi.cwiseMax(o.hi);
  }
  void inflate(double d) {
    lo.array() -= d;
    hi.array() += d;
  }
  bool overlaps(const Aabb& o) const {
    return (lo.array() <= o.hi.array()).all() && (o.lo.array() <= hi.array()).all();
  }
  Vec3 center() const { return 0.5 * (lo + hi); }
};

}  // namespace pdsim
