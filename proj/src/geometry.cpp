#include "pdsim/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace pdsim {

TriangleClosest closest_point_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  TriangleClosest out;
  auto finish = [&](double v, double w) {
    out.lambda = Vec2(v, w);
    out.point = a + v * (b - a) + w * (c - a);
    out.dist2 = (p - out.point).squaredNorm();
    return out;
  };

  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return finish(0.0, 0.0);

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return finish(1.0, 0.0);

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return finish(d1 / (d1 - d3), 0.0);

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return finish(0.0, 1.0);

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return finish(0.0, d2 / (d2 - d6));

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return finish(1.0 - w, w);
  }

  const double denom = va + vb + vc;
  if (!(denom > 0.0)) {
    // Degenerate triangle: fall back to the closest of its three edges.
    TriangleClosest best;
    best.dist2 = std::numeric_limits<double>::infinity();
    const std::array<std::pair<Vec3, Vec3>, 3> segs{{{a, b}, {a, c}, {b, c}}};
    for (int k = 0; k < 3; ++k) {
      const auto& [s0, s1] = segs[k];
      const Vec3 d = s1 - s0;
      const double len2 = d.squaredNorm();
      const double t = len2 > 0.0 ? std::clamp((p - s0).dot(d) / len2, 0.0, 1.0) : 0.0;
      const double dist2 = (p - (s0 + t * d)).squaredNorm();
      if (dist2 < best.dist2) {
        best.dist2 = dist2;
        if (k == 0) best.lambda = Vec2(t, 0.0);
        if (k == 1) best.lambda = Vec2(0.0, t);
        if (k == 2) best.lambda = Vec2(1.0 - t, t);
      }
    }
    return finish(best.lambda[0], best.lambda[1]);
  }
  const double v = vb / denom;
  const double w = vc / denom;
  return finish(v, w);
}

SegmentClosest closest_segment_segment(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2) {
  const Vec3 d1 = q1 - p1;
  const Vec3 d2 = q2 - p2;
  const Vec3 r = p1 - p2;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  double s = 0.0;
  double t = 0.0;

  if (a <= 0.0 && e <= 0.0) {
    s = t = 0.0;
  } else if (a <= 0.0) {
    s = 0.0;
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= 0.0) {
      t = 0.0;
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      // Parallel (denom ~ 0): start from s = 0 and clamp.
      s = denom > 1e-14 * a * e ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  SegmentClosest out;
  out.s = s;
  out.t = t;
  out.c1 = p1 + s * d1;
  out.c2 = p2 + t * d2;
  out.dist2 = (out.c1 - out.c2).squaredNorm();
  return out;
}

}  // namespace pdsim
