#include "pdsim/predicates.hpp"

#include <cmath>
#include <limits>

namespace pdsim {

namespace {

// Floating-point expansions (sum of non-overlapping doubles, increasing
// magnitude). Only used on the slow path, so plain vectors are fine.
using Expansion = std::vector<double>;

constexpr double kEps = std::numeric_limits<double>::epsilon() / 2.0;

inline void two_sum(double a, double b, double& x, double& y) {
  x = a + b;
  const double bv = x - a;
  const double av = x - bv;
  y = (a - av) + (b - bv);
}

inline void two_product(double a, double b, double& x, double& y) {
  x = a * b;
  y = std::fma(a, b, -x);
}

Expansion grow(const Expansion& e, double b) {
  Expansion h;
  h.reserve(e.size() + 1);
  double q = b;
  for (double ei : e) {
    double s, err;
    two_sum(q, ei, s, err);
    if (err != 0.0) h.push_back(err);
    q = s;
  }
  if (q != 0.0 || h.empty()) h.push_back(q);
  return h;
}

Expansion add(Expansion e, const Expansion& f) {
  for (double fi : f) e = grow(e, fi);
  return e;
}

Expansion negate(Expansion e) {
  for (double& v : e) v = -v;
  return e;
}

Expansion scale(const Expansion& e, double b) {
  Expansion h;
  h.reserve(2 * e.size());
  double q, err;
  two_product(e[0], b, q, err);
  if (err != 0.0) h.push_back(err);
  for (size_t i = 1; i < e.size(); ++i) {
    double t1, t0, s;
    two_product(e[i], b, t1, t0);
    two_sum(q, t0, s, err);
    if (err != 0.0) h.push_back(err);
    two_sum(t1, s, q, err);
    if (err != 0.0) h.push_back(err);
  }
  if (q != 0.0 || h.empty()) h.push_back(q);
  return h;
}

Expansion mul(const Expansion& e, const Expansion& f) {
  Expansion acc{0.0};
  for (double fi : f) acc = add(acc, scale(e, fi));
  return acc;
}

Expansion diff(double a, double b) {
  double x, y;
  two_sum(a, -b, x, y);
  if (y == 0.0) return {x};
  return {y, x};
}

int sign_of(const Expansion& e) {
  for (auto it = e.rbegin(); it != e.rend(); ++it)
    if (*it != 0.0) return *it > 0.0 ? 1 : -1;
  return 0;
}

int orient3d_exact(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  const Expansion ux = diff(b.x(), a.x()), uy = diff(b.y(), a.y()), uz = diff(b.z(), a.z());
  const Expansion vx = diff(c.x(), a.x()), vy = diff(c.y(), a.y()), vz = diff(c.z(), a.z());
  const Expansion wx = diff(d.x(), a.x()), wy = diff(d.y(), a.y()), wz = diff(d.z(), a.z());
  const Expansion m0 = add(mul(vy, wz), negate(mul(vz, wy)));
  const Expansion m1 = add(mul(vz, wx), negate(mul(vx, wz)));
  const Expansion m2 = add(mul(vx, wy), negate(mul(vy, wx)));
  const Expansion det = add(add(mul(ux, m0), mul(uy, m1)), mul(uz, m2));
  return sign_of(det);
}

int orient2d_exact(const Vec2& a, const Vec2& b, const Vec2& c) {
  const Expansion ux = diff(b.x(), a.x()), uy = diff(b.y(), a.y());
  const Expansion vx = diff(c.x(), a.x()), vy = diff(c.y(), a.y());
  return sign_of(add(mul(ux, vy), negate(mul(uy, vx))));
}

// Drop the coordinate where the plane normal is largest.
Vec2 drop_axis(const Vec3& p, int axis) {
  if (axis == 0) return {p.y(), p.z()};
  if (axis == 1) return {p.z(), p.x()};
  return {p.x(), p.y()};
}

bool on_segment_2d(const Vec2& p, const Vec2& a, const Vec2& b) {
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) && std::min(a.y(), b.y()) <= p.y() &&
         p.y() <= std::max(a.y(), b.y());
}

bool segments_intersect_2d(const Vec2& p, const Vec2& q, const Vec2& a, const Vec2& b) {
  const int o1 = orient2d(p, q, a);
  const int o2 = orient2d(p, q, b);
  const int o3 = orient2d(a, b, p);
  const int o4 = orient2d(a, b, q);
  if (o1 * o2 < 0 && o3 * o4 < 0) return true;
  if (o1 == 0 && on_segment_2d(a, p, q)) return true;
  if (o2 == 0 && on_segment_2d(b, p, q)) return true;
  if (o3 == 0 && on_segment_2d(p, a, b)) return true;
  if (o4 == 0 && on_segment_2d(q, a, b)) return true;
  return false;
}

bool point_in_triangle_2d(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
  const int o1 = orient2d(a, b, p);
  const int o2 = orient2d(b, c, p);
  const int o3 = orient2d(c, a, p);
  const bool has_neg = o1 < 0 || o2 < 0 || o3 < 0;
  const bool has_pos = o1 > 0 || o2 > 0 || o3 > 0;
  return !(has_neg && has_pos);
}

int dominant_axis(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 n = (b - a).cross(c - a);
  int axis = 0;
  n.cwiseAbs().maxCoeff(&axis);
  return axis;
}

bool coplanar_segment_triangle(const Vec3& p, const Vec3& q, const Vec3& a, const Vec3& b, const Vec3& c) {
  const int axis = dominant_axis(a, b, c);
  const Vec2 p2 = drop_axis(p, axis), q2 = drop_axis(q, axis);
  const Vec2 a2 = drop_axis(a, axis), b2 = drop_axis(b, axis), c2 = drop_axis(c, axis);
  if (point_in_triangle_2d(p2, a2, b2, c2) || point_in_triangle_2d(q2, a2, b2, c2)) return true;
  return segments_intersect_2d(p2, q2, a2, b2) || segments_intersect_2d(p2, q2, b2, c2) ||
         segments_intersect_2d(p2, q2, c2, a2);
}

}  // namespace

int orient3d(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  const double ux = b.x() - a.x(), uy = b.y() - a.y(), uz = b.z() - a.z();
  const double vx = c.x() - a.x(), vy = c.y() - a.y(), vz = c.z() - a.z();
  const double wx = d.x() - a.x(), wy = d.y() - a.y(), wz = d.z() - a.z();
  const double t0 = vy * wz, t1 = vz * wy;
  const double t2 = vz * wx, t3 = vx * wz;
  const double t4 = vx * wy, t5 = vy * wx;
  const double det = ux * (t0 - t1) + uy * (t2 - t3) + uz * (t4 - t5);
  const double perm = std::abs(ux) * (std::abs(t0) + std::abs(t1)) + std::abs(uy) * (std::abs(t2) + std::abs(t3)) +
                      std::abs(uz) * (std::abs(t4) + std::abs(t5));
  const double bound = (7.0 + 56.0 * kEps) * kEps * perm;
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return orient3d_exact(a, b, c, d);
}

int orient2d(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double l = (b.x() - a.x()) * (c.y() - a.y());
  const double r = (b.y() - a.y()) * (c.x() - a.x());
  const double det = l - r;
  const double bound = (3.0 + 16.0 * kEps) * kEps * (std::abs(l) + std::abs(r));
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return orient2d_exact(a, b, c);
}

bool segment_triangle_intersect(const Vec3& p, const Vec3& q, const Vec3& a, const Vec3& b, const Vec3& c) {
  const int o1 = orient3d(a, b, c, p);
  const int o2 = orient3d(a, b, c, q);
  if (o1 * o2 > 0) return false;
  if (o1 == 0 && o2 == 0) return coplanar_segment_triangle(p, q, a, b, c);
  // The segment reaches the plane; it hits the triangle iff the line through
  // it passes inside all three edges.
  const int s1 = orient3d(p, q, a, b);
  const int s2 = orient3d(p, q, b, c);
  const int s3 = orient3d(p, q, c, a);
  const bool has_neg = s1 < 0 || s2 < 0 || s3 < 0;
  const bool has_pos = s1 > 0 || s2 > 0 || s3 > 0;
  return !(has_neg && has_pos);
}

bool triangles_intersect(const Vec3& a0, const Vec3& a1, const Vec3& a2, const Vec3& b0, const Vec3& b1,
                         const Vec3& b2) {
  // Quick reject: all of one triangle strictly on one side of the other.
  const int p0 = orient3d(b0, b1, b2, a0), p1 = orient3d(b0, b1, b2, a1), p2 = orient3d(b0, b1, b2, a2);
  if ((p0 > 0 && p1 > 0 && p2 > 0) || (p0 < 0 && p1 < 0 && p2 < 0)) return false;
  const int q0 = orient3d(a0, a1, a2, b0), q1 = orient3d(a0, a1, a2, b1), q2 = orient3d(a0, a1, a2, b2);
  if ((q0 > 0 && q1 > 0 && q2 > 0) || (q0 < 0 && q1 < 0 && q2 < 0)) return false;

  return segment_triangle_intersect(a0, a1, b0, b1, b2) || segment_triangle_intersect(a1, a2, b0, b1, b2) ||
         segment_triangle_intersect(a2, a0, b0, b1, b2) || segment_triangle_intersect(b0, b1, a0, a1, a2) ||
         segment_triangle_intersect(b1, b2, a0, a1, a2) || segment_triangle_intersect(b2, b0, a0, a1, a2);
}

bool mesh_triangles_intersect(const Positions& x, const Tri& s, const Tri& t) {
  int shared = 0;
  int si[3], ti[3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (s[i] == t[j]) {
        si[shared] = i;
        ti[shared] = j;
        ++shared;
      }
  auto P = [&](int v) { return row3(x, v); };
  if (shared == 0) return triangles_intersect(P(s[0]), P(s[1]), P(s[2]), P(t[0]), P(t[1]), P(t[2]));
  if (shared >= 3) return true;  // duplicate triangle
  if (shared == 2) {
    const int so = s[3 - si[0] - si[1]];
    const int to = t[3 - ti[0] - ti[1]];
    const Vec3 e0 = P(s[si[0]]), e1 = P(s[si[1]]);
    if (orient3d(e0, e1, P(so), P(to)) != 0) return false;
    const int axis = dominant_axis(e0, e1, P(so));
    const Vec2 a = drop_axis(e0, axis), b = drop_axis(e1, axis);
    const int os = orient2d(a, b, drop_axis(P(so), axis));
    const int ot = orient2d(a, b, drop_axis(P(to), axis));
    return os * ot > 0;
  }
  // One shared vertex: the triangles overlap beyond it iff the edge opposite
  // the shared vertex in one triangle meets the other triangle.
  const int sv = s[si[0]];
  int sa = -1, sb = -1, ta = -1, tb = -1;
  for (int i = 0; i < 3; ++i) {
    if (s[i] != sv) (sa < 0 ? sa : sb) = s[i];
    if (t[i] != sv) (ta < 0 ? ta : tb) = t[i];
  }
  return segment_triangle_intersect(P(sa), P(sb), P(t[0]), P(t[1]), P(t[2])) ||
         segment_triangle_intersect(P(ta), P(tb), P(s[0]), P(s[1]), P(s[2]));
}

}  // namespace pdsim
