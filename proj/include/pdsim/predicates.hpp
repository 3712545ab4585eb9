#pragma once

#include "pdsim/types.hpp"

namespace pdsim {

// Sign of det[b-a, c-a, d-a]: positive when d lies on the side of the plane
// (a, b, c) that (b - a) x (c - a) points to. Exact for all double inputs.
int orient3d(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

// Sign of det[b-a, c-a] in 2D, positive for counter-clockwise (a, b, c). Exact.
int orient2d(const Vec2& a, const Vec2& b, const Vec2& c);

// Closed segment vs closed triangle, exact.
bool segment_triangle_intersect(const Vec3& p, const Vec3& q, const Vec3& a, const Vec3& b, const Vec3& c);

// Closed triangle vs closed triangle, exact. Triangles must be non-degenerate.
bool triangles_intersect(const Vec3& a0, const Vec3& a1, const Vec3& a2, const Vec3& b0, const Vec3& b1,
                         const Vec3& b2);

// Intersection test for mesh triangles that may share vertices. Shared
// vertices are not counted as intersection; triangles that share an edge only
// intersect when they fold onto each other in the same plane.
bool mesh_triangles_intersect(const Positions& x, const Tri& s, const Tri& t);

}  // namespace pdsim
