#include "pdsim/mesh.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <map>

namespace pdsim {

Vec3 PinMotion::position(const Vec3& rest, double t) const {
  if (stop_time >= 0.0) t = std::min(t, stop_time);
  Vec3 p = rest;
  if (angular_speed != 0.0) {
    const Eigen::AngleAxisd rot(angular_speed * t, axis.normalized());
    p = center + rot * (rest - center);
  }
  return p + velocity * t;
}

Vec3 ClothMesh::pin_position(int v, double t) const {
  return pins[pin_group[v]].motion.position(row3(rest_positions, v), t);
}

void ClothMesh::apply_pins(Positions& x, double t) const {
  for (const auto& group : pins)
    for (int v : group.vertices) set_row3(x, v, group.motion.position(row3(rest_positions, v), t));
}

double ClothMesh::rest_area(int tri) const {
  const auto& t = triangles[tri];
  const Vec3 a = row3(rest_positions, t[0]);
  const Vec3 b = row3(rest_positions, t[1]);
  const Vec3 c = row3(rest_positions, t[2]);
  return 0.5 * (b - a).cross(c - a).norm();
}

double ClothMesh::max_rest_edge() const {
  double m = 0.0;
  for (const auto& e : edges) m = std::max(m, e.rest_length);
  return m;
}

double ClothMesh::mean_rest_edge() const {
  if (edges.empty()) return 0.0;
  double s = 0.0;
  for (const auto& e : edges) s += e.rest_length;
  return s / static_cast<double>(edges.size());
}

ClothMesh build_mesh(const Positions& vertices, std::span<const Tri> triangles, double density,
                     std::span<const PinGroup> pins) {
  const int n = static_cast<int>(vertices.rows());
  if (n < 3) throw MeshError("mesh needs at least 3 vertices", n);
  if (triangles.empty()) throw MeshError("mesh needs at least one triangle", 0);
  if (!(density > 0.0)) throw MeshError("density must be positive", -1);
  if (!vertices.allFinite()) throw MeshError("non-finite vertex position", -1);

  ClothMesh mesh;
  mesh.rest_positions = vertices;
  mesh.triangles.assign(triangles.begin(), triangles.end());
  mesh.density = density;
  mesh.vertex_mass = VecX::Zero(n);

  // (a, b) -> incident triangles, keyed with a < b for deterministic order.
  std::map<std::pair<int, int>, std::vector<int>> edge_tris;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int k = 0; k < 3; ++k)
      if (tri[k] < 0 || tri[k] >= n) throw MeshError("triangle index out of range", t);
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
      throw MeshError("degenerate triangle (repeated index)", t);
    const double area = mesh.rest_area(t);
    if (!(area > 0.0)) throw MeshError("degenerate triangle (zero rest area)", t);
    for (int k = 0; k < 3; ++k) mesh.vertex_mass[tri[k]] += density * area / 3.0;
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k];
      const int b = tri[(k + 1) % 3];
      edge_tris[{std::min(a, b), std::max(a, b)}].push_back(t);
    }
  }

  mesh.edges.reserve(edge_tris.size());
  for (const auto& [key, tris] : edge_tris) {
    const double len = (vertices.row(key.first) - vertices.row(key.second)).norm();
    if (!(len > 0.0)) throw MeshError("zero-length edge", key.first);
    mesh.edges.push_back({key.first, key.second, len});
    if (tris.size() != 2) continue;
    BendStencil s;
    s.v[0] = key.first;
    s.v[1] = key.second;
    for (int side = 0; side < 2; ++side) {
      const auto& tri = mesh.triangles[tris[side]];
      for (int k = 0; k < 3; ++k)
        if (tri[k] != key.first && tri[k] != key.second) s.v[2 + side] = tri[k];
      s.triangles[side] = tris[side];
    }
    if (s.v[2] == s.v[3]) continue;  // doubled triangle, no hinge
    mesh.bend_stencils.push_back(s);
  }

  mesh.pin_group.assign(n, -1);
  for (int g = 0; g < static_cast<int>(pins.size()); ++g) {
    PinGroup group = pins[g];
    std::sort(group.vertices.begin(), group.vertices.end());
    group.vertices.erase(std::unique(group.vertices.begin(), group.vertices.end()), group.vertices.end());
    for (int v : group.vertices) {
      if (v < 0 || v >= n) throw MeshError("pinned vertex index out of range", v);
      mesh.pin_group[v] = g;
    }
    mesh.pins.push_back(std::move(group));
  }
  // A vertex listed in two groups belongs to the last; drop it from earlier ones.
  for (int g = 0; g < static_cast<int>(mesh.pins.size()); ++g) {
    auto& vs = mesh.pins[g].vertices;
    vs.erase(std::remove_if(vs.begin(), vs.end(), [&](int v) { return mesh.pin_group[v] != g; }), vs.end());
  }

  mesh.free_index.assign(n, -1);
  for (int v = 0; v < n; ++v) {
    if (mesh.pin_group[v] >= 0) continue;
    if (!(mesh.vertex_mass[v] > 0.0)) throw MeshError("unpinned vertex has no mass (isolated vertex)", v);
    mesh.free_index[v] = mesh.free_count();
    mesh.free_vertices.push_back(v);
  }
  return mesh;
}

ClothMesh build_mesh(const Positions& vertices, std::span<const Tri> triangles, double density,
                     std::span<const int> static_pins) {
  if (static_pins.empty()) return build_mesh(vertices, triangles, density, std::span<const PinGroup>{});
  PinGroup group;
  group.vertices.assign(static_pins.begin(), static_pins.end());
  const std::array<PinGroup, 1> groups{group};
  return build_mesh(vertices, triangles, density, std::span<const PinGroup>(groups));
}

bool SimState::finite() const {
  return x.allFinite() && x_dot.allFinite() && x_prev.allFinite() && delta_f.allFinite() && obstacles.allFinite();
}

SimState make_rest_state(const ClothMesh& mesh) {
  SimState s;
  s.x = mesh.rest_positions;
  s.x_prev = mesh.rest_positions;
  s.x_dot = Positions::Zero(mesh.vertex_count(), 3);
  s.delta_f = Positions::Zero(mesh.vertex_count(), 3);
  return s;
}

Positions compute_z(const SimState& state, const ClothMesh& mesh, double h, const Positions& f_ext) {
  Positions z = state.x + h * state.x_dot;
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    if (mesh.is_pinned(v)) continue;
    z.row(v) += (h * h / mesh.vertex_mass[v]) * (f_ext.row(v) + state.delta_f.row(v));
  }
  mesh.apply_pins(z, (state.step_index + 1) * h);
  return z;
}

Positions gravity_force(const ClothMesh& mesh, const Vec3& g) {
  Positions f(mesh.vertex_count(), 3);
  for (int v = 0; v < mesh.vertex_count(); ++v) f.row(v) = mesh.vertex_mass[v] * g.transpose();
  return f;
}

Positions to_free(const ClothMesh& mesh, const Positions& full) {
  Positions out(mesh.free_count(), 3);
  for (int i = 0; i < mesh.free_count(); ++i) out.row(i) = full.row(mesh.free_vertices[i]);
  return out;
}

void from_free(const ClothMesh& mesh, const Positions& free, Positions& full) {
  for (int i = 0; i < mesh.free_count(); ++i) full.row(mesh.free_vertices[i]) = free.row(i);
}

}  // namespace pdsim
