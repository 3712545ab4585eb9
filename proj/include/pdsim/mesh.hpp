#pragma once

#include "pdsim/types.hpp"

#include <span>

namespace pdsim {

struct Edge {
  int a = 0;
  int b = 0;
  double rest_length = 0.0;
};

// v[0], v[1] span the shared edge; v[2] and v[3] are the opposite vertices of
// the two incident triangles.
struct BendStencil {
  std::array<int, 4> v{};
  std::array<int, 2> triangles{};
};

// Rigid motion of a pinned vertex group, evaluated against rest positions:
//   p(t) = c + R(axis, angular_speed * t) (X - c) + velocity * t
struct PinMotion {
  Vec3 center = Vec3::Zero();
  Vec3 axis = Vec3::UnitZ();
  double angular_speed = 0.0;  // rad/s
  Vec3 velocity = Vec3::Zero();
  double stop_time = -1.0;  // motion freezes after this time when >= 0

  bool is_static() const { return angular_speed == 0.0 && velocity.isZero(); }
  Vec3 position(const Vec3& rest, double t) const;

  bool operator==(const PinMotion&) const = default;
};

struct PinGroup {
  std::vector<int> vertices;
  PinMotion motion;
};

class ClothMesh {
 public:
  int vertex_count() const { return static_cast<int>(rest_positions.rows()); }
  int triangle_count() const { return static_cast<int>(triangles.size()); }
  int free_count() const { return static_cast<int>(free_vertices.size()); }
  bool is_pinned(int v) const { return pin_group[v] >= 0; }

  // Prescribed position of a pinned vertex at absolute time t.
  Vec3 pin_position(int v, double t) const;

  // All pinned vertices placed at time t; free rows copied from `x`.
  void apply_pins(Positions& x, double t) const;

  double total_mass() const { return vertex_mass.sum(); }
  double rest_area(int tri) const;
  double max_rest_edge() const;
  double mean_rest_edge() const;

  Positions rest_positions;
  std::vector<Tri> triangles;
  std::vector<Edge> edges;  // sorted by (a, b), a < b
  std::vector<BendStencil> bend_stencils;
  VecX vertex_mass;
  double density = 0.0;

  std::vector<PinGroup> pins;
  std::vector<int> pin_group;      // per vertex, -1 if free
  std::vector<int> free_vertices;  // system row -> vertex
  std::vector<int> free_index;     // vertex -> system row, -1 if pinned
};

// Throws MeshError naming the offending triangle or vertex index.
ClothMesh build_mesh(const Positions& vertices, std::span<const Tri> triangles, double density,
                     std::span<const PinGroup> pins = {});

ClothMesh build_mesh(const Positions& vertices, std::span<const Tri> triangles, double density,
                     std::span<const int> static_pins);

struct SimState {
  Positions x;       // positions at the start of the current step (x*)
  Positions x_dot;   // velocities at the start of the current step
  Positions x_prev;  // positions at the start of the previous step
  Positions delta_f; // forwarded residual force
  Positions obstacles;  // stacked obstacle vertices, empty without obstacles
  int step_index = 0;

  double time(double h) const { return step_index * h; }
  bool finite() const;
};

SimState make_rest_state(const ClothMesh& mesh);

// z = x* + h xdot* + h^2 M^-1 (f_ext + delta_f); pinned rows get their
// prescribed position at the end of the step.
Positions compute_z(const SimState& state, const ClothMesh& mesh, double h, const Positions& f_ext);

// Gravity as a per-vertex force field.
Positions gravity_force(const ClothMesh& mesh, const Vec3& g);

// Gathers / scatters between full vertex blocks and the free-vertex system.
Positions to_free(const ClothMesh& mesh, const Positions& full);
void from_free(const ClothMesh& mesh, const Positions& free, Positions& full);

}  // namespace pdsim
