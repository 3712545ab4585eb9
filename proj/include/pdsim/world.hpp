#pragma once

#include "pdsim/mesh.hpp"

namespace pdsim {

// Static or scripted triangle mesh with infinite mass.
struct Obstacle {
  std::string name;
  Positions rest;
  std::vector<Tri> triangles;
  PinMotion motion;

  Positions at(double t) const;
};

// Everything collision detection sees. Cloth vertices come first, obstacle
// vertices follow; triangles and edges use these world ids.
struct CollisionWorld {
  int cloth_vertices = 0;
  int cloth_triangles = 0;
  std::vector<Tri> triangles;
  std::vector<std::array<int, 2>> edges;  // unique, a < b
  std::vector<std::uint8_t> movable;      // per vertex: free cloth vertex
  std::vector<std::uint8_t> obstacle;     // per vertex

  // Each vertex and each edge is owned by exactly one incident triangle, so a
  // triangle pair enumerates every primitive pair once.
  std::vector<int> owned_vertex_start, owned_vertices;  // CSR by triangle
  std::vector<int> owned_edge_start, owned_edges;

  // Triangles sharing an edge, CSR by triangle.
  std::vector<int> adjacency_start, adjacency;

  int vertex_count() const { return static_cast<int>(movable.size()); }
  int triangle_count() const { return static_cast<int>(triangles.size()); }
  bool is_obstacle_triangle(int t) const { return t >= cloth_triangles; }
};

CollisionWorld make_world(const ClothMesh& cloth, const std::vector<Obstacle>& obstacles);

// Stacks cloth positions and obstacle positions at time t.
Positions world_positions(const CollisionWorld& world, const Positions& cloth_x, const std::vector<Obstacle>& obstacles,
                          double t);

}  // namespace pdsim
