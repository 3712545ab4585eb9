#include "pdsim/world.hpp"

#include <algorithm>
#include <map>

namespace pdsim {

Positions Obstacle::at(double t) const {
  Positions out(rest.rows(), 3);
  for (int i = 0; i < rest.rows(); ++i) set_row3(out, i, motion.position(row3(rest, i), t));
  return out;
}

CollisionWorld make_world(const ClothMesh& cloth, const std::vector<Obstacle>& obstacles) {
  CollisionWorld w;
  w.cloth_vertices = cloth.vertex_count();
  w.cloth_triangles = cloth.triangle_count();
  int nv = w.cloth_vertices;
  for (const auto& o : obstacles) nv += static_cast<int>(o.rest.rows());
  w.movable.assign(nv, 0);
  w.obstacle.assign(nv, 1);
  for (int v = 0; v < w.cloth_vertices; ++v) {
    w.obstacle[v] = 0;
    w.movable[v] = cloth.is_pinned(v) ? 0 : 1;
  }

  w.triangles = cloth.triangles;
  int base = w.cloth_vertices;
  for (const auto& o : obstacles) {
    for (const auto& t : o.triangles) {
      for (int k = 0; k < 3; ++k)
        if (t[k] < 0 || t[k] >= o.rest.rows()) throw MeshError("obstacle triangle index out of range", k);
      w.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
    }
    base += static_cast<int>(o.rest.rows());
  }

  const int nt = w.triangle_count();
  std::map<std::pair<int, int>, std::vector<int>> edge_tris;
  for (int t = 0; t < nt; ++t)
    for (int k = 0; k < 3; ++k) {
      const int a = w.triangles[t][k];
      const int b = w.triangles[t][(k + 1) % 3];
      edge_tris[{std::min(a, b), std::max(a, b)}].push_back(t);
    }

  std::vector<int> vertex_owner(nv, -1);
  for (int t = 0; t < nt; ++t)
    for (int v : w.triangles[t])
      if (vertex_owner[v] < 0) vertex_owner[v] = t;

  std::vector<std::vector<int>> own_v(nt), own_e(nt), adj(nt);
  for (int v = 0; v < nv; ++v)
    if (vertex_owner[v] >= 0) own_v[vertex_owner[v]].push_back(v);
  for (const auto& [key, tris] : edge_tris) {
    const int e = static_cast<int>(w.edges.size());
    w.edges.push_back({key.first, key.second});
    own_e[tris.front()].push_back(e);
    for (size_t i = 0; i < tris.size(); ++i)
      for (size_t j = 0; j < tris.size(); ++j)
        if (i != j) adj[tris[i]].push_back(tris[j]);
  }

  auto to_csr = [](const std::vector<std::vector<int>>& lists, std::vector<int>& start, std::vector<int>& flat) {
    start.assign(1, 0);
    for (const auto& l : lists) {
      flat.insert(flat.end(), l.begin(), l.end());
      start.push_back(static_cast<int>(flat.size()));
    }
  };
  to_csr(own_v, w.owned_vertex_start, w.owned_vertices);
  to_csr(own_e, w.owned_edge_start, w.owned_edges);
  for (auto& l : adj) {
    std::sort(l.begin(), l.end());
    l.erase(std::unique(l.begin(), l.end()), l.end());
  }
  to_csr(adj, w.adjacency_start, w.adjacency);
  return w;
}

Positions world_positions(const CollisionWorld& world, const Positions& cloth_x, const std::vector<Obstacle>& obstacles,
                          double t) {
  Positions out(world.vertex_count(), 3);
  out.topRows(world.cloth_vertices) = cloth_x;
  int base = world.cloth_vertices;
  for (const auto& o : obstacles) {
    const int n = static_cast<int>(o.rest.rows());
    out.middleRows(base, n) = o.at(t);
    base += n;
  }
  return out;
}

}  // namespace pdsim
