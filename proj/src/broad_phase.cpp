#include "pdsim/broad_phase.hpp"

#include "pdsim/kernels.hpp"

#include <algorithm>
#include <deque>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pdsim {

namespace {

bool admissible(const CollisionWorld& w, const std::array<int, 4>& v, PairKind kind) {
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      if (v[i] == v[j]) return false;
  const bool side1_obstacle = kind == PairKind::VertexTriangle ? w.obstacle[v[0]] : (w.obstacle[v[0]] && w.obstacle[v[1]]);
  const bool side2_obstacle = w.obstacle[v[2]] && w.obstacle[v[3]] && (kind == PairKind::EdgeEdge || w.obstacle[v[1]]);
  if (side1_obstacle && side2_obstacle) return false;
  return w.movable[v[0]] || w.movable[v[1]] || w.movable[v[2]] || w.movable[v[3]];
}

Aabb vertex_box(const Positions& x0, const Positions& x1, int v, double margin) {
  Aabb b;
  b.expand(row3(x0, v));
  b.expand(row3(x1, v));
  b.inflate(margin);
  return b;
}

PrimitivePair edge_edge(const CollisionWorld& w, int e, int f) {
  if (e > f) std::swap(e, f);
  return {PairKind::EdgeEdge, {w.edges[e][0], w.edges[e][1], w.edges[f][0], w.edges[f][1]}};
}

// Emits the primitive pairs contributed by triangles s and t (s != t).
void emit_triangle_pair(const CollisionWorld& w, const std::vector<Aabb>& tri_boxes, const std::vector<Aabb>& vbox,
                        const std::vector<Aabb>& ebox, int s, int t, std::vector<PrimitivePair>& out) {
  auto vt = [&](int owner, int other) {
    const auto& tri = w.triangles[other];
    for (int k = w.owned_vertex_start[owner]; k < w.owned_vertex_start[owner + 1]; ++k) {
      const int v = w.owned_vertices[k];
      if (!vbox[v].overlaps(tri_boxes[other])) continue;
      const std::array<int, 4> ids{v, tri[0], tri[1], tri[2]};
      if (admissible(w, ids, PairKind::VertexTriangle)) out.push_back({PairKind::VertexTriangle, ids});
    }
  };
  vt(s, t);
  vt(t, s);
  for (int a = w.owned_edge_start[s]; a < w.owned_edge_start[s + 1]; ++a)
    for (int b = w.owned_edge_start[t]; b < w.owned_edge_start[t + 1]; ++b) {
      const int e = w.owned_edges[a];
      const int f = w.owned_edges[b];
      if (!ebox[e].overlaps(ebox[f])) continue;
      const PrimitivePair p = edge_edge(w, e, f);
      if (admissible(w, p.v, PairKind::EdgeEdge)) out.push_back(p);
    }
}

}  // namespace

Aabb swept_box(const Positions& x0, const Positions& x1, std::span<const int> vertices, double margin) {
  Aabb b;
  for (int v : vertices) {
    b.expand(row3(x0, v));
    b.expand(row3(x1, v));
  }
  b.inflate(margin);
  return b;
}

PatchBVH::PatchBVH(const CollisionWorld& world, int max_patch_size) {
  const int nt = world.triangle_count();
  tri_patch_.assign(nt, -1);
  patch_start_.assign(1, 0);
  // Greedy breadth-first growth; cloth and obstacle triangles never mix
  // because they are not edge-adjacent.
  for (int seed = 0; seed < nt; ++seed) {
    if (tri_patch_[seed] >= 0) continue;
    const int p = patch_count();
    std::deque<int> queue{seed};
    tri_patch_[seed] = p;
    int size = 0;
    while (!queue.empty() && size < max_patch_size) {
      const int t = queue.front();
      queue.pop_front();
      patch_tris_.push_back(t);
      ++size;
      for (int k = world.adjacency_start[t]; k < world.adjacency_start[t + 1]; ++k) {
        const int u = world.adjacency[k];
        if (tri_patch_[u] < 0 && size + static_cast<int>(queue.size()) < max_patch_size) {
          tri_patch_[u] = p;
          queue.push_back(u);
        }
      }
    }
    patch_start_.push_back(static_cast<int>(patch_tris_.size()));
  }
}

int PatchBVH::build(std::vector<int>& items, int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Aabb box, centers;
  for (int i = begin; i < end; ++i) {
    box.expand(patch_boxes_[items[i]]);
    centers.expand(patch_boxes_[items[i]].center());
  }
  nodes_[id].box = box;
  if (end - begin == 1) {
    nodes_[id].patch = items[begin];
    return id;
  }
  int axis = 0;
  (centers.hi - centers.lo).maxCoeff(&axis);
  const int mid = (begin + end) / 2;
  std::nth_element(items.begin() + begin, items.begin() + mid, items.begin() + end, [&](int a, int b) {
    const double ca = patch_boxes_[a].center()[axis];
    const double cb = patch_boxes_[b].center()[axis];
    return ca < cb || (ca == cb && a < b);
  });
  const int l = build(items, begin, mid);
  const int r = build(items, mid, end);
  nodes_[id].left = l;
  nodes_[id].right = r;
  return id;
}

void PatchBVH::refit(const CollisionWorld& w, const Positions& x0, const Positions& x1, double margin) {
  const int nt = w.triangle_count();
  tri_boxes_.resize(nt);
#pragma omp parallel for schedule(static)
  for (int t = 0; t < nt; ++t) tri_boxes_[t] = swept_box(x0, x1, w.triangles[t], margin);
  const int np = patch_count();
  patch_boxes_.assign(np, Aabb{});
  for (int p = 0; p < np; ++p)
    for (int t : patch(p)) patch_boxes_[p].expand(tri_boxes_[t]);
  nodes_.clear();
  std::vector<int> items(np);
  std::iota(items.begin(), items.end(), 0);
  root_ = np > 0 ? build(items, 0, np) : -1;
}

std::vector<std::pair<int, int>> PatchBVH::overlapping_patches() const {
  std::vector<std::pair<int, int>> out;
  if (root_ < 0) return out;
  std::vector<std::pair<int, int>> stack{{root_, root_}};
  while (!stack.empty()) {
    const auto [a, b] = stack.back();
    stack.pop_back();
    const Node& na = nodes_[a];
    const Node& nb = nodes_[b];
    if (a == b) {
      if (na.patch >= 0) {
        out.emplace_back(na.patch, na.patch);
      } else {
        stack.emplace_back(na.left, na.left);
        stack.emplace_back(na.right, na.right);
        stack.emplace_back(na.left, na.right);
      }
      continue;
    }
    if (!na.box.overlaps(nb.box)) continue;
    if (na.patch >= 0 && nb.patch >= 0) {
      out.emplace_back(std::min(na.patch, nb.patch), std::max(na.patch, nb.patch));
    } else if (nb.patch >= 0 || (na.patch < 0 && na.box.hi.x() - na.box.lo.x() >= nb.box.hi.x() - nb.box.lo.x())) {
      stack.emplace_back(na.left, b);
      stack.emplace_back(na.right, b);
    } else {
      stack.emplace_back(a, nb.left);
      stack.emplace_back(a, nb.right);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<PrimitivePair> broad_phase(const CollisionWorld& world, PatchBVH& bvh, const Positions& x0,
                                       const Positions& x1, double margin) {
  bvh.refit(world, x0, x1, margin);
  const auto& tri_boxes = bvh.triangle_boxes();
  const int nv = world.vertex_count();
  const int ne = static_cast<int>(world.edges.size());
  std::vector<Aabb> vbox(nv), ebox(ne);
#pragma omp parallel for schedule(static)
  for (int v = 0; v < nv; ++v) vbox[v] = vertex_box(x0, x1, v, margin);
#pragma omp parallel for schedule(static)
  for (int e = 0; e < ne; ++e) ebox[e] = swept_box(x0, x1, world.edges[e], margin);

  const auto leaves = bvh.overlapping_patches();
  const int nl = static_cast<int>(leaves.size());
  std::vector<std::vector<PrimitivePair>> local(kernels::max_threads());
#pragma omp parallel
  {
#ifdef _OPENMP
    auto& out = local[omp_get_thread_num()];
#else
    auto& out = local[0];
#endif
#pragma omp for schedule(dynamic, 16)
    for (int i = 0; i < nl; ++i) {
      const auto [p, q] = leaves[i];
      const auto tp = bvh.patch(p);
      const auto tq = bvh.patch(q);
      for (size_t a = 0; a < tp.size(); ++a)
        for (size_t b = (p == q ? a + 1 : 0); b < tq.size(); ++b) {
          const int s = tp[a];
          const int t = tq[b];
          if (world.is_obstacle_triangle(s) && world.is_obstacle_triangle(t)) continue;
          if (!tri_boxes[s].overlaps(tri_boxes[t])) continue;
          emit_triangle_pair(world, tri_boxes, vbox, ebox, s, t, out);
        }
    }
  }
  std::vector<PrimitivePair> all;
  for (auto& l : local) all.insert(all.end(), l.begin(), l.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return all;
}

std::vector<PrimitivePair> broad_phase_brute_force(const CollisionWorld& world, const Positions& x0,
                                                   const Positions& x1, double margin) {
  std::vector<PrimitivePair> out;
  const int nv = world.vertex_count();
  const int nt = world.triangle_count();
  const int ne = static_cast<int>(world.edges.size());
  std::vector<char> in_mesh(nv, 0);
  for (const auto& t : world.triangles)
    for (int v : t) in_mesh[v] = 1;
  for (int v = 0; v < nv; ++v) {
    if (!in_mesh[v]) continue;
    const Aabb bv = vertex_box(x0, x1, v, margin);
    for (int t = 0; t < nt; ++t) {
      const auto& tri = world.triangles[t];
      const std::array<int, 4> ids{v, tri[0], tri[1], tri[2]};
      if (!admissible(world, ids, PairKind::VertexTriangle)) continue;
      if (bv.overlaps(swept_box(x0, x1, tri, margin))) out.push_back({PairKind::VertexTriangle, ids});
    }
  }
  for (int e = 0; e < ne; ++e) {
    const Aabb be = swept_box(x0, x1, world.edges[e], margin);
    for (int f = e + 1; f < ne; ++f) {
      const PrimitivePair p = edge_edge(world, e, f);
      if (!admissible(world, p.v, PairKind::EdgeEdge)) continue;
      if (be.overlaps(swept_box(x0, x1, world.edges[f], margin))) out.push_back(p);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace pdsim
