#pragma once

#include "pdsim/ccd.hpp"
#include "pdsim/world.hpp"

namespace pdsim {

// Bounding volume hierarchy over small connected triangle patches of the
// world it was built for. Patches are fixed by topology; boxes and the tree are rebuilt for every query.
class PatchBVH {
 public:
  explicit PatchBVH(const CollisionWorld& world, int max_patch_size = 8);

  int patch_count() const { return static_cast<int>(patch_start_.size()) - 1; }
  std::span<const int> patch(int p) const {
    return {patch_tris_.data() + patch_start_[p], static_cast<size_t>(patch_start_[p + 1] - patch_start_[p])};
  }
  int patch_of(int tri) const { return tri_patch_[tri]; }

  struct Node {
    Aabb box;
    int left = -1;
    int right = -1;
    int patch = -1;  // leaf when >= 0
  };

  // Swept boxes of every triangle over x0 -> x1 inflated by `margin`, patch
  // boxes and a median-split tree over them.
  void refit(const CollisionWorld& world, const Positions& x0, const Positions& x1, double margin);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Aabb>& triangle_boxes() const { return tri_boxes_; }

  // Overlapping leaf pairs (p <= q), including each patch with itself.
  std::vector<std::pair<int, int>> overlapping_patches() const;

 private:
  int build(std::vector<int>& items, int begin, int end);

  std::vector<int> patch_start_, patch_tris_, tri_patch_;
  std::vector<Aabb> tri_boxes_, patch_boxes_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

// Swept box of a set of world vertices inflated by margin.
Aabb swept_box(const Positions& x0, const Positions& x1, std::span<const int> vertices, double margin);

// Every vertex-triangle and edge-edge pair whose inflated swept boxes overlap,
// excluding pairs that share a vertex, obstacle-only pairs and pairs with no
// movable vertex. Sorted, no duplicates.
std::vector<PrimitivePair> broad_phase(const CollisionWorld& world, PatchBVH& bvh, const Positions& x0,
                                       const Positions& x1, double margin);

// O(n^2) reference with the same filters.
std::vector<PrimitivePair> broad_phase_brute_force(const CollisionWorld& world, const Positions& x0,
                                                   const Positions& x1, double margin);

}  // namespace pdsim
