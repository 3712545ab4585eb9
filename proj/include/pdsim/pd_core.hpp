#pragma once

#include "pdsim/mesh.hpp"

namespace pdsim {

struct MaterialParams {
  double stretch_stiffness = 160.0;
  double bend_stiffness = 3e-4;

  bool operator==(const MaterialParams&) const = default;
};

// Edge spring. A_i is the edge difference operator, B_i the identity on the
// projected edge vector.
struct StretchConstraint {
  int a = 0;
  int b = 0;
  double rest_length = 0.0;
  double weight = 0.0;
};

// Quadratic bending on a hinge stencil: energy w/2 |sum_k c_k x_k|^2.
struct BendConstraint {
  std::array<int, 4> v{};
  std::array<double, 4> coeffs{};
  double weight = 0.0;
};

// Positional constraint with A_i = B_i = Id.
struct CollisionTarget {
  int vertex = 0;  // mesh vertex id
  double weight = 0.0;
  Vec3 target = Vec3::Zero();
};

struct ElasticConstraints {
  std::vector<StretchConstraint> stretch;
  std::vector<BendConstraint> bend;

  double mean_weight() const;
};

// Stretch weight = k_s * (one third of incident rest area) / L^2 and bending
// weight = k_b * (one third of hinge rest area); bend coefficients are the
// cotangent hinge operator scaled by 3 / (hinge area).
ElasticConstraints build_elastic(const ClothMesh& mesh, const MaterialParams& material);

// Cotangent hinge operator of a stencil (unscaled). Sums to zero and
// annihilates any planar configuration.
std::array<double, 4> hinge_operator(const Vec3& x0, const Vec3& x1, const Vec3& x2, const Vec3& x3);

std::pair<Vec3, Vec3> project_stretch(const Vec3& xa, const Vec3& xb, double rest_length);

std::array<Vec3, 4> project_bend(const std::array<Vec3, 4>& x, const std::array<double, 4>& coeffs);

// Moves the vertex along `normal` by `share` of the gap deficit so the pair
// gap reaches d_hat. A vertex with gap >= d_hat is returned unchanged.
Vec3 project_collision(const Vec3& vertex_x, const Vec3& normal, double gap, double d_hat, double share = 1.0);

// H = M/h^2 + sum_i w_i S_i^T A_i^T A_i S_i restricted to free vertices.
// Columns that belong to pinned vertices go to `pinned_coupling`.
struct GlobalSystem {
  SparseMat H;                // free x free
  SparseMat pinned_coupling;  // free x vertex_count, only pinned columns populated
  VecX diag;
  VecX mass_over_h2;          // per free row
  double h = 0.0;

  int size() const { return static_cast<int>(H.rows()); }
};

GlobalSystem assemble_global(const ClothMesh& mesh, const ElasticConstraints& elastic, double h);

// Local step for the elastic set: projected edge vectors, one per stretch
// constraint. Bending targets vanish in constraint coordinates.
void project_elastic(const ClothMesh& mesh, const ElasticConstraints& elastic, const Positions& x,
                     std::vector<Vec3>& edge_targets);

struct SystemRhs {
  Positions b;                                // free x 3
  std::vector<double> collision_diag_delta;   // free
  std::vector<int> active_rows;               // free rows with collision weight, ascending
  std::vector<double> active_weights;
};

// b = M/h^2 z + sum_i w_i S_i^T A_i^T B_i y_i - H_fp x_pinned. `x_full`
// supplies the pinned positions (end of step). Collision targets on pinned
// vertices are ignored.
SystemRhs assemble_rhs(const ClothMesh& mesh, const GlobalSystem& system, const ElasticConstraints& elastic,
                       const Positions& z, const std::vector<Vec3>& edge_targets,
                       const std::vector<CollisionTarget>& collisions, const Positions& x_full);

// Dense copies of the assembled operators, for small meshes.
MatX dense_matrix(const SparseMat& H);

}  // namespace pdsim
