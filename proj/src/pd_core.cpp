#include "pdsim/pd_core.hpp"

#include <algorithm>
#include <cmath>

namespace pdsim {

namespace {

double cot(const Vec3& a, const Vec3& b) { return a.dot(b) / a.cross(b).norm(); }

int find_edge(const std::vector<Edge>& edges, int a, int b) {
  if (a > b) std::swap(a, b);
  auto it = std::lower_bound(edges.begin(), edges.end(), std::pair{a, b}, [](const Edge& e, const std::pair<int, int>& k) {
    return std::pair{e.a, e.b} < k;
  });
  return static_cast<int>(it - edges.begin());
}

}  // namespace

double ElasticConstraints::mean_weight() const {
  double s = 0.0;
  for (const auto& c : stretch) s += c.weight;
  for (const auto& c : bend) s += c.weight;
  const size_t n = stretch.size() + bend.size();
  return n ? s / static_cast<double>(n) : 0.0;
}

std::array<double, 4> hinge_operator(const Vec3& x0, const Vec3& x1, const Vec3& x2, const Vec3& x3) {
  const Vec3 e0 = x1 - x0;
  const Vec3 e1 = x2 - x0;
  const Vec3 e2 = x3 - x0;
  const Vec3 e3 = x2 - x1;
  const Vec3 e4 = x3 - x1;
  const double c01 = cot(e0, e1);
  const double c02 = cot(e0, e2);
  const double c03 = cot(-e0, e3);
  const double c04 = cot(-e0, e4);
  return {c03 + c04, c01 + c02, -c01 - c03, -c02 - c04};
}

ElasticConstraints build_elastic(const ClothMesh& mesh, const MaterialParams& material) {
  if (!(std::isfinite(material.stretch_stiffness) && std::isfinite(material.bend_stiffness)) ||
      material.stretch_stiffness < 0.0 || material.bend_stiffness < 0.0)
    throw Error("stiffness must be finite and non-negative");

  ElasticConstraints out;
  std::vector<double> edge_area(mesh.edges.size(), 0.0);
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double a3 = mesh.rest_area(t) / 3.0;
    for (int k = 0; k < 3; ++k) edge_area[find_edge(mesh.edges, tri[k], tri[(k + 1) % 3])] += a3;
  }
  if (material.stretch_stiffness > 0.0) {
    out.stretch.reserve(mesh.edges.size());
    for (size_t e = 0; e < mesh.edges.size(); ++e) {
      const auto& edge = mesh.edges[e];
      const double w = material.stretch_stiffness * edge_area[e] / (edge.rest_length * edge.rest_length);
      out.stretch.push_back({edge.a, edge.b, edge.rest_length, w});
    }
  }
  if (material.bend_stiffness > 0.0) {
    out.bend.reserve(mesh.bend_stencils.size());
    for (const auto& s : mesh.bend_stencils) {
      const auto K = hinge_operator(row3(mesh.rest_positions, s.v[0]), row3(mesh.rest_positions, s.v[1]),
                                    row3(mesh.rest_positions, s.v[2]), row3(mesh.rest_positions, s.v[3]));
      const double area = mesh.rest_area(s.triangles[0]) + mesh.rest_area(s.triangles[1]);
      BendConstraint c;
      c.v = s.v;
      for (int k = 0; k < 4; ++k) c.coeffs[k] = K[k] * 3.0 / area;
      c.weight = material.bend_stiffness * area / 3.0;
      out.bend.push_back(c);
    }
  }
  return out;
}

std::pair<Vec3, Vec3> project_stretch(const Vec3& xa, const Vec3& xb, double rest_length) {
  const Vec3 mid = 0.5 * (xa + xb);
  Vec3 d = xb - xa;
  const double len = d.norm();
  d = len > 0.0 ? Vec3(d / len) : Vec3::UnitX();
  const Vec3 half = 0.5 * rest_length * d;
  return {mid - half, mid + half};
}

std::array<Vec3, 4> project_bend(const std::array<Vec3, 4>& x, const std::array<double, 4>& coeffs) {
  Vec3 cx = Vec3::Zero();
  double cc = 0.0;
  for (int k = 0; k < 4; ++k) {
    cx += coeffs[k] * x[k];
    cc += coeffs[k] * coeffs[k];
  }
  std::array<Vec3, 4> out = x;
  if (cc == 0.0) return out;
  for (int k = 0; k < 4; ++k) out[k] -= (coeffs[k] / cc) * cx;
  return out;
}

Vec3 project_collision(const Vec3& vertex_x, const Vec3& normal, double gap, double d_hat, double share) {
  if (gap >= d_hat) return vertex_x;
  return vertex_x + share * (d_hat - gap) * normal;
}

GlobalSystem assemble_global(const ClothMesh& mesh, const ElasticConstraints& elastic, double h) {
  if (!(h > 0.0)) throw Error("time step must be positive");
  const int m = mesh.free_count();
  const int n = mesh.vertex_count();
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<Eigen::Triplet<double>> coup;
  trip.reserve(m + 4 * elastic.stretch.size() + 16 * elastic.bend.size());

  GlobalSystem sys;
  sys.h = h;
  sys.mass_over_h2.resize(m);
  for (int i = 0; i < m; ++i) {
    sys.mass_over_h2[i] = mesh.vertex_mass[mesh.free_vertices[i]] / (h * h);
    trip.emplace_back(i, i, sys.mass_over_h2[i]);
  }

  auto stamp = [&](int va, int vb, double value) {
    const int ra = mesh.free_index[va];
    if (ra < 0) return;
    const int rb = mesh.free_index[vb];
    if (rb >= 0)
      trip.emplace_back(ra, rb, value);
    else
      coup.emplace_back(ra, vb, value);
  };

  for (const auto& c : elastic.stretch) {
    if (!(std::isfinite(c.weight) && c.weight > 0.0)) throw Error("stretch constraint weight must be finite and positive");
    stamp(c.a, c.a, c.weight);
    stamp(c.b, c.b, c.weight);
    stamp(c.a, c.b, -c.weight);
    stamp(c.b, c.a, -c.weight);
  }
  for (const auto& c : elastic.bend) {
    if (!(std::isfinite(c.weight) && c.weight > 0.0)) throw Error("bend constraint weight must be finite and positive");
    for (int k = 0; k < 4; ++k)
      for (int l = 0; l < 4; ++l) stamp(c.v[k], c.v[l], c.weight * c.coeffs[k] * c.coeffs[l]);
  }

  sys.H.resize(m, m);
  sys.H.setFromTriplets(trip.begin(), trip.end());
  sys.H.makeCompressed();
  sys.pinned_coupling.resize(m, n);
  sys.pinned_coupling.setFromTriplets(coup.begin(), coup.end());
  sys.pinned_coupling.makeCompressed();
  sys.diag = sys.H.diagonal();
  for (int i = 0; i < m; ++i)
    if (!(sys.diag[i] > 0.0)) throw Error("global matrix has a non-positive diagonal entry");
  return sys;
}

void project_elastic(const ClothMesh& mesh, const ElasticConstraints& elastic, const Positions& x,
                     std::vector<Vec3>& edge_targets) {
  (void)mesh;
  const int ns = static_cast<int>(elastic.stretch.size());
  edge_targets.resize(ns);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < ns; ++i) {
    const auto& c = elastic.stretch[i];
    const auto [ya, yb] = project_stretch(row3(x, c.a), row3(x, c.b), c.rest_length);
    edge_targets[i] = ya - yb;
  }
}

SystemRhs assemble_rhs(const ClothMesh& mesh, const GlobalSystem& system, const ElasticConstraints& elastic,
                       const Positions& z, const std::vector<Vec3>& edge_targets,
                       const std::vector<CollisionTarget>& collisions, const Positions& x_full) {
  const int m = system.size();
  SystemRhs out;
  out.b.resize(m, 3);
  for (int i = 0; i < m; ++i) out.b.row(i) = system.mass_over_h2[i] * z.row(mesh.free_vertices[i]);

  for (size_t k = 0; k < elastic.stretch.size(); ++k) {
    const auto& c = elastic.stretch[k];
    const Eigen::RowVector3d wy = c.weight * edge_targets[k].transpose();
    const int ra = mesh.free_index[c.a];
    const int rb = mesh.free_index[c.b];
    if (ra >= 0) out.b.row(ra) += wy;
    if (rb >= 0) out.b.row(rb) -= wy;
  }

  // Pinned knowns moved to the right-hand side.
  for (int i = 0; i < m; ++i)
    for (SparseMat::InnerIterator it(system.pinned_coupling, i); it; ++it)
      out.b.row(i) -= it.value() * x_full.row(it.col());

  out.collision_diag_delta.assign(m, 0.0);
  for (const auto& c : collisions) {
    const int r = mesh.free_index[c.vertex];
    if (r < 0 || !(c.weight > 0.0)) continue;
    out.collision_diag_delta[r] += c.weight;
    out.b.row(r) += c.weight * c.target.transpose();
  }
  for (int i = 0; i < m; ++i)
    if (out.collision_diag_delta[i] > 0.0) {
      out.active_rows.push_back(i);
      out.active_weights.push_back(out.collision_diag_delta[i]);
    }
  return out;
}

MatX dense_matrix(const SparseMat& H) { return MatX(H); }

}  // namespace pdsim
