#include "pdsim/energy.hpp"

#include <cmath>

namespace pdsim {

double dbb_derivative(double d, double d_hat, double kappa) {
  if (!(d > 0.0)) throw Error("distance-based barrier evaluated at a non-positive distance (infeasible state)");
  if (d >= d_hat) return 0.0;
  const double g = d - d_hat;
  return -kappa * (2.0 * g * std::log(d / d_hat) + g * g / d);
}

double energy(const EnergyModel& model, const Positions& x, Positions* grad, const EnergyTerms& terms) {
  if (!model.mesh || !model.elastic) throw Error("energy: model needs a mesh and constraints");
  const ClothMesh& mesh = *model.mesh;
  const ElasticConstraints& el = *model.elastic;
  const double h2 = model.h * model.h;
  double E = 0.0;
  if (grad) *grad = Positions::Zero(x.rows(), 3);

  if (terms.inertia) {
    for (int v = 0; v < mesh.vertex_count(); ++v) {
      const Vec3 d = row3(x, v) - row3(model.z, v);
      const double c = mesh.vertex_mass[v] / h2;
      E += 0.5 * c * d.squaredNorm();
      if (grad) grad->row(v) += c * d.transpose();
    }
  }
  if (terms.stretch) {
    for (const auto& s : el.stretch) {
      const Vec3 d = row3(x, s.a) - row3(x, s.b);
      const double len = d.norm();
      const double ext = len - s.rest_length;
      E += 0.5 * s.weight * ext * ext;
      if (grad && len > 0.0) {
        const Vec3 g = s.weight * ext * d / len;
        grad->row(s.a) += g.transpose();
        grad->row(s.b) -= g.transpose();
      }
    }
  }
  if (terms.bend) {
    for (const auto& b : el.bend) {
      Vec3 cx = Vec3::Zero();
      for (int k = 0; k < 4; ++k) cx += b.coeffs[k] * row3(x, b.v[k]);
      E += 0.5 * b.weight * cx.squaredNorm();
      if (grad)
        for (int k = 0; k < 4; ++k) grad->row(b.v[k]) += (b.weight * b.coeffs[k]) * cx.transpose();
    }
  }
  if (terms.collision) {
    for (const auto& t : model.targets) {
      const Vec3 d = row3(x, t.vertex) - t.target;
      E += 0.5 * t.weight * d.squaredNorm();
      if (grad) grad->row(t.vertex) += t.weight * d.transpose();
    }
  }
  if (terms.barrier) {
    for (const auto& p : model.barrier_pairs) {
      const PairPoints pts = gather(p, x);
      const PairProximity prox = pair_proximity(p.kind, pts);
      const double d = prox.distance;
      if (d >= model.d_hat) continue;
      E += dbb_weight(d, model.d_hat, model.kappa);
      if (!grad) continue;
      // Envelope theorem: the closest points are stationary, so only the
      // explicit dependence of p2(lambda) - p1(lambda) matters.
      const Vec3 n = -prox.diff / d;  // d(distance)/d(p1)
      const double dB = dbb_derivative(d, model.d_hat, model.kappa);
      const Vec2& l = prox.lambda;
      double beta[4];
      if (p.kind == PairKind::VertexTriangle) {
        beta[0] = 1.0;
        beta[1] = -(1.0 - l[0] - l[1]);
        beta[2] = -l[0];
        beta[3] = -l[1];
      } else {
        beta[0] = 1.0 - l[0];
        beta[1] = l[0];
        beta[2] = -(1.0 - l[1]);
        beta[3] = -l[1];
      }
      for (int k = 0; k < 4; ++k) grad->row(p.v[k]) += (dB * beta[k]) * n.transpose();
    }
  }
  return E;
}

}  // namespace pdsim
