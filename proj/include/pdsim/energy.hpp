#pragma once

#include "pdsim/barrier.hpp"

namespace pdsim {

struct EnergyTerms {
  bool inertia = true;
  bool stretch = true;
  bool bend = true;
  bool collision = true;  // quadratic positional targets
  bool barrier = true;    // log barrier over `barrier_pairs`
};

// Incremental potential of one step. Positions are world positions (cloth
// rows first); inertia and elasticity act on the cloth rows.
struct EnergyModel {
  const ClothMesh* mesh = nullptr;
  const ElasticConstraints* elastic = nullptr;
  Positions z;
  double h = 0.0;
  std::vector<CollisionTarget> targets;
  std::vector<PrimitivePair> barrier_pairs;
  double d_hat = 0.0;
  double kappa = 0.0;
};

// E(x) and, when `grad` is given, its analytic gradient (same shape as x).
double energy(const EnergyModel& model, const Positions& x, Positions* grad = nullptr, const EnergyTerms& terms = {});

// d/dd of the log barrier.
double dbb_derivative(double d, double d_hat, double kappa);

}  // namespace pdsim
