#pragma once

#include "pdsim/eigensolver.hpp"
#include "pdsim/pd_core.hpp"

#include <span>

namespace pdsim {

// Rest-shape eigenbasis of the global matrix. U (n x r_bar) serves the
// collision-free warm start, V = first r columns serves the solves with
// collision constraints.
struct Subspace {
  MatX U;
  VecX lambda;  // ascending, diagonal of U^T H U
  MatX V;
  int r = 0;
  std::vector<double> rank_one_blocks;  // per row j: packed upper triangle of V_j^T V_j
  Positions X;                          // rest positions of the free rows
  MatX UHX;                             // U^T H X
  MatX VHX;                             // V^T H X
  double max_residual = 0.0;

  int size() const { return static_cast<int>(U.rows()); }
  int r_bar() const { return static_cast<int>(U.cols()); }
};

// Throws when the eigensolver fails, when r > r_bar or when the smallest
// eigenvalue falls below half the smallest inertia term.
Subspace build_subspace(const GlobalSystem& system, const Positions& rest_free, int r_bar, int r,
                        const EigenOptions& options = {});

// Collision-free modal solve: x = x_guess + U Lambda^-1 U^T (b - H x_guess).
// With x_guess = X this uses the precomputed U^T H X.
Positions subspace_solve_free(const Subspace& sub, const GlobalSystem& system, const Positions& b,
                              const Positions& x_guess);

// V^T Delta H V for a diagonal Delta H given by (row, weight) pairs.
MatX reduced_update(const Subspace& sub, std::span<const int> rows, std::span<const double> weights);

struct ReducedSystem {
  MatX A;      // Lambda_r + V^T Delta H V
  MatX rhs;    // r x 3
  MatX Xinv;   // A^-1 / beta
  double beta = 1.0;
  bool fallback = false;  // scaled inverse was inaccurate, pivoted solve used
  MatX q;      // r x 3 solution
};

// Reduced solve with collision constraints:
//   (Lambda_r + V^T dH V) q = V^T (b - (H + dH) x_guess),  x = x_guess + V q.
// `shift` is the full per-row diagonal of dH (may be empty).
Positions subspace_solve_reuse(const Subspace& sub, const GlobalSystem& system, const Positions& b,
                               const Positions& x_guess, std::span<const int> rows, std::span<const double> weights,
                               std::span<const double> shift, ReducedSystem* info = nullptr);

struct SmoothStats {
  int steps = 0;                 // rank-2 steps taken
  double initial_residual = 0.0;
  double final_residual = 0.0;   // residual before the last step
};

// ceil(iterations / 2) rank-2 aggregated Jacobi steps on (H + diag(shift)) x = b,
// each equal to two damped Jacobi updates with factor (1 - omega). Throws when
// the residual grows 10x over 20 iterations.
SmoothStats ajacobi_smooth(const GlobalSystem& system, std::span<const double> shift, const Positions& b,
                           Positions& x, int iterations, double omega);

// Largest eigenvalue of D^-1 H by power iteration on D^-1/2 H D^-1/2.
// Undamped Jacobi converges only when this is below 2. A diagonal shift
// never raises it above max(value, 1).
double jacobi_spectral_radius(const GlobalSystem& system, int iterations = 200);

// Smallest omega for which damped Jacobi contracts, with a safety margin:
// (1 - omega) * rho <= 1.9 / 1.05. Zero when rho is small enough.
double safe_jacobi_omega(double rho);

// Residual norm |b - (H + diag(shift)) x|.
double system_residual(const GlobalSystem& system, std::span<const double> shift, const Positions& b,
                       const Positions& x);

}  // namespace pdsim
