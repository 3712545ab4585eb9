#include "pdsim/subspace.hpp"

#include "pdsim/kernels.hpp"

#include <Eigen/LU>

#include <cmath>
#include <sstream>

namespace pdsim {

namespace k = kernels;

Subspace build_subspace(const GlobalSystem& system, const Positions& rest_free, int r_bar, int r,
                        const EigenOptions& options) {
  const int n = system.size();
  if (r < 1 || r > r_bar) throw Error("subspace: need 1 <= r <= r_bar");
  if (rest_free.rows() != n) throw Error("subspace: rest positions do not match the system size");
  r_bar = std::min(r_bar, n);
  r = std::min(r, r_bar);

  const EigenResult eig = smallest_eigenpairs(system.H, r_bar, options);
  const double floor = 0.5 * system.mass_over_h2.minCoeff();
  if (eig.values[0] < floor) {
    std::ostringstream msg;
    msg << "subspace: smallest eigenvalue " << eig.values[0] << " below half the inertia term " << floor;
    throw Error(msg.str());
  }

  Subspace sub;
  sub.U = eig.vectors;
  sub.lambda = eig.values;
  sub.max_residual = eig.max_residual;
  sub.r = r;
  sub.V = sub.U.leftCols(r);
  const int P = k::packed_size(r);
  sub.rank_one_blocks.resize(static_cast<size_t>(n) * P);
#pragma omp parallel for schedule(static)
  for (int j = 0; j < n; ++j) {
    double* blk = sub.rank_one_blocks.data() + static_cast<size_t>(j) * P;
    int p = 0;
    for (int a = 0; a < r; ++a)
      for (int b = a; b < r; ++b) blk[p++] = sub.V(j, a) * sub.V(j, b);
  }
  sub.X = rest_free;
  Positions HX;
  k::parallel::spmv(system.H, sub.X, HX);
  k::parallel::project(sub.U, HX, sub.UHX);
  sub.VHX = sub.UHX.topRows(r);
  return sub;
}

Positions subspace_solve_free(const Subspace& sub, const GlobalSystem& system, const Positions& b,
                              const Positions& x_guess) {
  MatX q;
  if (x_guess == sub.X) {
    k::parallel::project(sub.U, b, q);
    q -= sub.UHX;
  } else {
    Positions res;
    k::parallel::residual(system.H, {}, b, x_guess, res);
    k::parallel::project(sub.U, res, q);
  }
  for (int i = 0; i < q.rows(); ++i) q.row(i) /= sub.lambda[i];
  Positions x = x_guess;
  k::parallel::lift_add(sub.U, q, x);
  return x;
}

MatX reduced_update(const Subspace& sub, std::span<const int> rows, std::span<const double> weights) {
  if (rows.size() != weights.size()) throw Error("reduced_update: rows and weights differ in length");
  std::vector<double> packed;
  k::parallel::reduced_update(sub.rank_one_blocks, sub.r, rows, weights, packed);
  MatX out;
  k::unpack_symmetric(packed, sub.r, out);
  return out;
}

Positions subspace_solve_reuse(const Subspace& sub, const GlobalSystem& system, const Positions& b,
                               const Positions& x_guess, std::span<const int> rows, std::span<const double> weights,
                               std::span<const double> shift, ReducedSystem* info) {
  const int r = sub.r;
  ReducedSystem local;
  ReducedSystem& rs = info ? *info : local;

  Positions res;
  k::parallel::residual(system.H, shift, b, x_guess, res);
  k::parallel::project(sub.V, res, rs.rhs);

  rs.A = reduced_update(sub, rows, weights);
  for (int i = 0; i < r; ++i) rs.A(i, i) += sub.lambda[i];

  rs.beta = rs.rhs.cwiseAbs().sum() / (3.0 * r);
  rs.fallback = false;
  if (!(rs.beta > 0.0)) {
    rs.Xinv = MatX::Zero(r, r);
    rs.q = MatX::Zero(r, 3);
    return x_guess;
  }
  const Eigen::PartialPivLU<MatX> lu(rs.A);
  rs.Xinv = lu.solve(MatX::Identity(r, r) / rs.beta);
  const double err = (rs.A * (rs.beta * rs.Xinv) - MatX::Identity(r, r)).cwiseAbs().maxCoeff();
  if (err > 1e-4 || !std::isfinite(err)) {
    rs.fallback = true;
    rs.q = rs.A.fullPivLu().solve(rs.rhs);
  } else {
    rs.q = rs.beta * (rs.Xinv * rs.rhs);
  }
  Positions x = x_guess;
  k::parallel::lift_add(sub.V, rs.q, x);
  return x;
}

SmoothStats ajacobi_smooth(const GlobalSystem& system, std::span<const double> shift, const Positions& b,
                           Positions& x, int iterations, double omega) {
  SmoothStats stats;
  const int n = system.size();
  std::vector<double> diag(n);
  for (int i = 0; i < n; ++i) {
    diag[i] = system.diag[i] + (shift.empty() ? 0.0 : shift[i]);
    if (!(diag[i] > 0.0)) throw Error("A-Jacobi: non-positive diagonal entry");
  }
  const double theta = 1.0 - omega;
  const int steps = (iterations + 1) / 2;
  Positions r, u;
  std::vector<double> history;
  history.reserve(steps);
  // Growth below this is round-off, not divergence.
  const double noise = 1e-12 * std::max(b.norm(), 1e-300);
  for (int s = 0; s < steps; ++s) {
    k::parallel::rank2_jacobi_step(system.H, diag, shift, b, x, theta, r, u);
    const double norm = r.norm();
    if (s == 0) stats.initial_residual = norm;
    stats.final_residual = norm;
    history.push_back(norm);
    ++stats.steps;
    // Ten rank-2 steps are twenty Jacobi iterations.
    if (s >= 10 && norm > 10.0 * history[s - 10] && norm > noise) {
      std::ostringstream msg;
      msg << "A-Jacobi diverging (residual " << history[s - 10] << " -> " << norm
          << " over 20 iterations); raise the damping weight omega";
      throw Error(msg.str());
    }
  }
  return stats;
}

double jacobi_spectral_radius(const GlobalSystem& system, int iterations) {
  const int n = system.size();
  if (n == 0) return 0.0;
  VecX dinv(n);
  for (int i = 0; i < n; ++i) dinv[i] = 1.0 / std::sqrt(system.diag[i]);
  // Alternating start vector excites the high end of the spectrum.
  VecX v(n);
  for (int i = 0; i < n; ++i) v[i] = (i % 2 ? 1.0 : -1.0) * (1.0 + 0.1 * std::sin(1.0 + i));
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const VecX w = dinv.asDiagonal() * (system.H * (dinv.asDiagonal() * v));
    lambda = v.dot(w);
    const double norm = w.norm();
    if (!(norm > 0.0)) break;
    v = w / norm;
  }
  return lambda;
}

double safe_jacobi_omega(double rho) {
  const double limit = 1.9 / 1.05;
  return rho <= limit ? 0.0 : 1.0 - limit / rho;
}

double system_residual(const GlobalSystem& system, std::span<const double> shift, const Positions& b,
                       const Positions& x) {
  Positions r;
  k::parallel::residual(system.H, shift, b, x, r);
  return r.norm();
}

}  // namespace pdsim
