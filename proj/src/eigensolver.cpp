#include "pdsim/eigensolver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace pdsim {

namespace {

// Removes the components along the first `k` columns of Q, twice.
void orthogonalize(const MatX& Q, int k, VecX& w) {
  if (k == 0) return;
  for (int pass = 0; pass < 2; ++pass) {
    const VecX c = Q.leftCols(k).transpose() * w;
    w.noalias() -= Q.leftCols(k) * c;
  }
}

VecX random_unit(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist;
  VecX v(n);
  for (int i = 0; i < n; ++i) v[i] = dist(rng);
  return v.normalized();
}

}  // namespace

EigenResult smallest_eigenpairs(const SparseMat& H, int count, const EigenOptions& options) {
  const int n = static_cast<int>(H.rows());
  if (H.cols() != n) throw Error("eigensolver: matrix must be square");
  if (count < 1 || count > n) throw Error("eigensolver: need 1 <= count <= n");

  const Eigen::SparseMatrix<double> Hc = H;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(Hc);
  if (ldlt.info() != Eigen::Success) throw Error("eigensolver: factorization of the shifted matrix failed");

  std::mt19937_64 rng(options.seed);
  int m = std::min(n, std::max(2 * count + 40, count + 60));
  VecX start = random_unit(n, rng);
  double last_residual = 0.0;

  for (int attempt = 0; attempt <= options.max_restarts; ++attempt) {
    MatX Q(n, m);
    Q.col(0) = start;
    for (int j = 0; j + 1 < m; ++j) {
      VecX w = ldlt.solve(Q.col(j));
      orthogonalize(Q, j + 1, w);
      double nw = w.norm();
      if (!(nw > 1e-10 * std::max(1.0, w.cwiseAbs().maxCoeff()))) {
        // Invariant subspace found: continue with a fresh direction.
        for (int tries = 0; tries < 8; ++tries) {
          w = random_unit(n, rng);
          orthogonalize(Q, j + 1, w);
          nw = w.norm();
          if (nw > 1e-6) break;
        }
      }
      Q.col(j + 1) = w / nw;
    }

    // Rayleigh-Ritz with H itself in the Krylov basis.
    const MatX HQ = Hc * Q;
    MatX S = Q.transpose() * HQ;
    S = 0.5 * (S + S.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<MatX> small(S);
    if (small.info() != Eigen::Success) throw Error("eigensolver: projected eigenproblem failed");

    EigenResult out;
    out.values = small.eigenvalues().head(count);
    out.vectors = Q * small.eigenvectors().leftCols(count);
    out.krylov_dimension = m;
    const MatX R = HQ * small.eigenvectors().leftCols(count) - out.vectors * out.values.asDiagonal();
    double worst = 0.0;
    for (int i = 0; i < count; ++i) worst = std::max(worst, R.col(i).norm());
    out.max_residual = worst;
    last_residual = worst;
    const double scale = std::abs(out.values[count - 1]);
    if (worst <= options.tolerance * scale || m == n) {
      // Fix signs so the largest-magnitude entry of each vector is positive.
      for (int i = 0; i < count; ++i) {
        Eigen::Index k;
        out.vectors.col(i).cwiseAbs().maxCoeff(&k);
        if (out.vectors(k, i) < 0.0) out.vectors.col(i) *= -1.0;
      }
      return out;
    }
    start = out.vectors.rowwise().sum();
    start += 1e-3 * start.norm() * random_unit(n, rng);
    start.normalize();
    m = std::min(n, static_cast<int>(std::ceil(m * 1.6)));
  }
  std::ostringstream msg;
  msg << "eigensolver did not converge: max residual " << last_residual << " for " << count << " eigenpairs";
  throw Error(msg.str());
}

}  // namespace pdsim
