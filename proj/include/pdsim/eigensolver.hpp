#pragma once

#include "pdsim/types.hpp"

namespace pdsim {

struct EigenOptions {
  double tolerance = 1e-8;  // residual |Hu - lu| relative to the largest wanted eigenvalue
  int max_restarts = 6;
  std::uint64_t seed = 0x5eed;
};

struct EigenResult {
  VecX values;   // ascending
  MatX vectors;  // n x count, orthonormal columns
  double max_residual = 0.0;
  int krylov_dimension = 0;
};

// Smallest `count` eigenpairs of a sparse SPD matrix by shift-invert Lanczos
// (shift 0) with full reorthogonalization and a Rayleigh-Ritz cleanup in the
// Krylov basis. Throws Error with the residual when it does not converge.
EigenResult smallest_eigenpairs(const SparseMat& H, int count, const EigenOptions& options = {});

}  // namespace pdsim
