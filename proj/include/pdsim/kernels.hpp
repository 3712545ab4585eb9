#pragma once

// Data-parallel inner loops of the global solve. Every kernel exists twice:
// `serial` is the reference, `parallel` is the OpenMP version used by the
// simulator. Both compute each output element with the same operation order,
// so results agree bitwise at any thread count.

#include "pdsim/types.hpp"

#include <span>

namespace pdsim::kernels {

// Packed upper triangle of an r x r symmetric matrix, row by row.
inline int packed_size(int r) { return r * (r + 1) / 2; }
inline int packed_index(int r, int i, int j) { return i * r - i * (i - 1) / 2 + (j - i); }  // i <= j

void unpack_symmetric(std::span<const double> packed, int r, MatX& out);

int max_threads();

namespace serial {

// y = H x
void spmv(const SparseMat& H, const Positions& x, Positions& y);

// r = b - (H + diag(shift)) x; an empty shift means zero.
void residual(const SparseMat& H, std::span<const double> shift, const Positions& b, const Positions& x,
              Positions& r);

// out = x + theta D^-1 (b - (H + diag(shift)) x), D the full diagonal.
void jacobi_step(const SparseMat& H, std::span<const double> diag, std::span<const double> shift,
                 const Positions& b, const Positions& x, double theta, Positions& out);

// Two damped Jacobi updates fused into one aggregated step, in place.
// r and u are caller-provided scratch.
void rank2_jacobi_step(const SparseMat& H, std::span<const double> diag, std::span<const double> shift,
                       const Positions& b, Positions& x, double theta, Positions& r, Positions& u);

// out = V^T y, V column-major n x r.
void project(const MatX& V, const Positions& y, MatX& out);

// x += V q
void lift_add(const MatX& V, const MatX& q, Positions& x);

// out = sum_k w[k] * blocks[idx[k]], blocks stored as packed upper triangles,
// one row of packed_size(r) doubles per vertex.
void reduced_update(const std::vector<double>& blocks, int r, std::span<const int> idx, std::span<const double> w,
                    std::vector<double>& out);

}  // namespace serial

namespace parallel {

void spmv(const SparseMat& H, const Positions& x, Positions& y);
void residual(const SparseMat& H, std::span<const double> shift, const Positions& b, const Positions& x,
              Positions& r);
void jacobi_step(const SparseMat& H, std::span<const double> diag, std::span<const double> shift,
                 const Positions& b, const Positions& x, double theta, Positions& out);
void rank2_jacobi_step(const SparseMat& H, std::span<const double> diag, std::span<const double> shift,
                       const Positions& b, Positions& x, double theta, Positions& r, Positions& u);
void project(const MatX& V, const Positions& y, MatX& out);
void lift_add(const MatX& V, const MatX& q, Positions& x);
void reduced_update(const std::vector<double>& blocks, int r, std::span<const int> idx, std::span<const double> w,
                    std::vector<double>& out);

}  // namespace parallel

}  // namespace pdsim::kernels
