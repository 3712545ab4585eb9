#include "pdsim/kernels.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pdsim::kernels {

namespace {

struct Csr {
  const int* outer;
  const int* inner;
  const double* val;
  int rows;
  explicit Csr(const SparseMat& H)
      : outer(H.outerIndexPtr()), inner(H.innerIndexPtr()), val(H.valuePtr()), rows(static_cast<int>(H.rows())) {}
};

inline void row_product(const Csr& H, const double* x, int i, double out[3]) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  for (int p = H.outer[i]; p < H.outer[i + 1]; ++p) {
    const double v = H.val[p];
    const double* xj = x + 3 * H.inner[p];
    s0 += v * xj[0];
    s1 += v * xj[1];
    s2 += v * xj[2];
  }
  out[0] = s0;
  out[1] = s1;
  out[2] = s2;
}

inline void residual_row(const Csr& H, std::span<const double> shift, const double* b, const double* x, int i,
                         double* r) {
  double hx[3];
  row_product(H, x, i, hx);
  const double s = shift.empty() ? 0.0 : shift[i];
  for (int c = 0; c < 3; ++c) r[3 * i + c] = b[3 * i + c] - (hx[c] + s * x[3 * i + c]);
}

// u = theta D^-1 r
inline void scaled_row(std::span<const double> diag, const double* r, double theta, int i, double* u) {
  const double inv = theta / diag[i];
  for (int c = 0; c < 3; ++c) u[3 * i + c] = inv * r[3 * i + c];
}

// x += u + theta D^-1 (r - (H + S) u)
inline void rank2_update_row(const Csr& H, std::span<const double> diag, std::span<const double> shift,
                             const double* r, const double* u, double theta, int i, double* x) {
  double hu[3];
  row_product(H, u, i, hu);
  const double s = shift.empty() ? 0.0 : shift[i];
  const double inv = theta / diag[i];
  for (int c = 0; c < 3; ++c) {
    const double r2 = r[3 * i + c] - (hu[c] + s * u[3 * i + c]);
    x[3 * i + c] += u[3 * i + c] + inv * r2;
  }
}

inline void project_row(const MatX& V, const Positions& y, int k, MatX& out) {
  const double* col = V.col(k).data();
  const double* yd = y.data();
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  const Eigen::Index n = V.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    s0 += col[i] * yd[3 * i];
    s1 += col[i] * yd[3 * i + 1];
    s2 += col[i] * yd[3 * i + 2];
  }
  out(k, 0) = s0;
  out(k, 1) = s1;
  out(k, 2) = s2;
}

inline void lift_row(const MatX& V, const MatX& q, int i, double* x) {
  const Eigen::Index r = V.cols();
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  for (Eigen::Index k = 0; k < r; ++k) {
    const double v = V(i, k);
    s0 += v * q(k, 0);
    s1 += v * q(k, 1);
    s2 += v * q(k, 2);
  }
  x[3 * i] += s0;
  x[3 * i + 1] += s1;
  x[3 * i + 2] += s2;
}

constexpr int kReduceChunk = 64;

inline void reduce_chunk(const std::vector<double>& blocks, int P, std::span<const int> idx, std::span<const double> w,
                         int begin, int end, double* out) {
  for (int e = begin; e < end; ++e) out[e] = 0.0;
  for (size_t k = 0; k < idx.size(); ++k) {
    const double* blk = blocks.data() + static_cast<size_t>(idx[k]) * P;
    const double wk = w[k];
    for (int e = begin; e < end; ++e) out[e] += wk * blk[e];
  }
}

}  // namespace

void unpack_symmetric(std::span<const double> packed, int r, MatX& out) {
  out.resize(r, r);
  int p = 0;
  for (int i = 0; i < r; ++i)
    for (int j = i; j < r; ++j) {
      out(i, j) = packed[p];
      out(j, i) = packed[p];
      ++p;
    }
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace serial {

void spmv(const SparseMat& H, const Positions& x, Positions& y) {
  const Csr csr(H);
  y.resize(csr.rows, 3);
  for (int i = 0; i < csr.rows; ++i) row_product(csr, x.data(), i, y.data() + 3 * i);
}

void residual(const SparseMat& H, std::span<const double> shift, const Positions& b, const Positions& x,
              Positions& r) {
  const Csr csr(H);
  r.resize(csr.rows, 3);
  for (int i = 0; i < csr.rows; ++i) residual_row(csr, shift, b.data(), x.data(), i, r.data());
}

void jacobi_step(const SparseMat& H, std::span<const double> diag, std::span<const double> shift,
                 const Positions& b, const Positions& x, double theta, Positions& out) {
  const Csr csr(H);
  out.resize(csr.rows, 3);
  for (int i = 0; i < csr.rows; ++i) {
    double r[3];
    double hx[3];
    row_product(csr, x.data(), i, hx);
    const double s = shift.empty() ? 0.0 : shift[i];
    for (int c = 0; c < 3; ++c) r[c] = b(i, c) - (hx[c] + s * x(i, c));
    const double inv = theta / diag[i];
    for (int c = 0; c < 3; ++c) out(i, c) = x(i, c) + inv * r[c];
  }
}

void rank2_jacobi_step(const SparseMat& H, std::span<const double> diag, std::span<const double> shift,
                       const Positions& b, Positions& x, double theta, Positions& r, Positions& u) {
  const Csr csr(H);
  r.resize(csr.rows, 3);
  u.resize(csr.rows, 3);
  for (int i = 0; i < csr.rows; ++i) {
    residual_row(csr, shift, b.data(), x.data(), i, r.data());
    scaled_row(diag, r.data(), theta, i, u.data());
  }
  for (int i = 0; i < csr.rows; ++i) rank2_update_row(csr, diag, shift, r.data(), u.data(), theta, i, x.data());
}

void project(const MatX& V, const Positions& y, MatX& out) {
  out.resize(V.cols(), 3);
  for (int k = 0; k < V.cols(); ++k) project_row(V, y, k, out);
}

void lift_add(const MatX& V, const MatX& q, Positions& x) {
  for (int i = 0; i < V.rows(); ++i) lift_row(V, q, i, x.data());
}

void reduced_update(const std::vector<double>& blocks, int r, std::span<const int> idx, std::span<const double> w,
                    std::vector<double>& out) {
  const int P = packed_size(r);
  out.assign(P, 0.0);
  for (size_t k = 0; k < idx.size(); ++k) {
    const double* blk = blocks.data() + static_cast<size_t>(idx[k]) * P;
    const double wk = w[k];
    for (int e = 0; e < P; ++e) out[e] += wk * blk[e];
  }
}

}  // namespace serial

namespace parallel {

void spmv(const SparseMat& H, const Positions& x, Positions& y) {
  const Csr csr(H);
  y.resize(csr.rows, 3);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < csr.rows; ++i) row_product(csr, x.data(), i, y.data() + 3 * i);
}

void residual(const SparseMat& H, std::span<const double> shift, const Positions& b, const Positions& x,
              Positions& r) {
  const Csr csr(H);
  r.resize(csr.rows, 3);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < csr.rows; ++i) residual_row(csr, shift, b.data(), x.data(), i, r.data());
}

void jacobi_step(const SparseMat& H, std::span<const double> diag, std::span<const double> shift,
                 const Positions& b, const Positions& x, double theta, Positions& out) {
  const Csr csr(H);
  out.resize(csr.rows, 3);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < csr.rows; ++i) {
    double r[3];
    double hx[3];
    row_product(csr, x.data(), i, hx);
    const double s = shift.empty() ? 0.0 : shift[i];
    for (int c = 0; c < 3; ++c) r[c] = b(i, c) - (hx[c] + s * x(i, c));
    const double inv = theta / diag[i];
    for (int c = 0; c < 3; ++c) out(i, c) = x(i, c) + inv * r[c];
  }
}

void rank2_jacobi_step(const SparseMat& H, std::span<const double> diag, std::span<const double> shift,
                       const Positions& b, Positions& x, double theta, Positions& r, Positions& u) {
  const Csr csr(H);
  r.resize(csr.rows, 3);
  u.resize(csr.rows, 3);
#pragma omp parallel
  {
#pragma omp for schedule(static)
    for (int i = 0; i < csr.rows; ++i) {
      residual_row(csr, shift, b.data(), x.data(), i, r.data());
      scaled_row(diag, r.data(), theta, i, u.data());
    }
#pragma omp for schedule(static)
    for (int i = 0; i < csr.rows; ++i) rank2_update_row(csr, diag, shift, r.data(), u.data(), theta, i, x.data());
  }
}

void project(const MatX& V, const Positions& y, MatX& out) {
  out.resize(V.cols(), 3);
  const int r = static_cast<int>(V.cols());
#pragma omp parallel for schedule(static)
  for (int k = 0; k < r; ++k) project_row(V, y, k, out);
}

void lift_add(const MatX& V, const MatX& q, Positions& x) {
  const int n = static_cast<int>(V.rows());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) lift_row(V, q, i, x.data());
}

void reduced_update(const std::vector<double>& blocks, int r, std::span<const int> idx, std::span<const double> w,
                    std::vector<double>& out) {
  const int P = packed_size(r);
  out.assign(P, 0.0);
  const int chunks = (P + kReduceChunk - 1) / kReduceChunk;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < chunks; ++c) {
    const int begin = c * kReduceChunk;
    const int end = std::min(P, begin + kReduceChunk);
    reduce_chunk(blocks, P, idx, w, begin, end, out.data());
  }
}

}  // namespace parallel

}  // namespace pdsim::kernels
