#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SparseCore>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdsim {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// One row per vertex. Row-major so a vertex is three contiguous doubles.
using Positions = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

// Scalar per-vertex system matrix; the 3D operator is this matrix Kronecker I3.
using SparseMat = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

using Tri = std::array<int, 3>;

inline Vec3 row3(const Positions& x, int i) { return x.row(i).transpose(); }

inline void set_row3(Positions& x, int i, const Vec3& v) { x.row(i) = v.transpose(); }

// Frobenius norm of the difference of two position blocks.
inline double diff_norm(const Positions& a, const Positions& b) { return (a - b).norm(); }
// Largest per-vertex displacement.
inline double max_row_diff(const Positions& a, const Positions& b) {
  return a.rows() == 0 ? 0.0 : (a - b).rowwise().norm().maxCoeff();
}

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MeshError : public Error {
 public:
  MeshError(const std::string& what, int index) : Error(what), index_(index) {}
  int index() const { return index_; }

 private:
  int index_;
};

}  // namespace pdsim
