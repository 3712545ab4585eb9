#include "pdsim/kernels.hpp"
#include "pdsim/oracle.hpp"
#include "pdsim/subspace.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <Eigen/Dense>

using namespace pdtest;

namespace {

// Jittered grid so the spectrum has no symmetric multiplicities.
struct Fixture {
  ClothMesh mesh;
  ElasticConstraints el;
  GlobalSystem sys;
  Positions X;
};

Fixture fixture(int nx, int ny, std::uint64_t seed, double bend = 1e-2, std::span<const int> pins = {}) {
  std::mt19937_64 rng(seed);
  GridSpec g;
  g.nx = nx;
  g.ny = ny;
  g.height = 0.7;
  ObjMesh m = grid_mesh(g);
  std::uniform_real_distribution<double> U(-0.2, 0.2);
  const double dx = 1.0 / (nx - 1);
  for (int v = 0; v < m.vertices.rows(); ++v) {
    m.vertices(v, 0) += U(rng) * dx;
    m.vertices(v, 2) += U(rng) * dx;
    m.vertices(v, 1) += U(rng) * dx;
  }
  Fixture f;
  f.mesh = build_mesh(m.vertices, m.triangles, 0.3, pins);
  f.el = build_elastic(f.mesh, {160.0, bend});
  f.sys = assemble_global(f.mesh, f.el, 1.0 / 150.0);
  f.X = to_free(f.mesh, f.mesh.rest_positions);
  return f;
}

Positions random_block(int n, std::mt19937_64& rng) { return random_positions(n, rng); }

std::vector<double> random_shift(int n, std::mt19937_64& rng, int active, double wmax) {
  std::vector<double> s(n, 0.0);
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::uniform_real_distribution<double> w(0.0, wmax);
  for (int k = 0; k < active; ++k) s[pick(rng)] += w(rng);
  return s;
}

void active_of(const std::vector<double>& shift, std::vector<int>& rows, std::vector<double>& w) {
  rows.clear();
  w.clear();
  for (int i = 0; i < static_cast<int>(shift.size()); ++i)
    if (shift[i] > 0.0) {
      rows.push_back(i);
      w.push_back(shift[i]);
    }
}

}  // namespace

TEST_CASE("eigensolver on a diagonal matrix returns coordinate axes") {
  const int n = 200;
  std::vector<Eigen::Triplet<double>> t;
  VecX d(n);
  for (int i = 0; i < n; ++i) {
    d[i] = 1.0 + ((i * 37) % n);
    t.emplace_back(i, i, d[i]);
  }
  SparseMat H(n, n);
  H.setFromTriplets(t.begin(), t.end());
  const EigenResult r = smallest_eigenpairs(H, 10);
  for (int k = 0; k < 10; ++k) {
    CHECK(r.values[k] == doctest::Approx(1.0 + k).epsilon(1e-12));
    int arg;
    r.vectors.col(k).cwiseAbs().maxCoeff(&arg);
    CHECK(d[arg] == 1.0 + k);
    CHECK(std::abs(r.vectors(arg, k)) == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("build_subspace matches a dense eigensolver on a 50-vertex mesh") {
  const Fixture f = fixture(10, 5, 1);
  REQUIRE(f.mesh.vertex_count() == 50);
  const int rb = 20;
  const Subspace s = build_subspace(f.sys, f.X, rb, 8);
  const MatX D = dense_matrix(f.sys.H);
  const Eigen::SelfAdjointEigenSolver<MatX> es(D);
  const double top = es.eigenvalues()[rb - 1];
  for (int k = 0; k < rb; ++k) {
    CHECK(std::abs(s.lambda[k] - es.eigenvalues()[k]) <= 1e-8 * top);
    const double align = std::abs(s.U.col(k).dot(es.eigenvectors().col(k)));
    CHECK(align == doctest::Approx(1.0).epsilon(1e-8));
  }
  CHECK((s.U.transpose() * s.U - MatX::Identity(rb, rb)).cwiseAbs().maxCoeff() <= 1e-10);
  const MatX UHU = s.U.transpose() * D * s.U;
  const MatX off = UHU - MatX(UHU.diagonal().asDiagonal());
  CHECK(off.norm() <= 1e-8 * UHU.diagonal().norm());
  for (int k = 1; k < rb; ++k) CHECK(s.lambda[k] >= s.lambda[k - 1]);
  CHECK(s.V.cols() == 8);
  CHECK((s.V - s.U.leftCols(8)).norm() == 0.0);
}

TEST_CASE("smallest_eigenpairs against dense on random sparse SPD systems") {
  std::mt19937_64 rng(44);
  for (int round = 0; round < 5; ++round) {
    const GlobalSystem g = random_system(90, rng, 2, 0.5);
    const EigenResult r = smallest_eigenpairs(g.H, 12);
    const Eigen::SelfAdjointEigenSolver<MatX> es(dense_matrix(g.H));
    for (int k = 0; k < 12; ++k) CHECK(std::abs(r.values[k] - es.eigenvalues()[k]) <= 1e-8 * es.eigenvalues()[11]);
  }
}

TEST_CASE("subspace defaults and precomputed blocks") {
  const SubspaceConfig c;
  CHECK(c.r_bar == 120);
  CHECK(c.r == 30);
  const Fixture f = fixture(12, 9, 2);
  const Subspace s = build_subspace(f.sys, f.X, 40, 12);
  const int P = kernels::packed_size(12);
  for (int j : {0, 17, 55, f.sys.size() - 1})
    for (int a = 0; a < 12; ++a)
      for (int b = a; b < 12; ++b)
        CHECK(s.rank_one_blocks[j * P + kernels::packed_index(12, a, b)] == s.V(j, a) * s.V(j, b));
  const MatX HX = dense_matrix(f.sys.H) * MatX(f.X);
  CHECK(rel_err(s.UHX, s.U.transpose() * HX) <= 1e-12);
  CHECK(rel_err(s.VHX, s.V.transpose() * HX) <= 1e-12);
  CHECK_THROWS_AS(build_subspace(f.sys, f.X, 10, 11), Error);
}

TEST_CASE("subspace_solve_free") {
  std::mt19937_64 rng(3);
  const Fixture f = fixture(8, 6, 3);
  const int n = f.sys.size();
  const MatX D = dense_matrix(f.sys.H);

  SUBCASE("rest equilibrium") {
    const Subspace s = build_subspace(f.sys, f.X, 20, 5);
    const Positions b = D * MatX(f.X);
    CHECK((subspace_solve_free(s, f.sys, b, f.X) - f.X).norm() <= 1e-12 * f.X.norm());
  }
  SUBCASE("complete basis solves exactly") {
    const Subspace s = build_subspace(f.sys, f.X, n, 5);
    const Positions b = random_block(n, rng) * 100.0;
    const MatX want = D.ldlt().solve(MatX(b));
    CHECK(rel_err(MatX(subspace_solve_free(s, f.sys, b, f.X)), want) <= 1e-8);
    const Positions guess = random_block(n, rng);
    CHECK(rel_err(MatX(subspace_solve_free(s, f.sys, b, guess)), want) <= 1e-8);
  }
  SUBCASE("Galerkin exactness") {
    const Subspace s = build_subspace(f.sys, f.X, 25, 5);
    const Positions b = random_block(n, rng) * 100.0;
    const Positions x = subspace_solve_free(s, f.sys, b, f.X);
    const MatX r = MatX(b) - D * MatX(x);
    CHECK((s.U.transpose() * r).norm() <= 1e-8 * b.norm());
  }
}

TEST_CASE("reduced_update equals the dense triple product") {
  std::mt19937_64 rng(12);
  const Fixture f = fixture(40, 40, 4);
  const Subspace s = build_subspace(f.sys, f.X, 30, 30);
  const int n = f.sys.size();
  CHECK(reduced_update(s, {}, {}).norm() == 0.0);

  const std::vector<int> one{17};
  const std::vector<double> two{2.0};
  const MatX single = reduced_update(s, one, two);
  const VecX vj = s.V.row(17).transpose();
  CHECK((single - 2.0 * vj * vj.transpose()).cwiseAbs().maxCoeff() <= 1e-15);

  for (int active : {10, 300, 1000}) {
    const auto shift = random_shift(n, rng, active, 50.0);
    std::vector<int> rows;
    std::vector<double> w;
    active_of(shift, rows, w);
    const MatX got = reduced_update(s, rows, w);
    const VecX dh = Eigen::Map<const VecX>(shift.data(), n);
    const MatX want = s.V.transpose() * dh.asDiagonal() * s.V;
    CHECK(rel_err(got, want) <= 1e-10);
    CHECK((got - got.transpose()).norm() == 0.0);
  }
}

TEST_CASE("subspace_solve_reuse") {
  std::mt19937_64 rng(8);
  const Fixture f = fixture(14, 10, 5);
  const int n = f.sys.size();
  const Subspace s = build_subspace(f.sys, f.X, 40, 12);
  const MatX D = dense_matrix(f.sys.H);
  const Positions b = D * MatX(f.X) + 50.0 * MatX(random_block(n, rng));

  SUBCASE("no collisions agrees with the free solve on r modes") {
    Subspace r_only = s;
    r_only.U = s.V;
    r_only.lambda = s.lambda.head(12);
    r_only.UHX = s.VHX;
    const Positions guess = f.X + 0.01 * random_block(n, rng);
    const Positions a = subspace_solve_reuse(s, f.sys, b, guess, {}, {}, {});
    const Positions c = subspace_solve_free(r_only, f.sys, b, guess);
    CHECK(rel_err(MatX(a), MatX(c)) <= 1e-10);
  }
  SUBCASE("dense reduced oracle and Galerkin exactness") {
    for (int round = 0; round < 10; ++round) {
      const auto shift = random_shift(n, rng, 30, 1e4 * (round + 1));
      std::vector<int> rows;
      std::vector<double> w;
      active_of(shift, rows, w);
      const Positions guess = f.X + 0.01 * random_block(n, rng);
      ReducedSystem info;
      const Positions x = subspace_solve_reuse(s, f.sys, b, guess, rows, w, shift, &info);
      const VecX dh = Eigen::Map<const VecX>(shift.data(), n);
      const MatX Hfull = D + MatX(dh.asDiagonal());
      const MatX A = MatX(s.lambda.head(12).asDiagonal()) + s.V.transpose() * dh.asDiagonal() * s.V;
      const MatX rhs = s.V.transpose() * (MatX(b) - Hfull * MatX(guess));
      const MatX q = A.ldlt().solve(rhs);
      CHECK((A * info.q - rhs).norm() <= 1e-6 * std::max((A * q - rhs).norm(), 1e-12 * rhs.norm()) + 1e-9 * rhs.norm());
      CHECK((A - A.transpose()).norm() <= 1e-12 * A.norm());
      CHECK((A * (info.beta * info.Xinv) - MatX::Identity(12, 12)).cwiseAbs().maxCoeff() <= 1e-8);
      CHECK((s.V.transpose() * (MatX(b) - Hfull * MatX(x))).norm() <= 1e-8 * b.norm());
    }
  }
}

TEST_CASE("solves leave an exact solution unchanged") {
  std::mt19937_64 rng(10);
  const Fixture f = fixture(10, 8, 6);
  const int n = f.sys.size();
  const Subspace s = build_subspace(f.sys, f.X, 30, 10);
  const auto shift = random_shift(n, rng, 15, 1e3);
  std::vector<int> rows;
  std::vector<double> w;
  active_of(shift, rows, w);
  const VecX dh = Eigen::Map<const VecX>(shift.data(), n);
  const MatX Hfull = dense_matrix(f.sys.H) + MatX(dh.asDiagonal());
  const Positions x = f.X + 0.1 * random_block(n, rng);
  const Positions b = Hfull * MatX(x);
  const Positions y = subspace_solve_reuse(s, f.sys, b, x, rows, w, shift);
  CHECK((y - x).norm() <= 1e-10 * x.norm());
  Positions z = x;
  ajacobi_smooth(f.sys, shift, b, z, 20, 0.0);
  CHECK((z - x).norm() <= 1e-10 * x.norm());
}

TEST_CASE("A-Jacobi: diagonal systems converge in one step") {
  std::mt19937_64 rng(2);
  GlobalSystem g;
  const int n = 30;
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < n; ++i) t.emplace_back(i, i, 1.0 + i);
  g.H.resize(n, n);
  g.H.setFromTriplets(t.begin(), t.end());
  g.diag = g.H.diagonal();
  const Positions b = random_block(n, rng);
  Positions x = random_block(n, rng);
  ajacobi_smooth(g, {}, b, x, 2, 0.0);
  CHECK((MatX(g.H) * MatX(x) - MatX(b)).norm() <= 1e-14 * b.norm());
}

TEST_CASE("one rank-2 step equals two sequential Jacobi steps") {
  std::mt19937_64 rng(77);
  for (int round = 0; round < 100; ++round) {
    const GlobalSystem g = random_system(60 + round, rng);
    const int n = g.size();
    const auto shift = round % 2 ? random_shift(n, rng, 10, 5.0) : std::vector<double>{};
    std::vector<double> diag(n);
    for (int i = 0; i < n; ++i) diag[i] = g.diag[i] + (shift.empty() ? 0.0 : shift[i]);
    const Positions b = random_block(n, rng);
    const Positions x0 = random_block(n, rng);
    const double theta = round % 3 ? 1.0 : 0.7;
    Positions once, twice;
    kernels::serial::jacobi_step(g.H, diag, shift, b, x0, theta, once);
    kernels::serial::jacobi_step(g.H, diag, shift, b, once, theta, twice);
    Positions fused = x0, r, u;
    kernels::serial::rank2_jacobi_step(g.H, diag, shift, b, fused, theta, r, u);
    CHECK((fused - twice).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, twice.cwiseAbs().maxCoeff()));
    Positions par = x0;
    kernels::parallel::rank2_jacobi_step(g.H, diag, shift, b, par, theta, r, u);
    CHECK((par - fused).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("serial and parallel kernels agree bitwise") {
  std::mt19937_64 rng(5);
  const Fixture f = fixture(20, 20, 7);
  const int n = f.sys.size();
  const Subspace s = build_subspace(f.sys, f.X, 24, 16);
  const Positions x = random_block(n, rng), b = random_block(n, rng);
  const auto shift = random_shift(n, rng, 40, 10.0);
  Positions ys, yp;
  kernels::serial::spmv(f.sys.H, x, ys);
  kernels::parallel::spmv(f.sys.H, x, yp);
  CHECK((ys - yp).cwiseAbs().maxCoeff() == 0.0);
  kernels::serial::residual(f.sys.H, shift, b, x, ys);
  kernels::parallel::residual(f.sys.H, shift, b, x, yp);
  CHECK((ys - yp).cwiseAbs().maxCoeff() == 0.0);
  MatX ps, pp;
  kernels::serial::project(s.U, x, ps);
  kernels::parallel::project(s.U, x, pp);
  CHECK((ps - pp).cwiseAbs().maxCoeff() == 0.0);
  CHECK(rel_err(ps, s.U.transpose() * MatX(x)) <= 1e-13);
  Positions ls = x, lp = x;
  kernels::serial::lift_add(s.U, ps, ls);
  kernels::parallel::lift_add(s.U, ps, lp);
  CHECK((ls - lp).cwiseAbs().maxCoeff() == 0.0);
  std::vector<int> rows;
  std::vector<double> w;
  active_of(shift, rows, w);
  std::vector<double> rs, rp;
  kernels::serial::reduced_update(s.rank_one_blocks, s.r, rows, w, rs);
  kernels::parallel::reduced_update(s.rank_one_blocks, s.r, rows, w, rp);
  CHECK(rs == rp);
}

TEST_CASE("A-Jacobi divergence is detected and auto damping fixes it") {
  // Stretch plus bending on a chain: H = eps I + L + L^2 with L the path
  // Laplacian. The bending term pushes rho(D^-1 H) to about 2.5.
  const int n = 40;
  MatX L = MatX::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) {
    L(i, i) += 1.0;
    L(i + 1, i + 1) += 1.0;
    L(i, i + 1) -= 1.0;
    L(i + 1, i) -= 1.0;
  }
  const MatX Hd = 0.01 * MatX::Identity(n, n) + L + L * L;
  GlobalSystem g;
  g.H = Hd.sparseView();
  g.diag = g.H.diagonal();
  const MatX D = dense_matrix(g.H);
  const VecX dinv = g.diag.cwiseSqrt().cwiseInverse();
  const Eigen::SelfAdjointEigenSolver<MatX> es(dinv.asDiagonal() * D * dinv.asDiagonal());
  const double rho = jacobi_spectral_radius(g, 2000);
  CHECK(rho == doctest::Approx(es.eigenvalues().maxCoeff()).epsilon(1e-6));
  REQUIRE(rho > 2.0);

  std::mt19937_64 rng(1);
  const Positions b = random_block(n, rng);
  Positions x = Positions::Zero(n, 3);
  CHECK_THROWS_AS(ajacobi_smooth(g, {}, b, x, 400, 0.0), Error);
  const double omega = safe_jacobi_omega(rho);
  CHECK(omega > 0.0);
  CHECK((1.0 - omega) * rho == doctest::Approx(1.9 / 1.05).epsilon(1e-12));
  x.setZero();
  const SmoothStats st = ajacobi_smooth(g, {}, b, x, 400, omega);
  CHECK(st.final_residual < st.initial_residual);
  CHECK(safe_jacobi_omega(1.5) == 0.0);
}

TEST_CASE("plain smoothing barely touches low modes on the cantilever strip") {
  const SceneConfig c = cantilever_scene(1.0);
  const Scene scene = build_scene(c);
  const Simulator sim = make_simulator(scene, c);
  const GlobalSystem& sys = sim.system();
  const Subspace& sub = sim.subspace();
  const Positions z = compute_z(sim.state(), sim.mesh(), c.solver.h, sim.external_force());
  std::vector<Vec3> y;
  project_elastic(sim.mesh(), sim.elastic(), sim.state().x, y);
  const SystemRhs rhs = assemble_rhs(sim.mesh(), sys, sim.elastic(), z, y, {}, z);
  const Positions x0 = to_free(sim.mesh(), sim.state().x);
  Positions r0, r1;
  kernels::serial::residual(sys.H, {}, rhs.b, x0, r0);
  Positions x = x0;
  ajacobi_smooth(sys, {}, rhs.b, x, 100, sim.omega());
  kernels::serial::residual(sys.H, {}, rhs.b, x, r1);
  const int modes = 30;
  const auto pre = spectrum_report(sub, r0, modes);
  const auto post = spectrum_report(sub, r1, modes);
  double low_pre = 0, low_post = 0;
  for (int m = 0; m < modes; ++m) {
    low_pre += pre[m] * pre[m];
    low_post += post[m] * post[m];
  }
  // Residual outside the whole basis (U is orthonormal).
  auto outside = [&](const Positions& r) {
    MatX q;
    kernels::serial::project(sub.U, r, q);
    return (r - sub.U * q).norm();
  };
  const double low_left = std::sqrt(low_post / low_pre), high_left = outside(r1) / outside(r0);
  INFO("low-mode residual left " << low_left << ", residual outside the basis left " << high_left);
  CHECK(low_left >= 0.5);
  CHECK(1.0 - high_left >= 100.0 * (1.0 - low_left));

  // One subspace solve annihilates the low-mode coefficients.
  const Positions xs = subspace_solve_free(sub, sys, rhs.b, x0);
  Positions rs;
  kernels::serial::residual(sys.H, {}, rhs.b, xs, rs);
  const auto after = spectrum_report(sub, rs, modes);
  for (int m = 0; m < 30; ++m) CHECK(after[m] <= 1e-4 * std::max(pre[m], 1e-30) + 1e-10 * rhs.b.norm());
}

TEST_CASE("spectrum report") {
  const Fixture f = fixture(8, 8, 9);
  const Subspace s = build_subspace(f.sys, f.X, 20, 5);
  Positions r = Positions::Zero(f.sys.size(), 3);
  r.col(1) = s.U.col(4);
  const auto c = spectrum_report(s, r, 20);
  CHECK(c[4] == doctest::Approx(1.0).epsilon(1e-10));
  for (int m = 0; m < 20; ++m)
    if (m != 4) CHECK(c[m] <= 1e-10);
  const auto zero = spectrum_report(s, Positions::Zero(f.sys.size(), 3), 20);
  for (double v : zero) CHECK(v == 0.0);
  CHECK_THROWS_AS(spectrum_report(s, r, 21), Error);
}
