// Acceptance checks. One PASS/FAIL line per criterion, exit code 1 when any
// criterion fails. Arguments restrict the run to the listed criteria.

#include "pdsim/energy.hpp"
#include "pdsim/kernels.hpp"
#include "pdsim/oracle.hpp"
#include "pdsim/run.hpp"
#include "test_util.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

using namespace pdtest;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Everything a single LG solve needs at a fixed state.
struct ContactSystem {
  Positions z;
  Positions x_world;
  std::vector<CollisionPair> pairs;
  std::vector<CollisionTarget> targets;
  SystemRhs rhs;
  Positions x_free;
};

ContactSystem contact_system(const Simulator& sim) {
  const StepConfig& c = sim.config();
  ContactSystem s;
  s.z = compute_z(sim.state(), sim.mesh(), c.h, sim.external_force());
  s.x_world = sim.world_state();
  const CollisionWorld& w = sim.world();
  PatchBVH bvh(w);
  const double gate = c.gate * c.d_hat;
  for (const auto& prim : broad_phase(w, bvh, s.x_world, s.x_world, gate)) {
    CollisionPair p = make_collision_pair(prim, s.x_world);
    if (p.distance >= gate) continue;
    p.weight = sim.base_weight();
    s.pairs.push_back(p);
  }
  const int nc = w.cloth_vertices;
  const Positions x = s.x_world.topRows(nc);
  std::vector<Vec3> edge_targets;
  project_elastic(sim.mesh(), sim.elastic(), x, edge_targets);
  collision_targets(s.pairs, w, s.x_world, c.d_hat, s.targets);
  s.rhs = assemble_rhs(sim.mesh(), sim.system(), sim.elastic(), s.z, edge_targets, s.targets, s.z);
  s.x_free = to_free(sim.mesh(), x);
  return s;
}

double colliding_fraction(const Simulator& sim, const ContactSystem& s) {
  return static_cast<double>(s.rhs.active_rows.size()) / sim.mesh().free_count();
}

SparseMat shifted(const SparseMat& H, std::span<const double> shift) {
  SparseMat A = H;
  for (int i = 0; i < A.rows(); ++i)
    if (!shift.empty()) A.coeffRef(i, i) += shift[i];
  return A;
}

// ---------------------------------------------------------------------------
// 1 and the drape state for 2b

struct SceneRun {
  bool ok = true;
  int steps = 0;
  int verified = 0;
  long long lg = 0;
  double seconds = 0.0;
  std::string failure;
};

SceneRun run_verified(SceneConfig c, int steps, const std::function<void(const Simulator&, int)>& after_step = {}) {
  c.solver.verify = true;
  Simulator sim = make_simulator(build_scene(c), c);
  SceneRun out;
  const auto t0 = Clock::now();
  for (int s = 0; s < steps; ++s) {
    try {
      const StepReport r = sim.step();
      out.lg += r.lg_iterations;
      out.verified += r.verified;
      if (!r.verified || !r.penetration_free) {
        out.ok = false;
        out.failure = "step " + std::to_string(s) + " not verified or intersecting";
        break;
      }
    } catch (const std::exception& e) {
      out.ok = false;
      out.failure = "step " + std::to_string(s) + ": " + e.what();
      break;
    }
    ++out.steps;
    if (after_step) after_step(sim, s);
  }
  out.seconds = seconds_since(t0);
  return out;
}

std::unique_ptr<Simulator> g_drape;  // drape snapshot with >= 20% colliding vertices
double g_drape_fraction = 0.0;
int g_drape_step = -1;

Outcome criterion1() {
  struct Job {
    SceneConfig config;
    int steps;
  };
  const std::vector<Job> jobs = {{sphere_drape_scene(), 200}, {desk_fold_scene(), 300}, {twist_scene(), 400}};
  Outcome o;
  o.pass = true;
  std::ostringstream d;
  for (const auto& job : jobs) {
    const Scene scene = build_scene(job.config);
    std::function<void(const Simulator&, int)> hook;
    if (job.config.name == "sphere_drape") {
      hook = [&](const Simulator& sim, int step) {
        if (g_drape || step % 5 != 4) return;
        const ContactSystem cs = contact_system(sim);
        const double f = colliding_fraction(sim, cs);
        g_drape_fraction = std::max(g_drape_fraction, f);
        if (f >= 0.2) {
          g_drape = std::make_unique<Simulator>(make_simulator(scene, job.config));
          g_drape->state() = sim.state();
          g_drape_step = step;
        }
      };
    }
    const SceneRun r = run_verified(job.config, job.steps, hook);
    d << job.config.name << " (" << scene.mesh.vertex_count() << " vertices): " << r.verified << "/" << job.steps
      << " steps verified, " << r.lg << " LG, " << static_cast<int>(r.seconds) << " s";
    if (!r.ok) d << " [" << r.failure << "]";
    d << "; ";
    o.pass = o.pass && r.ok && r.verified == job.steps;
  }
  o.detail = d.str();
  return o;
}

// ---------------------------------------------------------------------------
// 2

Outcome criterion2() {
  std::ostringstream d;
  bool pass = true;
  {
    const SceneConfig c = cantilever_scene();
    Simulator sim = make_simulator(build_scene(c), c);
    const ContactSystem s = contact_system(sim);
    const GlobalSystem& sys = sim.system();
    Positions a = subspace_solve_free(sim.subspace(), sys, s.rhs.b, s.x_free);
    ajacobi_smooth(sys, {}, s.rhs.b, a, 20, sim.omega());
    Positions p = s.x_free;
    ajacobi_smooth(sys, {}, s.rhs.b, p, 600, sim.omega());
    const double ra = system_residual(sys, {}, s.rhs.b, a);
    const double rp = system_residual(sys, {}, s.rhs.b, p);
    const double r0 = system_residual(sys, {}, s.rhs.b, s.x_free);
    d << "cantilever " << sys.size() * 3 << " DOF: residual " << r0 << " -> subspace+20 " << ra << ", plain 600 " << rp;
    pass = pass && ra <= rp;
  }
  if (!g_drape) {
    // Criterion 1 was skipped: run the drape until enough vertices collide.
    const SceneConfig c = sphere_drape_scene();
    const Scene scene = build_scene(c);
    Simulator sim = make_simulator(scene, c);
    for (int s = 0; s < c.output.steps && !g_drape; ++s) {
      sim.step();
      if (s % 5 != 4) continue;
      const double f = colliding_fraction(sim, contact_system(sim));
      g_drape_fraction = std::max(g_drape_fraction, f);
      if (f >= 0.2) {
        g_drape = std::make_unique<Simulator>(make_simulator(scene, c));
        g_drape->state() = sim.state();
        g_drape_step = s;
      }
    }
  }
  if (!g_drape) {
    d << "; drape never reached 20% colliding vertices (max " << g_drape_fraction << ")";
    return {false, d.str()};
  }
  const Simulator& sim = *g_drape;
  const ContactSystem s = contact_system(sim);
  const GlobalSystem& sys = sim.system();
  const auto& shift = s.rhs.collision_diag_delta;
  Eigen::SimplicialLDLT<SparseMat> ldlt(shifted(sys.H, shift));
  const Positions exact = ldlt.solve(s.rhs.b);
  const double e0 = (s.x_free - exact).norm();
  const double target = sim.config().eps_inner * e0;
  const int cap = 40000;
  // Jacobi iterations until the error drops below the inner threshold.
  auto iterations_to_threshold = [&](Positions x) {
    int it = 0;
    while ((x - exact).norm() > target && it < cap) {
      ajacobi_smooth(sys, shift, s.rhs.b, x, 2, sim.omega());
      it += 2;
    }
    return it;
  };
  const Positions reused = subspace_solve_reuse(sim.subspace(), sys, s.rhs.b, s.x_free, s.rhs.active_rows,
                                                s.rhs.active_weights, shift);
  const int with_subspace = iterations_to_threshold(reused);
  const int smoothing_only = iterations_to_threshold(s.x_free);
  d << "; drape step " << g_drape_step << ", " << 100.0 * colliding_fraction(sim, s)
    << "% colliding: Jacobi iterations to error <= " << sim.config().eps_inner << " x initial: reuse "
    << with_subspace << ", smoothing only " << smoothing_only;
  pass = pass && smoothing_only < cap && with_subspace <= 0.5 * smoothing_only;
  return {pass, d.str()};
}

// ---------------------------------------------------------------------------
// 3

Outcome criterion3() {
  const SceneConfig base = twist_scene();
  const Scene scene = build_scene(base);
  // Warm up without contact so the comparison covers 100 steps with contact.
  SimState start;
  int warm = 0;
  {
    Simulator sim = make_simulator(scene, base);
    for (;; ++warm) {
      SimState before = sim.state();
      const StepReport r = sim.step();
      if (r.tracked_pairs > 0 || warm > 1000) {
        start = before;
        break;
      }
    }
  }
  auto total_lg = [&](const std::function<void(StepConfig&)>& tweak) {
    SceneConfig c = base;
    tweak(c.solver);
    Simulator sim = make_simulator(scene, c);
    sim.state() = start;
    long long lg = 0;
    for (int s = 0; s < 100; ++s) lg += sim.step().lg_iterations;
    return lg;
  };
  const long long ndb = total_lg([](StepConfig&) {});
  const long long dbb = total_lg([](StepConfig& s) { s.barrier = BarrierMode::DBB; });
  long long dens[3];
  const int counts[3] = {1, 3, 6};
  for (int i = 0; i < 3; ++i)
    dens[i] = total_lg([&](StepConfig& s) {
      s.adaptive_samples = false;
      s.sample_count = counts[i];
    });
  const double lo = static_cast<double>(*std::min_element(dens, dens + 3));
  const double hi = static_cast<double>(*std::max_element(dens, dens + 3));
  const double spread = (hi - lo) / lo;
  std::ostringstream d;
  d << "twist from step " << warm << ", 100 steps: NDB " << ndb << " LG, DBB " << dbb << " LG (ratio "
    << static_cast<double>(ndb) / dbb << "); fixed samples 1/3/6: " << dens[0] << "/" << dens[1] << "/" << dens[2]
    << " (spread " << 100.0 * spread << "%)";
  return {ndb <= 0.9 * dbb && spread <= 0.15, d.str()};
}

// ---------------------------------------------------------------------------
// 4

PairPoints lerp_points(const PairPoints& a, const PairPoints& b, double t) {
  PairPoints out;
  for (int k = 0; k < 4; ++k) out.p[k] = (1.0 - t) * a.p[k] + t * b.p[k];
  return out;
}

// partial_ccd over the lattice of spacing 1 / N, evaluated in pieces: the
// neighbourhood of `near` first, then row by row. Any piece reporting a hit
// means the whole lattice does.
bool lattice_partial(const Trajectory& tr, int N, const Vec2& near, const Vec2& projection) {
  const double g = 1.0 / N;
  const bool vt = tr.kind == PairKind::VertexTriangle;
  auto inside = [&](int i, int j) { return i >= 0 && j >= 0 && i <= N && j <= N && (!vt || i + j <= N); };
  SampleSet local;
  local.kind = tr.kind;
  local.includes_projection = true;
  const int i0 = static_cast<int>(std::lround(near[0] / g)), j0 = static_cast<int>(std::lround(near[1] / g));
  for (int i = i0 - 3; i <= i0 + 3; ++i)
    for (int j = j0 - 3; j <= j0 + 3; ++j)
      if (inside(i, j)) local.points.emplace_back(i * g, j * g);
  if (partial_ccd(tr.kind, tr.x0, tr.x1, local, &projection)) return true;
  SampleSet row;
  row.kind = tr.kind;
  row.includes_projection = false;
  for (int i = 0; i <= N; ++i) {
    row.points.clear();
    for (int j = 0; j <= (vt ? N - i : N); ++j) row.points.emplace_back(i * g, j * g);
    if (partial_ccd(tr.kind, tr.x0, tr.x1, row)) return true;
  }
  return false;
}

Outcome criterion4() {
  const double alpha = StepConfig{}.alpha;
  const auto corpus = random_trajectories(100000, 20240611);
  long long positives = 0, misses = 0, misses_late = 0, vt = 0, small = 0, bad_interval = 0;
  double rho_min = 1.0;
  for (const auto& tr : corpus) {
    vt += tr.kind == PairKind::VertexTriangle;
    const auto t = full_ccd(tr.kind, tr.x0, tr.x1);
    if (!t) continue;
    ++positives;
    const double rho = sample_bound(tr.H0, tr.H1, tr.L, alpha);
    rho_min = std::min(rho_min, rho);
    const Vec2 projection = pair_proximity(tr.kind, tr.x0).lambda;
    const int N = std::max(1, static_cast<int>(std::ceil(1.0 / (rho * std::sqrt(2.0)))));
    bool hit;
    if (N <= 300) {
      ++small;
      const SampleSet s = make_lattice_samples(tr.kind, rho, true);
      bad_interval += s.interval > rho;
      hit = partial_ccd(tr.kind, tr.x0, tr.x1, s, &projection);
    } else {
      const Vec2 lstar = pair_proximity(tr.kind, lerp_points(tr.x0, tr.x1, *t)).lambda;
      hit = lattice_partial(tr, N, lstar, projection);
    }
    if (!hit) {
      ++misses;
      misses_late += *t > alpha;
    }
  }
  std::ostringstream d;
  d << corpus.size() << " trajectories (" << vt << " VT), " << positives << " impacts, " << misses
    << " missed (" << misses_late << " with t* > alpha), smallest rho* " << rho_min << ", " << small
    << " checked with make_lattice_samples";
  return {misses == 0 && bad_interval == 0 && positives > 0, d.str()};
}

// ---------------------------------------------------------------------------
// 5

Outcome criterion5() {
  const SampleSet vt = make_sample_set(PairKind::VertexTriangle, 3, false);
  const SampleSet ee = make_sample_set(PairKind::EdgeEdge, 3, false);
  double t_partial = 0.0, t_full = 0.0;
  long long sink_p = 0, sink_f = 0;
  const int batches = 4, per_batch = 250000;
  for (int b = 0; b < batches; ++b) {
    const auto corpus = random_trajectories(per_batch, 777 + b);
    auto t0 = Clock::now();
    for (const auto& tr : corpus)
      sink_p += partial_ccd(tr.kind, tr.x0, tr.x1, tr.kind == PairKind::VertexTriangle ? vt : ee);
    t_partial += seconds_since(t0);
    t0 = Clock::now();
    for (const auto& tr : corpus) sink_f += full_ccd(tr.kind, tr.x0, tr.x1).has_value();
    t_full += seconds_since(t0);
  }
  const double n = static_cast<double>(batches) * per_batch;
  std::ostringstream d;
  d << "1e6 pairs: partial (3 samples) " << 1e9 * t_partial / n << " ns/pair, full " << 1e9 * t_full / n
    << " ns/pair, speedup " << t_full / t_partial << "x (hits " << sink_p << " vs " << sink_f << ")";
  return {t_full >= 10.0 * t_partial, d.str()};
}

// ---------------------------------------------------------------------------
// 6

// Subspace with a random basis, enough for reduced_update.
Subspace random_subspace(int n, int r, std::mt19937_64& rng) {
  Subspace s;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  s.V = MatX::NullaryExpr(n, r, [&] { return u(rng); });
  s.r = r;
  const int P = kernels::packed_size(r);
  s.rank_one_blocks.resize(static_cast<size_t>(n) * P);
  for (int j = 0; j < n; ++j) {
    double* blk = s.rank_one_blocks.data() + static_cast<size_t>(j) * P;
    for (int a = 0; a < r; ++a)
      for (int b = a; b < r; ++b) blk[kernels::packed_index(r, a, b)] = s.V(j, a) * s.V(j, b);
  }
  return s;
}

Outcome criterion6() {
  std::mt19937_64 rng(606);
  std::ostringstream d;
  bool pass = true;
  // Accuracy against the dense triple product on a real eigenbasis.
  {
    const ClothMesh m = grid(45, 45, 1.0, 1.0, 0.2);
    const ElasticConstraints el = build_elastic(m, {});
    const GlobalSystem sys = assemble_global(m, el, 1.0 / 150.0);
    const Subspace sub = build_subspace(sys, to_free(m, m.rest_positions), 40, 30);
    double worst = 0.0;
    std::uniform_real_distribution<double> w(0.0, 1e4);
    for (int count : {1, 10, 100, 500, 1000}) {
      for (int rep = 0; rep < 5; ++rep) {
        std::vector<int> rows(sys.size());
        std::iota(rows.begin(), rows.end(), 0);
        std::shuffle(rows.begin(), rows.end(), rng);
        rows.resize(count);
        std::sort(rows.begin(), rows.end());
        std::vector<double> weights(count);
        for (double& x : weights) x = w(rng);
        VecX diag = VecX::Zero(sys.size());
        for (int k = 0; k < count; ++k) diag[rows[k]] = weights[k];
        const MatX dense = sub.V.transpose() * diag.asDiagonal() * sub.V;
        const MatX fast = reduced_update(sub, rows, weights);
        worst = std::max(worst, (fast - dense).norm() / dense.norm());
      }
    }
    d << "worst relative error " << worst;
    pass = worst <= 1e-10;
  }
  // Cost at fixed active count for n and 10 n.
  {
    const int r = 30, active = 1000;
    const int sizes[2] = {5000, 50000};
    std::vector<Subspace> subs;
    std::vector<std::vector<int>> rows(2);
    for (int k = 0; k < 2; ++k) {
      subs.push_back(random_subspace(sizes[k], r, rng));
      rows[k].resize(sizes[k]);
      std::iota(rows[k].begin(), rows[k].end(), 0);
      std::shuffle(rows[k].begin(), rows[k].end(), rng);
      rows[k].resize(active);
      std::sort(rows[k].begin(), rows[k].end());
    }
    const std::vector<double> weights(active, 1.0);
    // Interleave the two sizes so load drift hits both alike.
    std::vector<double> samples[2];
    double sink = 0.0;
    for (int rep = -5; rep < 41; ++rep) {
      for (int k = 0; k < 2; ++k) {
        const auto t0 = Clock::now();
        for (int it = 0; it < 20; ++it) sink += reduced_update(subs[k], rows[k], weights)(0, 0);
        if (rep >= 0) samples[k].push_back(seconds_since(t0) / 20);
      }
    }
    if (sink == 42.0) std::cout << "";
    double cost[2];
    for (int k = 0; k < 2; ++k) {
      std::nth_element(samples[k].begin(), samples[k].begin() + 20, samples[k].end());
      cost[k] = samples[k][20];
    }
    const double change = std::abs(cost[1] - cost[0]) / cost[0];
    d << "; " << active << " active, r = " << r << ": " << 1e6 * cost[0] << " us at n = " << sizes[0] << ", "
      << 1e6 * cost[1] << " us at n = " << sizes[1] << " (change " << 100.0 * change << "%)";
    pass = pass && change <= 0.2;
  }
  return {pass, d.str()};
}

// ---------------------------------------------------------------------------
// 7

Outcome criterion7() {
  std::mt19937_64 rng(707);
  double worst = 0.0;
  bool parallel_same = true;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int round = 0; round < 100; ++round) {
    const GlobalSystem g = random_system(50 + 3 * round, rng, 3, 0.5 + round % 4);
    const int n = g.size();
    std::vector<double> shift(n, 0.0), diag(n);
    for (int i = 0; i < n; i += 3) shift[i] = 5.0 * (u(rng) + 1.0);
    for (int i = 0; i < n; ++i) diag[i] = g.diag[i] + shift[i];
    const Positions b = Positions::NullaryExpr(n, 3, [&] { return u(rng); });
    const Positions x0 = Positions::NullaryExpr(n, 3, [&] { return u(rng); });
    const double theta = round % 2 ? 1.0 : 0.6;
    Positions once, twice;
    kernels::serial::jacobi_step(g.H, diag, shift, b, x0, theta, once);
    kernels::serial::jacobi_step(g.H, diag, shift, b, once, theta, twice);
    Positions fused = x0, r, w;
    kernels::serial::rank2_jacobi_step(g.H, diag, shift, b, fused, theta, r, w);
    worst = std::max(worst, (fused - twice).cwiseAbs().maxCoeff() / std::max(1.0, twice.cwiseAbs().maxCoeff()));
    Positions par = x0;
    kernels::parallel::rank2_jacobi_step(g.H, diag, shift, b, par, theta, r, w);
    parallel_same = parallel_same && par == fused;
  }
  std::ostringstream d;
  d << "100 SPD systems: max deviation " << worst << ", parallel kernel identical: " << (parallel_same ? "yes" : "no");
  return {worst <= 1e-12 && parallel_same, d.str()};
}

// ---------------------------------------------------------------------------
// 8

Outcome criterion8() {
  std::ostringstream d;
  bool pass = true;
  {
    // Small drape in contact, RF solved to round-off.
    SceneConfig c = sphere_drape_scene(0.15);
    Simulator sim = make_simulator(build_scene(c), c);
    ContactSystem s;
    for (int step = 0; step < 400; ++step) {
      sim.step();
      s = contact_system(sim);
      if (s.rhs.active_rows.size() >= 10) break;
    }
    StepConfig& sc = sim.config();
    sc.rf_tolerance = 1e-14;
    sc.rf_max_iterations = 20000;
    sc.rf_accel_cap = 1e300;
    // Move off the converged state so f_r is not small.
    std::mt19937_64 rng(808);
    Positions xw = s.x_world;
    const ClothMesh& m = sim.mesh();
    for (int v = 0; v < m.vertex_count(); ++v)
      if (!m.is_pinned(v)) xw.row(v) += 1e-3 * random_vec(rng).transpose();
    const RfResult rf = sim.residual_forward(s.z, xw, s.pairs);

    // Dense quadratic proxy: Hessian from the constraint definitions plus the
    // frozen collision weights, gradient from the same targets.
    const double h = sc.h;
    std::vector<CollisionPair> frozen = s.pairs;
    for (auto& p : frozen) p.weight = sim.base_weight();
    std::vector<CollisionTarget> targets;
    collision_targets(frozen, sim.world(), xw, sc.d_hat, targets);
    MatX Hd = restrict_free(m, dense_full_H(m, sim.elastic(), h));
    for (const auto& t : targets) Hd(m.free_index[t.vertex], m.free_index[t.vertex]) += t.weight;
    std::vector<Vec3> edge_targets;
    const Positions x = xw.topRows(m.vertex_count());
    project_elastic(m, sim.elastic(), x, edge_targets);
    const MatX b = dense_rhs(m, sim.elastic(), h, s.z, edge_targets, targets, s.z);
    const MatX fr = b - Hd * to_free(m, x);
    const MatX dx = Hd.ldlt().solve(fr);
    MatX from_force(m.free_count(), 3);
    for (int i = 0; i < m.free_count(); ++i) {
      const int v = m.free_vertices[i];
      from_force.row(i) = (h * h / 2.0) / m.vertex_mass[v] * rf.delta_f.row(v);
    }
    const double err = (from_force - dx).norm();
    d << m.vertex_count() << " vertices, " << targets.size() << " targets: |h^2/2 M^-1 df - H^-1 f_r| = " << err
      << " (|dx| " << dx.norm() << ", f_r mismatch " << rel_err(rf.f_r, fr) << ", " << rf.iterations
      << " RF iterations)";
    pass = err <= 1e-6 && targets.size() > 0;
  }
  {
    SceneConfig c = teapot_drop_scene();
    c.solver.iteration_cap = 50;
    c.output.steps = 60;
    SceneConfig off = c;
    off.solver.residual_forwarding = false;
    const RunSummary a = run_simulation(c), b = run_simulation(off);
    int impact = -1;
    for (size_t s = 0; s < b.reports.size(); ++s)
      if (b.reports[s].tracked_pairs > 0) {
        impact = static_cast<int>(s);
        break;
      }
    double ke_rf = 0.0, ke_off = 0.0;
    int greater = 0, triggered = 0, capped = 0;
    const bool enough = impact >= 0 && impact + 20 <= static_cast<int>(std::min(a.kinetic.size(), b.kinetic.size()));
    if (enough)
      for (int s = impact; s < impact + 20; ++s) {
        ke_rf += a.kinetic[s];
        ke_off += b.kinetic[s];
        greater += a.kinetic[s] > b.kinetic[s];
        triggered += a.reports[s].rf_triggered;
        capped += b.reports[s].cap_hit;
      }
    d << "; teapot drop, cap 50, impact at step " << impact << ": kinetic energy summed over 20 steps " << ke_rf
      << " with RF vs " << ke_off << " without (" << greater << "/20 steps higher, RF fired " << triggered << "x, cap hit on " << capped << " steps without RF)";
    pass = pass && enough && capped > 0 && a.failure.empty() && b.failure.empty() && ke_rf > ke_off;
  }
  return {pass, d.str()};
}

// ---------------------------------------------------------------------------
// 9

// Vertex `v` at distance d above an interior point of triangle (a, b, c).
void place_vt(Positions& x, int v, int a, int b, int c, double d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.2, 0.6);
  const double l1 = u(rng) * 0.5, l2 = u(rng) * 0.5;
  const Vec3 pa = row3(x, a), pb = row3(x, b), pc = row3(x, c);
  const Vec3 n = (pb - pa).cross(pc - pa).normalized();
  const Vec3 p = (1.0 - l1 - l2) * pa + l1 * pb + l2 * pc;
  x.row(v) = (p + d * n).transpose();
}

// Edge (e, f) crossing edge (a, b) at distance d, closest points interior.
void place_ee(Positions& x, int e, int f, int a, int b, double d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.3, 0.7);
  const Vec3 pa = row3(x, a), pb = row3(x, b);
  const Vec3 ea = (pb - pa).normalized();
  Vec3 m = ea.cross(random_vec(rng)).normalized();
  const Vec3 dir = m.cross(ea).normalized();
  const Vec3 c = pa + u(rng) * (pb - pa) + d * m;
  const double len = 0.2, t0 = u(rng);
  x.row(e) = (c - t0 * len * dir).transpose();
  x.row(f) = (c + (1.0 - t0) * len * dir).transpose();
}

Outcome criterion9() {
  std::mt19937_64 rng(909);
  const ClothMesh m = grid(6, 6, 1.0, 1.0, 0.3);
  const ElasticConstraints el = build_elastic(m, {160.0, 0.05});
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const char* names[5] = {"stretch", "bend", "inertia", "DBB", "combined"};
  double worst[5] = {0, 0, 0, 0, 0};
  for (int state = 0; state < 100; ++state) {
    EnergyModel model;
    model.mesh = &m;
    model.elastic = &el;
    model.h = 0.01;
    model.z = m.rest_positions + 0.05 * random_positions(m.vertex_count(), rng);
    model.d_hat = 1e-2;
    model.kappa = 1.0 + 10.0 * u01(rng);
    Positions x = m.rest_positions + 0.05 * random_positions(m.vertex_count(), rng);
    // Two VT and one EE pair inside the barrier range, on disjoint vertices.
    place_vt(x, 35, 0, 1, 6, (0.2 + 0.7 * u01(rng)) * model.d_hat, rng);
    place_vt(x, 30, 3, 4, 9, (0.2 + 0.7 * u01(rng)) * model.d_hat, rng);
    place_ee(x, 32, 33, 14, 15, (0.2 + 0.7 * u01(rng)) * model.d_hat, rng);
    model.barrier_pairs = {{PairKind::VertexTriangle, {35, 0, 1, 6}},
                           {PairKind::VertexTriangle, {30, 3, 4, 9}},
                           {PairKind::EdgeEdge, {32, 33, 14, 15}}};
    for (int term = 0; term < 5; ++term) {
      EnergyTerms t;
      t.collision = false;
      if (term < 4) {
        t.stretch = term == 0;
        t.bend = term == 1;
        t.inertia = term == 2;
        t.barrier = term == 3;
      }
      Positions g;
      energy(model, x, &g, t);
      Positions fd(x.rows(), 3);
      const double eps = 1e-6;
      for (int v = 0; v < x.rows(); ++v)
        for (int c = 0; c < 3; ++c) {
          Positions xp = x, xm = x;
          xp(v, c) += eps;
          xm(v, c) -= eps;
          fd(v, c) = (energy(model, xp, nullptr, t) - energy(model, xm, nullptr, t)) / (2.0 * eps);
        }
      worst[term] = std::max(worst[term], rel_err(fd, g));
    }
  }
  std::ostringstream d;
  bool pass = true;
  d << "100 states, worst relative error:";
  for (int k = 0; k < 5; ++k) {
    d << " " << names[k] << " " << worst[k];
    pass = pass && worst[k] <= 1e-5;
  }
  return {pass, d.str()};
}

// ---------------------------------------------------------------------------
// 10

Outcome criterion10() {
  struct Case {
    int nx, ny;
    std::vector<int> pins;
    int r_bar;
  };
  const std::vector<Case> cases = {{10, 10, {}, 40}, {10, 5, {0, 9}, 30}, {7, 13, {0, 1, 2}, 50}, {4, 4, {}, 16}};
  double worst_value = 0.0, worst_residual = 0.0, worst_off = 0.0, worst_align = 0.0;
  for (const auto& k : cases) {
    const ClothMesh m = grid(k.nx, k.ny, 1.0, 0.6, 0.3, k.pins);
    const ElasticConstraints el = build_elastic(m, {160.0, 0.01});
    const GlobalSystem sys = assemble_global(m, el, 1.0 / 150.0);
    const int rb = std::min(k.r_bar, sys.size());
    const Subspace s = build_subspace(sys, to_free(m, m.rest_positions), rb, std::min(10, rb));
    const MatX D = dense_matrix(sys.H);
    const Eigen::SelfAdjointEigenSolver<MatX> es(D);
    const double top = es.eigenvalues()[rb - 1];
    for (int j = 0; j < rb; ++j) {
      worst_value = std::max(worst_value, std::abs(s.lambda[j] - es.eigenvalues()[j]) / top);
      worst_residual = std::max(worst_residual, (D * s.U.col(j) - s.lambda[j] * s.U.col(j)).norm() / top);
      // Alignment with the dense eigenspace of the same (possibly repeated) value.
      double captured = 0.0;
      for (int q = 0; q < es.eigenvalues().size(); ++q)
        if (std::abs(es.eigenvalues()[q] - es.eigenvalues()[j]) <= 1e-9 * top)
          captured += std::pow(s.U.col(j).dot(es.eigenvectors().col(q)), 2);
      worst_align = std::max(worst_align, std::abs(1.0 - std::sqrt(captured)));
    }
    const MatX UHU = s.U.transpose() * D * s.U;
    const MatX off = UHU - MatX(UHU.diagonal().asDiagonal());
    worst_off = std::max(worst_off, off.norm() / UHU.diagonal().norm());
  }
  std::ostringstream d;
  d << cases.size() << " meshes <= 100 vertices: eigenvalue error " << worst_value << ", residual " << worst_residual
    << ", eigenspace misalignment " << worst_align << ", off-diagonal mass " << worst_off;
  return {worst_value <= 1e-8 && worst_residual <= 1e-8 && worst_align <= 1e-8 && worst_off <= 1e-8, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},  {5, criterion5},
      {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9}, {10, criterion10}};
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << o.detail << " ["
              << static_cast<int>(seconds_since(t0)) << " s]" << std::endl;
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
