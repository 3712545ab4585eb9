#include "pdsim/stepper.hpp"

#include "pdsim/kernels.hpp"
#include "pdsim/obj.hpp"
#include "pdsim/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>

namespace pdsim {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

Positions lerp(const Positions& a, const Positions& b, double t) { return a + t * (b - a); }

const SampleSet& samples_for(PairKind kind, const SampleSet& vt, const SampleSet& ee) {
  return kind == PairKind::VertexTriangle ? vt : ee;
}

// Halves t until every candidate pair keeps at least min(xi, its distance at
// x0). Pairs that reach a zero-distance contact lose their side (the sign of
// the coplanarity function drowns in round-off), and the next CCD then
// reports an impact at t = 0 forever.
double separation_backtrack(const std::vector<PrimitivePair>& cand, const Positions& x0, const Positions& x1,
                            double t, double xi) {
  if (!(xi > 0.0) || t <= 0.0 || cand.empty()) return t;
  const int n = static_cast<int>(cand.size());
  std::vector<double> floor(n);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const double d0 = pair_proximity(cand[i].kind, gather(cand[i], x0)).distance;
    floor[i] = d0 >= xi ? xi : d0 * (1.0 - 1e-9);
  }
  for (int halving = 0; halving < 50; ++halving, t *= 0.5) {
    const Positions xt = lerp(x0, x1, t);
    int bad = 0;
#pragma omp parallel for schedule(static) reduction(+ : bad)
    for (int i = 0; i < n; ++i)
      bad += pair_proximity(cand[i].kind, gather(cand[i], xt)).distance < floor[i];
    if (bad == 0) return t;
  }
  return 0.0;
}

}  // namespace

void StepConfig::validate() const {
  auto req = [](bool ok, const char* what) {
    if (!ok) throw Error(std::string("invalid step config: ") + what);
  };
  req(h > 0.0 && std::isfinite(h), "h must be positive");
  req(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
  req(eps_initial > 0.0 && eps_inner > 0.0 && eps_toi > 0.0, "thresholds must be positive");
  // eps_outer = 0 is budget mode: every step runs until the iteration cap.
  req(eps_outer > 0.0 || (eps_outer == 0.0 && iteration_cap > 0), "eps_outer must be positive, or 0 with an iteration cap");
  req(k >= 0.0, "k must be non-negative");
  req(K > 1.0, "K must exceed 1");
  req(iteration_cap >= 0, "iteration cap must be non-negative");
  req(d_hat > 0.0, "d_hat must be positive");
  req(min_separation >= 0.0 && min_separation < 1.0, "min_separation must lie in [0, 1)");
  req(gate >= 1.0, "gate must be at least 1");
  req(broad_slack >= 0.0, "broad_slack must be non-negative");
  req(smoothing_iterations >= 0, "smoothing iterations must be non-negative");
  req(omega >= 0.0 && omega < 1.0, "omega must lie in [0, 1)");
  req(sample_count >= 1, "sample count must be positive");
  req(max_outer >= 1 && max_inner >= 1 && warm_start_cap >= 1, "loop caps must be positive");
  req(rf_max_iterations >= 1, "RF iterations must be positive");
  req(rf_accel_cap > 0.0, "RF acceleration cap must be positive");
}

Simulator::Simulator(ClothMesh mesh, const MaterialParams& material, std::vector<Obstacle> obstacles,
                     StepConfig config, SubspaceConfig subspace, Positions f_ext)
    : mesh_(std::move(mesh)), obstacles_(std::move(obstacles)), config_(std::move(config)), f_ext_(std::move(f_ext)) {
  config_.validate();
  if (f_ext_.rows() != mesh_.vertex_count()) throw Error("external force does not match the mesh");
  if (mesh_.free_count() == 0) throw Error("mesh has no free vertices");
  elastic_ = build_elastic(mesh_, material);
  system_ = assemble_global(mesh_, elastic_, config_.h);
  const int n = mesh_.free_count();
  const int r_bar = std::min(subspace.r_bar, n);
  const int r = std::min(subspace.r, r_bar);
  subspace_ = build_subspace(system_, to_free(mesh_, mesh_.rest_positions), r_bar, r);
  world_ = make_world(mesh_, obstacles_);
  bvh_ = std::make_unique<PatchBVH>(world_);
  state_ = make_rest_state(mesh_);
  state_.obstacles = world_positions(world_, mesh_.rest_positions, obstacles_, 0.0).bottomRows(
      world_.vertex_count() - world_.cloth_vertices);

  k_ = config_.k > 0.0 ? config_.k : elastic_.mean_weight();
  if (!(k_ > 0.0)) k_ = 1.0;
  kappa_ = config_.dbb_kappa > 0.0 ? config_.dbb_kappa
                                   : 4.0 * k_ / (config_.d_hat * config_.d_hat * std::log(2.0));
  omega_ = config_.omega;
  if (config_.auto_omega) omega_ = std::max(omega_, safe_jacobi_omega(jacobi_spectral_radius(system_)));
  vt_base_ = make_sample_set(PairKind::VertexTriangle, config_.sample_count, config_.projection_sample);
  ee_base_ = make_sample_set(PairKind::EdgeEdge, config_.sample_count, config_.projection_sample);
  vt_samples_ = vt_base_;
  ee_samples_ = ee_base_;
}

Positions Simulator::world_state() const {
  Positions out(world_.vertex_count(), 3);
  out.topRows(world_.cloth_vertices) = state_.x;
  if (state_.obstacles.rows() > 0) out.bottomRows(state_.obstacles.rows()) = state_.obstacles;
  return out;
}

std::pair<Positions, int> Simulator::warm_start(const Positions& z) const {
  Positions x = z;
  std::vector<Vec3> edge_targets;
  const std::vector<CollisionTarget> none;
  int it = 0;
  while (it < config_.warm_start_cap) {
    project_elastic(mesh_, elastic_, x, edge_targets);
    const SystemRhs rhs = assemble_rhs(mesh_, system_, elastic_, z, edge_targets, none, z);
    const Positions x_free = to_free(mesh_, x);
    const Positions x_new = subspace_solve_free(subspace_, system_, rhs.b, x_free);
    const double delta = delta_norm(x_new, x_free);
    from_free(mesh_, x_new, x);
    ++it;
    if (delta < config_.eps_initial) break;
  }
  return {x, it};
}

double Simulator::lg_iteration(const Positions& z, Positions& x_world, const std::vector<CollisionPair>& pairs,
                               StepReport& report) const {
  const int nc = world_.cloth_vertices;
  const double t1 = (state_.step_index + 1) * config_.h;
  // Prescribed rows take their end-of-step positions.
  for (const auto& g : mesh_.pins)
    for (int v : g.vertices) x_world.row(v) = z.row(v);
  int base = nc;
  for (const auto& o : obstacles_) {
    const int m = static_cast<int>(o.rest.rows());
    x_world.middleRows(base, m) = o.at(t1);
    base += m;
  }

  auto t0 = Clock::now();
  Positions x = x_world.topRows(nc);
  std::vector<Vec3> edge_targets;
  project_elastic(mesh_, elastic_, x, edge_targets);
  std::vector<CollisionTarget> targets;
  report.active_pairs = collision_targets(pairs, world_, x_world, config_.d_hat, targets);
  const SystemRhs rhs = assemble_rhs(mesh_, system_, elastic_, z, edge_targets, targets, z);
  report.ms.local += ms_since(t0);

  t0 = Clock::now();
  const Positions x_free = to_free(mesh_, x);
  Positions x_new = subspace_solve_reuse(subspace_, system_, rhs.b, x_free, rhs.active_rows, rhs.active_weights,
                                         rhs.collision_diag_delta);
  report.ms.global += ms_since(t0);

  t0 = Clock::now();
  if (config_.smoothing_iterations > 0) {
    const SmoothStats st = ajacobi_smooth(system_, rhs.collision_diag_delta, rhs.b, x_new,
                                          config_.smoothing_iterations, omega_);
    report.smoothing_steps += st.steps;
  }
  report.ms.smoothing += ms_since(t0);

  const double delta = delta_norm(x_new, x_free);
  from_free(mesh_, x_new, x);
  x_world.topRows(nc) = x;
  return delta;
}

void Simulator::track_pairs(std::vector<CollisionPair>& tracked, const std::vector<PrimitivePair>& candidates,
                            const std::vector<double>& tois, const Positions& x_minus) const {
  const double gate = config_.gate * config_.d_hat;
  std::vector<CollisionPair> added;
  size_t j = 0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    while (j < tracked.size() && tracked[j].prim < candidates[i]) ++j;
    if (j < tracked.size() && tracked[j].prim == candidates[i]) continue;
    const bool impact = tois[i] <= 1.0;
    CollisionPair p = make_collision_pair(candidates[i], x_minus);
    if (!impact && !(p.distance < gate)) continue;
    p.weight = k_;
    added.push_back(p);
  }
  if (added.empty()) return;
  std::vector<CollisionPair> merged;
  merged.reserve(tracked.size() + added.size());
  std::merge(tracked.begin(), tracked.end(), added.begin(), added.end(), std::back_inserter(merged),
             [](const CollisionPair& a, const CollisionPair& b) { return a.prim < b.prim; });
  tracked.swap(merged);
}

// A query (x0, x1) may reuse the cached set when every vertex of both states
// lies within delta of its cached swept box and d_hat + delta fits in the
// cached margin: then every new swept box sits inside the cached one inflated
// by delta, so the cached set is a superset. Filtering it with the
// per-primitive box test at d_hat gives exactly the fresh broad-phase result.
std::vector<PrimitivePair> Simulator::candidates(const Positions& x0, const Positions& x1,
                                                        StepReport& report) {
  auto t0 = Clock::now();
  bool valid = cache_start_.rows() == x0.rows() && config_.broad_slack > 0.0;
  if (valid) {
    double delta = 0.0;
    for (int v = 0; v < x0.rows() && valid; ++v)
      for (int c = 0; c < 3; ++c) {
        const double lo = std::min(cache_start_(v, c), cache_end_(v, c));
        const double hi = std::max(cache_start_(v, c), cache_end_(v, c));
        delta = std::max({delta, lo - x0(v, c), x0(v, c) - hi, lo - x1(v, c), x1(v, c) - hi});
      }
    valid = config_.d_hat + delta <= cache_margin_;
  }
  if (!valid) {
    cache_margin_ = (1.0 + config_.broad_slack) * config_.d_hat;
    cache_ = broad_phase(world_, *bvh_, x0, x1, cache_margin_);
    cache_start_ = x0;
    cache_end_ = x1;
    ++report.broad_phase_calls;
  }
  std::vector<PrimitivePair> out;
  out.reserve(cache_.size());
  const double m = config_.d_hat;
  for (const auto& p : cache_) {
    const int split = p.kind == PairKind::VertexTriangle ? 1 : 2;
    Aabb a, b;
    for (int i = 0; i < 4; ++i) {
      Aabb& box = i < split ? a : b;
      box.expand(row3(x0, p.v[i]));
      box.expand(row3(x1, p.v[i]));
    }
    a.inflate(m);
    b.inflate(m);
    if (a.overlaps(b)) out.push_back(p);
  }
  report.ms.broad += ms_since(t0);
  return out;
}

void Simulator::dbb_refresh(std::vector<CollisionPair>& tracked, const Positions& x_minus, const Positions& x,
                            StepReport& report) {
  const auto& cand = candidates(x_minus, x, report);
  auto t0 = Clock::now();
  const ToiResult res = global_toi(cand, x_minus, x, config_.alpha);
  const Positions x_c = lerp(x_minus, x, res.toi);
  tracked.clear();
  for (const auto& prim : cand) {
    CollisionPair p = make_collision_pair(prim, x_c);
    if (!(p.distance < config_.d_hat) || !(p.distance > 0.0)) continue;
    p.weight = dbb_weight(p.distance, config_.d_hat, kappa_);
    tracked.push_back(p);
  }
  report.ms.full += ms_since(t0);
  ++report.dbb_refreshes;
}

void Simulator::refresh_samples(const Positions& x_minus, const Positions& x) {
  if (!config_.adaptive_samples) return;
  double L = 0.0;
  for (const auto& e : mesh_.edges) L = std::max(L, (x.row(e.a) - x.row(e.b)).norm());
  const double move = (x - x_minus).rowwise().norm().maxCoeff();
  const double H0 = config_.d_hat;
  const double H1 = H0 + 2.0 * move;
  if (!(L > 0.0)) return;
  const double rho = sample_bound(H0, H1, L, config_.alpha);
  if (rho_ref_ <= 0.0) rho_ref_ = rho;
  const double ratio = rho_ref_ / rho;
  if (ratio > 1.5) {
    // Densify by the change ratio, bounded at a 6 x 6 lattice.
    const double floor = 1.0 / (6.0 * std::sqrt(2.0));
    vt_samples_ = make_lattice_samples(PairKind::VertexTriangle, std::max(vt_base_.interval / ratio, floor),
                                       config_.projection_sample);
    ee_samples_ = make_lattice_samples(PairKind::EdgeEdge, std::max(ee_base_.interval / ratio, floor),
                                       config_.projection_sample);
  } else {
    vt_samples_ = vt_base_;
    ee_samples_ = ee_base_;
  }
}

void Simulator::verify_state(const Positions& x_world, StepReport& report) const {
  const auto hits = oracle_intersect(world_, x_world);
  report.verified = true;
  report.penetration_free = hits.empty();
  if (hits.empty()) return;
  std::string dump;
  if (!config_.dump_dir.empty()) {
    std::filesystem::create_directories(config_.dump_dir);
    dump = (std::filesystem::path(config_.dump_dir) / ("failure_step_" + std::to_string(report.step) + ".obj")).string();
    save_obj(dump, x_world, world_.triangles);
  }
  std::ostringstream msg;
  msg << "penetration detected after step " << report.step << ": " << hits.size() << " intersecting triangle pairs"
      << " (first " << hits[0].first << ", " << hits[0].second << ")";
  if (!dump.empty()) msg << "; state written to " << dump;
  throw StepFailure(msg.str(), dump);
}

RfResult Simulator::residual_forward(const Positions& z, const Positions& x_world,
                                     const std::vector<CollisionPair>& pairs) const {
  RfResult out;
  std::vector<CollisionPair> frozen = pairs;
  const double w = config_.rf_weight > 0.0 ? config_.rf_weight : k_;
  for (auto& p : frozen) {
    p.weight = w;
    p.active = false;
  }
  const int nc = world_.cloth_vertices;
  const Positions x = x_world.topRows(nc);
  std::vector<Vec3> edge_targets;
  project_elastic(mesh_, elastic_, x, edge_targets);
  std::vector<CollisionTarget> targets;
  collision_targets(frozen, world_, x_world, config_.d_hat, targets);
  const SystemRhs rhs = assemble_rhs(mesh_, system_, elastic_, z, edge_targets, targets, z);
  const Positions x_free = to_free(mesh_, x);
  kernels::parallel::residual(system_.H, rhs.collision_diag_delta, rhs.b, x_free, out.f_r);

  const double tol = config_.rf_tolerance > 0.0 ? config_.rf_tolerance : config_.eps_inner;
  Positions dx = Positions::Zero(x_free.rows(), 3);
  for (int it = 0; it < config_.rf_max_iterations; ++it) {
    Positions next = subspace_solve_reuse(subspace_, system_, out.f_r, dx, rhs.active_rows, rhs.active_weights,
                                          rhs.collision_diag_delta);
    if (config_.smoothing_iterations > 0)
      ajacobi_smooth(system_, rhs.collision_diag_delta, out.f_r, next, config_.smoothing_iterations, omega_);
    const double delta = delta_norm(next, dx);
    dx = std::move(next);
    ++out.iterations;
    if (delta < tol) break;
  }
  out.delta_x = dx;
  out.delta_f = Positions::Zero(mesh_.vertex_count(), 3);
  const double h2 = config_.h * config_.h;
  for (int i = 0; i < mesh_.free_count(); ++i) {
    const int v = mesh_.free_vertices[i];
    const double m = mesh_.vertex_mass[v];
    Vec3 f = (2.0 * m / h2) * dx.row(i).transpose();
    const double cap = m * config_.rf_accel_cap;
    if (f.norm() > cap) {
      f *= cap / f.norm();
      ++out.clamped;
    }
    set_row3(out.delta_f, v, f);
  }
  return out;
}

StepReport Simulator::step() {
  StepReport report;
  report.step = state_.step_index;
  const double h = config_.h;
  const double t1 = (state_.step_index + 1) * h;
  const bool ndb = config_.barrier == BarrierMode::NDB;

  const Positions z = compute_z(state_, mesh_, h, f_ext_);

  auto t0 = Clock::now();
  auto [x_ws, n_ws] = warm_start(z);
  report.warm_start_iterations = n_ws;
  report.ms.warm_start = ms_since(t0);

  // Warm-start line search.
  Positions x_minus = world_state();
  const Positions x_plus = world_positions(world_, x_ws, obstacles_, t1);
  std::vector<PrimitivePair> cand = candidates(x_minus, x_plus, report);
  t0 = Clock::now();
  auto tois = pair_tois(cand, x_minus, x_plus);
  ToiResult res = reduce_tois(tois, config_.alpha);
  const double xi = config_.min_separation * config_.d_hat;
  const double toi_ws = separation_backtrack(cand, x_minus, x_plus, res.toi, xi);
  report.ms.full += ms_since(t0);
  ++report.full_ccd_calls;
  report.broad_pairs = static_cast<int>(cand.size());

  Positions x = lerp(x_minus, x_plus, toi_ws);
  x_minus = x;

  std::vector<CollisionPair> tracked;
  if (ndb)
    track_pairs(tracked, cand, tois, x_minus);
  else
    dbb_refresh(tracked, x_minus, x, report);
  refresh_samples(x_minus, x_plus);

  const int cap = config_.iteration_cap;
  double last_delta = 0.0;
  for (int outer = 0; outer < config_.max_outer; ++outer) {
    const Positions x_outer = x;
    for (int inner = 0; inner < config_.max_inner; ++inner) {
      if (cap > 0 && report.lg_iterations >= cap) {
        report.cap_hit = true;
        break;
      }
      last_delta = lg_iteration(z, x, tracked, report);
      ++report.lg_iterations;

      if (ndb) {
        t0 = Clock::now();
        const int np = static_cast<int>(tracked.size());
#pragma omp parallel for schedule(static)
        for (int i = 0; i < np; ++i) {
          auto& p = tracked[i];
          const SampleSet& s = samples_for(p.kind(), vt_samples_, ee_samples_);
          p.active = partial_ccd(p.kind(), gather(p.prim, x_minus), gather(p.prim, x), s, &p.witness);
        }
        update_ndb_weights(tracked, k_, config_.K);
        report.partial_ccd_queries += np;
        report.ms.partial += ms_since(t0);
      } else {
        dbb_refresh(tracked, x_minus, x, report);
      }
      if (last_delta < config_.eps_inner) break;
    }

    cand = candidates(x_minus, x, report);
    t0 = Clock::now();
    tois = pair_tois(cand, x_minus, x);
    res = reduce_tois(tois, config_.alpha);
    report.ms.full += ms_since(t0);
    ++report.full_ccd_calls;
    if (ndb) track_pairs(tracked, cand, tois, x_minus);
    refresh_samples(x_minus, x);
    ++report.outer_loops;

    const double outer_delta = delta_norm(to_free(mesh_, x.topRows(world_.cloth_vertices)),
                                         to_free(mesh_, x_outer.topRows(world_.cloth_vertices)));
    report.outer_deltas.push_back(outer_delta);
    if (outer_delta < config_.eps_outer || report.cap_hit) break;
  }

  // Exit line search.
  cand = candidates(x_minus, x, report);
  t0 = Clock::now();
  tois = pair_tois(cand, x_minus, x);
  res = reduce_tois(tois, config_.alpha);
  res.toi = separation_backtrack(cand, x_minus, x, res.toi, xi);
  report.ms.full += ms_since(t0);
  ++report.full_ccd_calls;
  report.broad_pairs = static_cast<int>(cand.size());
  const Positions x_exit = lerp(x_minus, x, res.toi);
  report.toi_exit = res.toi;
  report.tracked_pairs = static_cast<int>(tracked.size());
  report.sample_interval = vt_samples_.interval;

  Positions delta_f = Positions::Zero(mesh_.vertex_count(), 3);
  const bool rf_needed = res.toi < config_.eps_toi || (report.cap_hit && last_delta > 0.0);
  if (config_.residual_forwarding && rf_needed) {
    t0 = Clock::now();
    const RfResult rf = residual_forward(z, x_exit, tracked);
    delta_f = rf.delta_f;
    report.rf_triggered = true;
    report.rf_clamped = rf.clamped;
    report.ms.rf = ms_since(t0);
  }

  if (config_.verify) verify_state(x_exit, report);

  const int nc = world_.cloth_vertices;
  const Positions x_new = x_exit.topRows(nc);
  state_.x_dot = (x_new - state_.x) / h;
  state_.x_prev = state_.x;
  state_.x = x_new;
  if (state_.obstacles.rows() > 0) state_.obstacles = x_exit.bottomRows(state_.obstacles.rows());
  state_.delta_f = delta_f;
  ++state_.step_index;
  if (!state_.finite()) throw Error("simulation state became non-finite at step " + std::to_string(report.step));
  return report;
}

}  // namespace pdsim
