#pragma once

#include "pdsim/barrier.hpp"
#include "pdsim/broad_phase.hpp"
#include "pdsim/subspace.hpp"

#include <memory>

namespace pdsim {

// How |dx| is measured in the convergence checks: the largest per-vertex
// displacement, or the Frobenius norm over all free rows.
enum class ConvergenceNorm { Max, Frobenius };

struct StepConfig {
  double h = 1.0 / 150.0;
  double eps_initial = 1e-3;
  double eps_inner = 5e-2;
  double eps_outer = 1e-3;  // 0 = run to iteration_cap every step
  ConvergenceNorm norm = ConvergenceNorm::Max;
  double eps_toi = 0.1;
  double alpha = 0.8;
  double k = 0.0;  // base collision weight; 0 picks the mean elastic weight
  double K = 2.0;
  int iteration_cap = 0;  // max LG iterations per step, 0 = none
  BarrierMode barrier = BarrierMode::NDB;
  double d_hat = 1e-3;
  double min_separation = 1e-3;  // line searches keep pairs this fraction of d_hat apart, 0 = off
  double gate = 2.0;  // pairs closer than gate * d_hat are tracked
  double broad_slack = 2.0;  // candidate sets are built with (1 + slack) d_hat and reused while they stay valid
  int smoothing_iterations = 32;
  double omega = 0.0;
  bool auto_omega = true;  // raise omega to safe_jacobi_omega when undamped Jacobi would diverge
  int sample_count = 3;
  bool projection_sample = true;
  bool adaptive_samples = true;
  int max_outer = 30;
  int max_inner = 30;
  int warm_start_cap = 10;
  double dbb_kappa = 0.0;  // 0 picks B(d_hat / 2) = k
  bool residual_forwarding = true;
  double rf_weight = 0.0;  // frozen collision weight in RF, 0 = k
  double rf_tolerance = 0.0;  // 0 = eps_inner
  int rf_max_iterations = 20;
  double rf_accel_cap = 100.0;  // |delta f| / m per vertex, m/s^2
  bool verify = false;
  std::string dump_dir;  // state dumps on verification failure

  void validate() const;

  bool operator==(const StepConfig&) const = default;
};

struct PhaseTimings {
  double warm_start = 0, local = 0, global = 0, smoothing = 0, broad = 0, partial = 0, full = 0, rf = 0;
};

struct StepReport {
  int step = 0;
  int lg_iterations = 0;
  int warm_start_iterations = 0;
  int outer_loops = 0;
  int full_ccd_calls = 0;
  int partial_ccd_queries = 0;
  int dbb_refreshes = 0;
  int smoothing_steps = 0;
  int broad_phase_calls = 0;  // candidate sets actually rebuilt
  int tracked_pairs = 0;
  int active_pairs = 0;  // pairs with a collision target in the last LG iteration
  int broad_pairs = 0;
  double toi_exit = 1.0;
  bool rf_triggered = false;
  int rf_clamped = 0;
  bool cap_hit = false;
  bool penetration_free = true;
  bool verified = false;
  double sample_interval = 0.0;
  std::vector<double> outer_deltas;
  PhaseTimings ms;
};

// Step failure in verify mode. `dump` names the written state file, if any.
class StepFailure : public Error {
 public:
  StepFailure(const std::string& what, std::string dump) : Error(what), dump_(std::move(dump)) {}
  const std::string& dump() const { return dump_; }

 private:
  std::string dump_;
};

struct SubspaceConfig {
  int r_bar = 120;
  int r = 30;

  bool operator==(const SubspaceConfig&) const = default;
};

struct RfResult {
  Positions delta_f;   // per mesh vertex
  Positions delta_x;   // per free row
  Positions f_r;       // per free row
  int iterations = 0;
  int clamped = 0;
};

class Simulator {
 public:
  Simulator(ClothMesh mesh, const MaterialParams& material, std::vector<Obstacle> obstacles, StepConfig config,
            SubspaceConfig subspace, Positions f_ext);

  StepReport step();

  // Collision-free modal LG iterations from z. Returns the candidate and the
  // number of iterations.
  std::pair<Positions, int> warm_start(const Positions& z) const;

  // Residual forwarding at an accepted state `x_world` with collision weights
  // frozen at the configured RF weight.
  RfResult residual_forward(const Positions& z, const Positions& x_world,
                            const std::vector<CollisionPair>& pairs) const;

  const SimState& state() const { return state_; }
  SimState& state() { return state_; }
  const ClothMesh& mesh() const { return mesh_; }
  const ElasticConstraints& elastic() const { return elastic_; }
  const GlobalSystem& system() const { return system_; }
  const Subspace& subspace() const { return subspace_; }
  const CollisionWorld& world() const { return world_; }
  const std::vector<Obstacle>& obstacles() const { return obstacles_; }
  const StepConfig& config() const { return config_; }
  StepConfig& config() { return config_; }
  const Positions& external_force() const { return f_ext_; }
  double base_weight() const { return k_; }
  double dbb_kappa() const { return kappa_; }
  // Damping actually used by the smoother.
  double omega() const { return omega_; }

  // World positions of the current state.
  Positions world_state() const;

  // One LG iteration with collision targets: local projections, reduced
  // solve, smoothing. Updates the cloth rows of x_world in place and returns
  // |dx| over the free rows.
  double lg_iteration(const Positions& z, Positions& x_world, const std::vector<CollisionPair>& pairs,
                      StepReport& report) const;

 private:
  void refresh_samples(const Positions& x_minus, const Positions& x);
  void track_pairs(std::vector<CollisionPair>& tracked, const std::vector<PrimitivePair>& candidates,
                   const std::vector<double>& tois, const Positions& x_minus) const;
  void dbb_refresh(std::vector<CollisionPair>& tracked, const Positions& x_minus, const Positions& x,
                   StepReport& report);
  void verify_state(const Positions& x_world, StepReport& report) const;
  double delta_norm(const Positions& a, const Positions& b) const {
    return config_.norm == ConvergenceNorm::Max ? max_row_diff(a, b) : diff_norm(a, b);
  }
  std::vector<PrimitivePair> candidates(const Positions& x0, const Positions& x1, StepReport& report);

  ClothMesh mesh_;
  ElasticConstraints elastic_;
  std::vector<Obstacle> obstacles_;
  StepConfig config_;
  GlobalSystem system_;
  Subspace subspace_;
  CollisionWorld world_;
  std::unique_ptr<PatchBVH> bvh_;
  Positions f_ext_;
  SimState state_;
  double k_ = 0.0;
  double kappa_ = 0.0;
  double omega_ = 0.0;
  SampleSet vt_samples_, ee_samples_;
  SampleSet vt_base_, ee_base_;
  double rho_ref_ = 0.0;

  // Broad-phase cache: pairs of the swept boxes start_ -> end_ with margin
  // cache_margin_.
  std::vector<PrimitivePair> cache_;
  Positions cache_start_, cache_end_;
  double cache_margin_ = 0.0;
};

}  // namespace pdsim
