#pragma once

#include "pdsim/scenes.hpp"

#include <iosfwd>

namespace pdsim {

// 1/2 sum m_i |v_i|^2 over free vertices.
double kinetic_energy(const ClothMesh& mesh, const Positions& velocity);

// CSV columns: step, lg_iterations, warm_start_iterations, outer_loops,
// full_ccd_calls, partial_ccd_queries, toi_exit, active_pairs, tracked_pairs,
// rf_triggered, penetration_free, verified, kinetic_energy, then per-phase
// milliseconds and their total.
void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const StepReport& report, double kinetic);

struct RunSummary {
  std::vector<StepReport> reports;
  std::vector<double> kinetic;  // after each step
  long long total_lg_iterations = 0;
  double total_ms = 0.0;
  bool penetration_free = true;  // only meaningful when verified
  std::string failure;           // non-empty when a step failed
  std::string dump;              // state dump of the failure, if written
};

// Builds the scene, runs config.output.steps steps, writes frames and metrics
// as configured. With solver.verify the initial state and every accepted step
// go through the intersection oracle; a penetration stops the run and fills
// `failure`. Progress lines go to `log` when given.
RunSummary run_simulation(const SceneConfig& config, std::ostream* log = nullptr);

}  // namespace pdsim
