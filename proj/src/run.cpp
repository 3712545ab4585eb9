#include "pdsim/run.hpp"

#include "pdsim/oracle.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace pdsim {

double kinetic_energy(const ClothMesh& mesh, const Positions& velocity) {
  double e = 0.0;
  for (int v : mesh.free_vertices) e += 0.5 * mesh.vertex_mass[v] * velocity.row(v).squaredNorm();
  return e;
}

void write_metrics_header(std::ostream& out) {
  out << "step,lg_iterations,warm_start_iterations,outer_loops,full_ccd_calls,partial_ccd_queries,toi_exit,"
         "active_pairs,tracked_pairs,rf_triggered,penetration_free,verified,kinetic_energy,"
         "ms_warm_start,ms_local,ms_global,ms_smoothing,ms_broad,ms_partial,ms_full,ms_rf,ms_total\n";
}

void write_metrics_row(std::ostream& out, const StepReport& r, double kinetic) {
  const PhaseTimings& t = r.ms;
  const double total = t.warm_start + t.local + t.global + t.smoothing + t.broad + t.partial + t.full + t.rf;
  out << r.step << ',' << r.lg_iterations << ',' << r.warm_start_iterations << ',' << r.outer_loops << ','
      << r.full_ccd_calls << ',' << r.partial_ccd_queries << ',' << std::setprecision(9) << r.toi_exit << ','
      << r.active_pairs << ',' << r.tracked_pairs << ',' << (r.rf_triggered ? 1 : 0) << ','
      << (r.penetration_free ? 1 : 0) << ',' << (r.verified ? 1 : 0) << ',' << std::setprecision(12) << kinetic
      << std::setprecision(4) << std::fixed << ',' << t.warm_start << ',' << t.local << ',' << t.global << ','
      << t.smoothing << ',' << t.broad << ',' << t.partial << ',' << t.full << ',' << t.rf << ',' << total
      << std::defaultfloat << '\n';
}

RunSummary run_simulation(const SceneConfig& config, std::ostream* log) {
  namespace fs = std::filesystem;
  RunSummary summary;
  const Scene scene = build_scene(config);
  Simulator sim = make_simulator(scene, config);

  if (config.solver.verify) {
    const auto hits = oracle_intersect(sim.world(), sim.world_state());
    if (!hits.empty()) {
      summary.penetration_free = false;
      summary.failure = "initial state has " + std::to_string(hits.size()) + " intersecting triangle pairs";
      return summary;
    }
  }

  const bool frames = config.output.frame_stride > 0 && !config.output.frames_dir.empty();
  if (frames) {
    fs::create_directories(config.output.frames_dir);
    if (!scene.obstacles.empty()) {
      Positions all(0, 3);
      std::vector<Tri> tris;
      for (const auto& o : scene.obstacles) {
        const int base = static_cast<int>(all.rows());
        all.conservativeResize(base + o.rest.rows(), 3);
        all.bottomRows(o.rest.rows()) = o.at(0.0);
        for (const auto& t : o.triangles) tris.push_back({t[0] + base, t[1] + base, t[2] + base});
      }
      save_obj((fs::path(config.output.frames_dir) / "obstacles.obj").string(), all, tris);
    }
  }
  std::ofstream metrics;
  if (!config.output.metrics_path.empty()) {
    const fs::path p(config.output.metrics_path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    metrics.open(p);
    if (!metrics) throw Error("cannot write metrics file: " + p.string());
    write_metrics_header(metrics);
  }

  for (int s = 0; s < config.output.steps; ++s) {
    StepReport r;
    try {
      r = sim.step();
    } catch (const StepFailure& e) {
      summary.penetration_free = false;
      summary.failure = e.what();
      summary.dump = e.dump();
      break;
    }
    const double ke = kinetic_energy(sim.mesh(), sim.state().x_dot);
    summary.total_lg_iterations += r.lg_iterations;
    const PhaseTimings& t = r.ms;
    summary.total_ms += t.warm_start + t.local + t.global + t.smoothing + t.broad + t.partial + t.full + t.rf;
    if (metrics.is_open()) write_metrics_row(metrics, r, ke);
    if (frames && (s + 1) % config.output.frame_stride == 0) {
      std::ostringstream name;
      name << "frame_" << std::setw(5) << std::setfill('0') << (s + 1) << ".obj";
      save_obj((fs::path(config.output.frames_dir) / name.str()).string(), sim.state().x, sim.mesh().triangles);
    }
    if (log)
      *log << config.name << " step " << (s + 1) << "/" << config.output.steps << " lg=" << r.lg_iterations
           << " toi=" << r.toi_exit << " pairs=" << r.tracked_pairs << (r.rf_triggered ? " rf" : "")
           << (r.verified ? (r.penetration_free ? " verified" : " PENETRATION") : "") << "\n";
    summary.reports.push_back(std::move(r));
    summary.kinetic.push_back(ke);
  }
  return summary;
}

}  // namespace pdsim
