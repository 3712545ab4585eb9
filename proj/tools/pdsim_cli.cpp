// Command line front end: simulate, verify, spectrum, bench-ccd, scene.

#include "pdsim/config.hpp"
#include "pdsim/kernels.hpp"
#include "pdsim/oracle.hpp"
#include "pdsim/run.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>

using namespace pdsim;

namespace {

struct Overrides {
  std::string config;
  double scale = 1.0;
  int steps = -1;
  bool verify = false;
  std::string barrier;
  int iteration_cap = -1;
  long long seed = -1;
  std::string frames;
  int stride = -1;
  std::string metrics;
  std::string dump;
  bool quiet = false;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("config", o.config, "scene config file, or builtin:<name>")->required();
  cmd->add_option("--scale", o.scale, "resolution scale for builtin scenes");
  cmd->add_option("--steps", o.steps, "number of steps");
  cmd->add_flag("--verify", o.verify, "run the intersection oracle after every step");
  cmd->add_option("--barrier", o.barrier, "collision weighting")->check(CLI::IsMember({"ndb", "dbb"}));
  cmd->add_option("--iteration-cap", o.iteration_cap, "max LG iterations per step (0 = none)");
  cmd->add_option("--seed", o.seed, "seed for the initial-state jitter");
  cmd->add_option("--frames", o.frames, "directory for OBJ frames");
  cmd->add_option("--stride", o.stride, "write a frame every N steps");
  cmd->add_option("--metrics", o.metrics, "metrics CSV path");
  cmd->add_option("--dump", o.dump, "directory for failure dumps");
  cmd->add_flag("-q,--quiet", o.quiet, "no per-step log");
}

SceneConfig resolve(const Overrides& o) {
  SceneConfig c;
  const std::string prefix = "builtin:";
  if (o.config.rfind(prefix, 0) == 0) {
    auto b = builtin_scene(o.config.substr(prefix.size()), o.scale);
    if (!b) throw Error("unknown builtin scene '" + o.config.substr(prefix.size()) + "'");
    c = *b;
  } else {
    c = load_scene_config(o.config);
  }
  if (o.steps >= 0) c.output.steps = o.steps;
  if (o.verify) c.solver.verify = true;
  if (o.barrier == "ndb") c.solver.barrier = BarrierMode::NDB;
  if (o.barrier == "dbb") c.solver.barrier = BarrierMode::DBB;
  if (o.iteration_cap >= 0) c.solver.iteration_cap = o.iteration_cap;
  if (o.seed >= 0) c.seed = static_cast<std::uint64_t>(o.seed);
  if (!o.frames.empty()) {
    c.output.frames_dir = o.frames;
    if (c.output.frame_stride == 0) c.output.frame_stride = 1;
  }
  if (o.stride >= 0) c.output.frame_stride = o.stride;
  if (!o.metrics.empty()) c.output.metrics_path = o.metrics;
  if (!o.dump.empty()) c.output.dump_dir = o.dump;
  c.solver.validate();
  return c;
}

int run(const Overrides& o, bool force_verify) {
  SceneConfig c = resolve(o);
  if (force_verify) c.solver.verify = true;
  const RunSummary s = run_simulation(c, o.quiet ? nullptr : &std::cerr);
  std::cout << c.name << ": " << s.reports.size() << " steps, " << s.total_lg_iterations << " LG iterations, "
            << std::fixed << std::setprecision(1) << s.total_ms << " ms";
  if (c.solver.verify) std::cout << (s.penetration_free ? ", penetration-free" : ", PENETRATION");
  std::cout << "\n";
  if (!s.failure.empty()) {
    std::cerr << "error: " << s.failure << "\n";
    if (!s.dump.empty()) std::cerr << "state dump: " << s.dump << "\n";
    return 2;
  }
  return 0;
}

int spectrum(const Overrides& o, int modes, const std::string& out_path) {
  const SceneConfig c = resolve(o);
  const Scene scene = build_scene(c);
  const Simulator sim = make_simulator(scene, c);
  const ClothMesh& mesh = sim.mesh();
  const Positions z = compute_z(sim.state(), mesh, c.solver.h, sim.external_force());
  std::vector<Vec3> edge_targets;
  project_elastic(mesh, sim.elastic(), sim.state().x, edge_targets);
  const SystemRhs rhs = assemble_rhs(mesh, sim.system(), sim.elastic(), z, edge_targets, {}, z);
  const Positions x0 = to_free(mesh, sim.state().x);
  const Positions x1 = subspace_solve_free(sim.subspace(), sim.system(), rhs.b, x0);
  Positions r0, r1;
  kernels::serial::residual(sim.system().H, {}, rhs.b, x0, r0);
  kernels::serial::residual(sim.system().H, {}, rhs.b, x1, r1);
  modes = std::min(modes, sim.subspace().r_bar());
  const auto pre = spectrum_report(sim.subspace(), r0, modes);
  const auto post = spectrum_report(sim.subspace(), r1, modes);

  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw Error("cannot write " + out_path);
  }
  std::ostream& out = out_path.empty() ? std::cout : file;
  out << "mode,eigenvalue,pre,post\n" << std::setprecision(12);
  for (int m = 0; m < modes; ++m)
    out << (m + 1) << ',' << sim.subspace().lambda[m] << ',' << pre[m] << ',' << post[m] << '\n';
  return 0;
}

int bench_ccd(int pairs, int samples, std::uint64_t seed) {
  const auto corpus = random_trajectories(pairs, seed);
  const SampleSet vt = make_sample_set(PairKind::VertexTriangle, samples);
  const SampleSet ee = make_sample_set(PairKind::EdgeEdge, samples);
  using Clock = std::chrono::steady_clock;

  int partial_hits = 0, full_hits = 0;
  auto t0 = Clock::now();
  for (const auto& t : corpus) {
    const Vec2 proj = pair_proximity(t.kind, t.x0).lambda;
    partial_hits += partial_ccd(t.kind, t.x0, t.x1, t.kind == PairKind::VertexTriangle ? vt : ee, &proj);
  }
  const double partial_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  t0 = Clock::now();
  for (const auto& t : corpus) full_hits += full_ccd(t.kind, t.x0, t.x1).has_value();
  const double full_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();

  std::cout << std::setprecision(4) << "pairs " << corpus.size() << "\n"
            << "partial ccd (" << samples << " samples + projection): " << partial_ms << " ms, "
            << 1e6 * partial_ms / corpus.size() << " ns/pair, " << partial_hits << " flagged\n"
            << "full ccd: " << full_ms << " ms, " << 1e6 * full_ms / corpus.size() << " ns/pair, " << full_hits
            << " impacts\n"
            << "ratio full/partial: " << full_ms / partial_ms << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penetration-free projective dynamics cloth simulator"};
  app.require_subcommand(1);

  Overrides sim_opts, ver_opts, spec_opts;
  auto* simulate = app.add_subcommand("simulate", "run a scene");
  add_overrides(simulate, sim_opts);
  auto* verify = app.add_subcommand("verify", "run a scene with the intersection oracle after every step");
  add_overrides(verify, ver_opts);

  auto* spec = app.add_subcommand("spectrum", "modal residual spectrum before and after one subspace solve");
  add_overrides(spec, spec_opts);
  int modes = 100;
  std::string spec_out;
  spec->add_option("--modes", modes, "number of modes");
  spec->add_option("-o,--out", spec_out, "CSV output (default stdout)");

  auto* bench = app.add_subcommand("bench-ccd", "partial vs full CCD on a random trajectory corpus");
  int pairs = 100000, samples = 3;
  long long bench_seed = 7;
  bench->add_option("--pairs", pairs, "number of trajectories");
  bench->add_option("--samples", samples, "partial CCD samples (1, 3 or 6; others use a lattice)");
  bench->add_option("--seed", bench_seed, "corpus seed");

  auto* scene = app.add_subcommand("scene", "write a builtin scene config");
  std::string scene_name, scene_out;
  double scene_scale = 1.0;
  scene->add_option("name", scene_name, "builtin scene")->required()->check(CLI::IsMember(builtin_scene_names()));
  scene->add_option("--scale", scene_scale, "resolution scale");
  scene->add_option("-o,--out", scene_out, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*simulate) return run(sim_opts, false);
    if (*verify) return run(ver_opts, true);
    if (*spec) return spectrum(spec_opts, modes, spec_out);
    if (*bench) return bench_ccd(pairs, samples, static_cast<std::uint64_t>(bench_seed));
    if (*scene) {
      const SceneConfig c = *builtin_scene(scene_name, scene_scale);
      if (scene_out.empty())
        std::cout << serialize_scene_config(c);
      else
        save_scene_config(scene_out, c);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
