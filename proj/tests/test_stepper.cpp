#include "pdsim/energy.hpp"
#include "pdsim/oracle.hpp"
#include "pdsim/run.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace pdtest;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pdsim_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("step config validation") {
  StepConfig c;
  CHECK_NOTHROW(c.validate());
  auto bad = [](auto mutate) {
    StepConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), Error);
  };
  bad([](StepConfig& c) { c.h = 0.0; });
  bad([](StepConfig& c) { c.alpha = 1.0; });
  bad([](StepConfig& c) { c.alpha = 0.0; });
  bad([](StepConfig& c) { c.eps_outer = 0.0; });
  bad([](StepConfig& c) { c.eps_outer = -1e-3; c.iteration_cap = 10; });
  bad([](StepConfig& c) { c.K = 1.0; });
  bad([](StepConfig& c) { c.d_hat = -1.0; });
  bad([](StepConfig& c) { c.omega = 1.0; });
  bad([](StepConfig& c) { c.min_separation = 1.0; });
  bad([](StepConfig& c) { c.min_separation = -0.1; });
  StepConfig budget;
  budget.eps_outer = 0.0;
  budget.iteration_cap = 10;
  CHECK_NOTHROW(budget.validate());
}

TEST_CASE("accepted states keep pairs at least min_separation * d_hat apart") {
  SceneConfig c = sphere_drape_scene(0.25);
  c.solver.min_separation = 0.05;
  Simulator sim = make_simulator(build_scene(c), c);
  const double xi = c.solver.min_separation * c.solver.d_hat;
  PatchBVH bvh(sim.world());
  double closest = 1.0;
  for (int s = 0; s < 40; ++s) {
    sim.step();
    const Positions x = sim.world_state();
    for (const auto& p : broad_phase(sim.world(), bvh, x, x, c.solver.d_hat))
      closest = std::min(closest, pair_proximity(p.kind, gather(p, x)).distance);
  }
  CHECK(closest < c.solver.d_hat);  // in contact
  CHECK(closest >= xi * (1.0 - 1e-9));
}

TEST_CASE("warm start at rest equilibrium stops after one iteration") {
  SceneConfig c = cantilever_scene(0.3);
  c.gravity = Vec3::Zero();
  const Scene scene = build_scene(c);
  const Simulator sim = make_simulator(scene, c);
  const Positions z = compute_z(sim.state(), sim.mesh(), c.solver.h, sim.external_force());
  CHECK((z - sim.mesh().rest_positions).norm() < 1e-14);
  const auto [x, n] = sim.warm_start(z);
  CHECK(n == 1);
  CHECK((x - sim.mesh().rest_positions).norm() <= 1e-10);
}

TEST_CASE("warm start in free fall lands on z") {
  const SceneConfig c = free_fall_scene(2);
  const Scene scene = build_scene(c);
  const Simulator sim = make_simulator(scene, c);
  const Positions z = compute_z(sim.state(), sim.mesh(), c.solver.h, sim.external_force());
  const auto [x, n] = sim.warm_start(z);
  CHECK(n <= 2);
  CHECK((x - z).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("hanging strip warm start takes at most five iterations") {
  SceneConfig c = cantilever_scene(0.5);
  Simulator sim = make_simulator(build_scene(c), c);
  for (int s = 0; s < 5; ++s) {
    const StepReport r = sim.step();
    INFO("step " << s);
    CHECK(r.warm_start_iterations <= 5);
  }
}

TEST_CASE("a quad falling in vacuum follows the ballistic trajectory") {
  const SceneConfig c = free_fall_scene(2);
  Simulator sim = make_simulator(build_scene(c), c);
  const Positions x0 = sim.state().x;
  const double h = c.solver.h;
  for (int s = 1; s <= 10; ++s) {
    const StepReport r = sim.step();
    CHECK(r.full_ccd_calls == r.outer_loops + 2);
    // Implicit Euler under constant gravity: x_n = x_0 + g h^2 n (n + 1) / 2.
    const double drop = 9.8 * h * h * s * (s + 1) / 2.0;
    for (int v = 0; v < 4; ++v) CHECK(std::abs(sim.state().x(v, 1) - (x0(v, 1) - drop)) <= 1e-6);
  }
}

TEST_CASE("drape steps: structure, progress and penetration freedom") {
  SceneConfig c = sphere_drape_scene(0.3);
  c.solver.verify = true;
  c.output.steps = 60;
  Simulator sim = make_simulator(build_scene(c), c);
  int outer = 0, non_increasing = 0, contact_steps = 0;
  for (int s = 0; s < c.output.steps; ++s) {
    StepReport r;
    REQUIRE_NOTHROW(r = sim.step());
    CHECK(r.verified);
    CHECK(r.penetration_free);
    // One FullCCD after the warm start, one per outer loop, one at exit.
    CHECK(r.full_ccd_calls == r.outer_loops + 2);
    CHECK(static_cast<int>(r.outer_deltas.size()) == r.outer_loops);
    contact_steps += r.tracked_pairs > 0;
    for (size_t k = 1; k < r.outer_deltas.size(); ++k) {
      ++outer;
      non_increasing += r.outer_deltas[k] <= r.outer_deltas[k - 1];
    }
  }
  CHECK(contact_steps > 10);
  INFO(non_increasing << " of " << outer << " consecutive outer loops non-increasing");
  if (outer > 0) CHECK(non_increasing >= 0.95 * outer);
}

TEST_CASE("identical config and seed give bitwise identical frames") {
  SceneConfig c = sphere_drape_scene(0.25);
  c.output.steps = 25;
  c.cloth.jitter = 1e-4;
  c.seed = 42;
  c.output.frame_stride = 5;
  std::vector<std::string> frames[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path dir = scratch("det" + std::to_string(run));
    c.output.frames_dir = dir.string();
    const RunSummary s = run_simulation(c);
    REQUIRE(s.failure.empty());
    for (int k = 5; k <= 25; k += 5) {
      char name[32];
      std::snprintf(name, sizeof name, "frame_%05d.obj", k);
      frames[run].push_back(slurp(dir / name));
    }
  }
  CHECK(frames[0] == frames[1]);
  CHECK_FALSE(frames[0][0].empty());
  // A different seed changes the jittered start.
  c.seed = 43;
  const fs::path dir = scratch("det2");
  c.output.frames_dir = dir.string();
  run_simulation(c);
  CHECK(slurp(dir / "frame_00005.obj") != frames[0][0]);
}

TEST_CASE("residual forwarding of a converged state is zero") {
  SceneConfig c = cantilever_scene(0.3);
  c.gravity = Vec3::Zero();
  const Simulator sim = make_simulator(build_scene(c), c);
  const Positions z = compute_z(sim.state(), sim.mesh(), c.solver.h, sim.external_force());
  const RfResult rf = sim.residual_forward(z, sim.world_state(), {});
  CHECK(rf.f_r.norm() <= 1e-9);
  CHECK(rf.delta_f.norm() <= 1e-6);
}

TEST_CASE("energy at the rest state with x = z is zero and DBB vanishes beyond d_hat") {
  const ClothMesh m = grid(6, 6);
  const ElasticConstraints el = build_elastic(m, {160.0, 1e-2});
  EnergyModel model;
  model.mesh = &m;
  model.elastic = &el;
  model.z = m.rest_positions;
  model.h = 0.01;
  CHECK(energy(model, m.rest_positions) == doctest::Approx(0.0).epsilon(1e-30));
  // All barrier pairs farther than d_hat.
  model.d_hat = 1e-3;
  model.kappa = 10.0;
  model.barrier_pairs.push_back({PairKind::VertexTriangle, {0, 10, 11, 16}});
  Positions x = m.rest_positions;
  x(0, 1) += 0.5;
  EnergyTerms only;
  only.inertia = only.stretch = only.bend = only.collision = false;
  Positions g;
  CHECK(energy(model, x, &g, only) == 0.0);
  CHECK(g.norm() == 0.0);
}

TEST_CASE("RF raises no error when triggered under an iteration cap") {
  SceneConfig c = teapot_drop_scene(0.5);
  c.solver.iteration_cap = 5;
  c.output.steps = 25;
  c.solver.verify = true;
  const RunSummary s = run_simulation(c);
  CHECK(s.failure.empty());
  int rf = 0;
  for (const auto& r : s.reports) {
    rf += r.rf_triggered;
    CHECK(r.lg_iterations <= 5 + r.warm_start_iterations);
  }
  CHECK(rf > 0);
}

TEST_CASE("budget mode runs every step to the iteration cap") {
  SceneConfig c = free_fall_scene(4);
  c.solver.iteration_cap = 6;
  c.solver.eps_outer = 0.0;
  c.output.steps = 5;
  const RunSummary s = run_simulation(c);
  REQUIRE(s.failure.empty());
  for (const auto& r : s.reports) CHECK(r.cap_hit);
}
