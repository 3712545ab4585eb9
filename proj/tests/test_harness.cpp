#include "pdsim/config.hpp"
#include "pdsim/oracle.hpp"
#include "pdsim/run.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace pdtest;
namespace fs = std::filesystem;

TEST_CASE("every builtin scene survives a config round trip") {
  for (const std::string& name : builtin_scene_names()) {
    INFO(name);
    const auto c = builtin_scene(name);
    REQUIRE(c.has_value());
    const std::string text = serialize_scene_config(*c);
    const SceneConfig back = parse_scene_config(text);
    CHECK(back == *c);
    CHECK(serialize_scene_config(back) == text);
  }
}

TEST_CASE("modified configs round trip exactly") {
  SceneConfig c = twist_scene(0.5);
  c.solver.h = 1.0 / 3.0;  // not representable in short decimal
  c.solver.barrier = BarrierMode::DBB;
  c.solver.iteration_cap = 7;
  c.output.dump_dir = "dumps dir";
  c.seed = 0xfedcba9876543210ull;
  c.gravity = Vec3(0.1, -1e-300, 3.0);
  c.material.bend_stiffness = 0.1 + 0.2;
  c.output.metrics_path = "a: b.csv";
  ObstacleSpec box;
  box.name = "b";
  box.kind = "box";
  box.size = Vec3(0.3, 0.2, 0.1);
  box.motion.velocity = Vec3(0, 0, 1);
  c.obstacles.push_back(box);
  CHECK(parse_scene_config(serialize_scene_config(c)) == c);
}

TEST_CASE("unknown keys and bad values report their line") {
  const std::string text = "name: x\nsolver:\n  h: 0.01\n  alpah: 0.5\n";
  try {
    parse_scene_config(text, "t.yaml");
    FAIL("no error");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 4);
    CHECK(std::string(e.what()).find("alpah") != std::string::npos);
  }
  try {
    parse_scene_config("name: x\nsolver:\n  h: fast\n", "t.yaml");
    FAIL("no error");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_scene_config("solver:\n  h: -1\n"), ConfigError);
  CHECK_THROWS_AS(parse_scene_config("solver: [1, 2\n"), ConfigError);
  // Missing keys keep defaults.
  const SceneConfig d = parse_scene_config("name: only\n");
  CHECK(d.name == "only");
  CHECK(d.solver == StepConfig{});
}

TEST_CASE("missing mesh files are reported at load time") {
  const fs::path dir = fs::temp_directory_path() / "pdsim_test_cfg";
  fs::remove_all(dir);
  fs::create_directories(dir);
  SceneConfig c = free_fall_scene();
  c.cloth.kind = "mesh";
  c.cloth.mesh.path = "nowhere.obj";
  save_scene_config((dir / "s.yaml").string(), c);
  CHECK_THROWS_AS(load_scene_config((dir / "s.yaml").string()), Error);
  // Relative paths resolve against the config directory.
  std::ofstream(dir / "nowhere.obj") << "v 0 0 0\nv 1 0 0\nv 0 0 1\nf 1 2 3\n";
  const SceneConfig ok = load_scene_config((dir / "s.yaml").string());
  CHECK(fs::path(ok.cloth.mesh.path) == dir / "nowhere.obj");
  const Scene s = build_scene(ok);
  CHECK(s.mesh.vertex_count() == 3);
}

TEST_CASE("OBJ round trip at nine decimals") {
  std::mt19937_64 rng(5);
  const Positions x = random_positions(30, rng, 10.0);
  const ClothMesh m = grid(5, 6);
  std::ostringstream a;
  write_obj(a, x, m.triangles);
  std::istringstream in(a.str());
  const ObjMesh back = read_obj(in);
  CHECK(back.triangles == m.triangles);
  CHECK((back.vertices - x).cwiseAbs().maxCoeff() <= 5e-10);
  std::ostringstream b;
  write_obj(b, back.vertices, back.triangles);
  CHECK(a.str() == b.str());
}

TEST_CASE("OBJ reader handles quads, slashes, negative indices and errors") {
  std::istringstream in(
      "# comment\nv 0 0 0\nv 1 0 0\nv 1 0 1\nv 0 0 1\nvn 0 1 0\nf 1/1/1 2//1 3 4\nv 2 0 0\nf -1 -4 -5\n");
  const ObjMesh m = read_obj(in);
  REQUIRE(m.triangles.size() == 3);
  CHECK(m.triangles[0] == Tri{0, 1, 2});
  CHECK(m.triangles[1] == Tri{0, 2, 3});
  CHECK(m.triangles[2] == Tri{4, 1, 0});
  std::istringstream bad("v 0 0 0\nf 1 2 3\n");
  CHECK_THROWS_AS(read_obj(bad), Error);
  std::istringstream junk("v 0 zero 0\n");
  CHECK_THROWS_AS(read_obj(junk), Error);
}

TEST_CASE("free fall run writes frames and metrics") {
  const fs::path dir = fs::temp_directory_path() / "pdsim_test_run";
  fs::remove_all(dir);
  SceneConfig c = free_fall_scene(2);
  c.output.steps = 10;
  c.output.frame_stride = 1;
  c.output.frames_dir = (dir / "frames").string();
  c.output.metrics_path = (dir / "m.csv").string();
  c.solver.verify = true;
  std::ostringstream log;
  const RunSummary s = run_simulation(c, &log);
  CHECK(s.failure.empty());
  CHECK(s.penetration_free);
  CHECK(s.reports.size() == 10);
  int frames = 0;
  for (const auto& e : fs::directory_iterator(dir / "frames")) frames += e.path().extension() == ".obj";
  CHECK(frames >= 10);
  const ObjMesh last = load_obj((dir / "frames" / "frame_00010.obj").string());
  const double h = c.solver.h;
  const double drop = 9.8 * h * h * 10 * 11 / 2.0;
  const Scene scene = build_scene(c);
  for (int v = 0; v < 4; ++v) CHECK(last.vertices(v, 1) == doctest::Approx(scene.initial_x(v, 1) - drop).epsilon(1e-8));
  std::ifstream csv(dir / "m.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header.rfind("step,lg_iterations,", 0) == 0);
  int rows = 0;
  for (std::string line; std::getline(csv, line);) rows += !line.empty();
  CHECK(rows == 10);
  // Kinetic energy grows as (g t)^2 m / 2 in free fall.
  CHECK(s.kinetic.back() > s.kinetic.front());
}

TEST_CASE("oracle_ccd examples") {
  PairPoints a0{{Vec3(0.2, 1, 0.2), Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 0, 1)}};
  PairPoints a1 = a0;
  a1.p[0].y() = -1;
  const auto t = oracle_ccd(PairKind::VertexTriangle, a0, a1);
  REQUIRE(t.has_value());
  CHECK(*t == doctest::Approx(0.5).epsilon(1e-3));
  // Passing beside the triangle.
  PairPoints b0 = a0, b1 = a1;
  b0.p[0].x() = b1.p[0].x() = 2.0;
  CHECK_FALSE(oracle_ccd(PairKind::VertexTriangle, b0, b1).has_value());
  // Crossing edges.
  PairPoints e0{{Vec3(0, 1, 0.5), Vec3(1, 1, 0.5), Vec3(0.5, 0, 0), Vec3(0.5, 0, 1)}};
  PairPoints e1 = e0;
  e1.p[0].y() = e1.p[1].y() = -1;
  const auto te = oracle_ccd(PairKind::EdgeEdge, e0, e1);
  REQUIRE(te.has_value());
  CHECK(*te == doctest::Approx(0.5).epsilon(1e-3));
  CHECK_THROWS_AS(oracle_ccd(PairKind::VertexTriangle, a0, a1, 100), Error);
}

TEST_CASE("kinetic energy") {
  const ClothMesh m = grid(3, 3, 1.0, 1.0, 0.3);
  Positions v = Positions::Zero(9, 3);
  v.col(1).setConstant(2.0);
  CHECK(kinetic_energy(m, v) == doctest::Approx(0.5 * 0.3 * 4.0));
}
