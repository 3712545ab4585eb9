#include "pdsim/scenes.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <map>
#include <numbers>
#include <random>

namespace pdsim {

namespace {

void apply_transform(Positions& x, const MeshSource& src) {
  const double d = std::numbers::pi / 180.0;
  const Mat3 R = (Eigen::AngleAxisd(src.rotate_deg.z() * d, Vec3::UnitZ()) *
                  Eigen::AngleAxisd(src.rotate_deg.y() * d, Vec3::UnitY()) *
                  Eigen::AngleAxisd(src.rotate_deg.x() * d, Vec3::UnitX()))
                     .toRotationMatrix();
  for (int i = 0; i < x.rows(); ++i) set_row3(x, i, R * (src.scale * row3(x, i)) + src.translate);
}

// Merges vertices that coincide up to `tol`, keeping first occurrences.
ObjMesh weld(const std::vector<Vec3>& pts, const std::vector<Tri>& tris, double tol) {
  std::map<std::array<long long, 3>, int> ids;
  std::vector<int> remap(pts.size());
  std::vector<Vec3> kept;
  for (size_t i = 0; i < pts.size(); ++i) {
    const std::array<long long, 3> key{std::llround(pts[i].x() / tol), std::llround(pts[i].y() / tol),
                                       std::llround(pts[i].z() / tol)};
    auto [it, fresh] = ids.emplace(key, static_cast<int>(kept.size()));
    if (fresh) kept.push_back(pts[i]);
    remap[i] = it->second;
  }
  ObjMesh out;
  out.vertices.resize(static_cast<Eigen::Index>(kept.size()), 3);
  for (size_t i = 0; i < kept.size(); ++i) set_row3(out.vertices, static_cast<int>(i), kept[i]);
  for (const auto& t : tris) out.triangles.push_back({remap[t[0]], remap[t[1]], remap[t[2]]});
  return out;
}

void add_patch(std::vector<Vec3>& pts, std::vector<Tri>& tris, const Vec3& o, const Vec3& a, const Vec3& b,
               int cells) {
  const int base = static_cast<int>(pts.size());
  for (int j = 0; j <= cells; ++j)
    for (int i = 0; i <= cells; ++i) pts.push_back(o + a * (double(i) / cells) + b * (double(j) / cells));
  const int w = cells + 1;
  for (int j = 0; j < cells; ++j)
    for (int i = 0; i < cells; ++i) {
      const int v0 = base + j * w + i;
      tris.push_back({v0, v0 + 1, v0 + w + 1});
      tris.push_back({v0, v0 + w + 1, v0 + w});
    }
}

ObjMesh obstacle_geometry(const ObstacleSpec& s) {
  if (s.kind == "sphere") return icosphere(s.center, s.radius, s.subdivisions);
  if (s.kind == "box") return box_mesh(s.center, s.size, s.subdivisions);
  if (s.kind == "quad") return quad_mesh(s.center, s.size.x(), s.size.z(), s.subdivisions);
  if (s.kind == "mesh") {
    ObjMesh m = load_obj(s.mesh.path);
    apply_transform(m.vertices, s.mesh);
    return m;
  }
  throw Error("obstacle '" + s.name + "': unknown kind '" + s.kind + "'");
}

int cells_for(double scale, int nominal) { return std::max(2, static_cast<int>(std::lround(nominal * scale))); }

}  // namespace

ObjMesh grid_mesh(const GridSpec& g) {
  if (g.nx < 2 || g.ny < 2) throw Error("grid needs at least 2 x 2 vertices");
  ObjMesh m;
  m.vertices.resize(g.nx * g.ny, 3);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const Vec3 p = g.origin + g.u * (g.width * i / (g.nx - 1)) + g.v * (g.height * j / (g.ny - 1));
      set_row3(m.vertices, j * g.nx + i, p);
    }
  for (int j = 0; j + 1 < g.ny; ++j)
    for (int i = 0; i + 1 < g.nx; ++i) {
      const int a = j * g.nx + i, b = a + 1, c = a + g.nx, d = c + 1;
      if ((i + j) % 2 == 0) {
        m.triangles.push_back({a, b, d});
        m.triangles.push_back({a, d, c});
      } else {
        m.triangles.push_back({a, b, c});
        m.triangles.push_back({b, d, c});
      }
    }
  return m;
}

ObjMesh icosphere(const Vec3& center, double radius, int level) {
  if (!(radius > 0.0) || level < 0) throw Error("icosphere needs radius > 0 and level >= 0");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> pts = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                           {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : pts) p.normalize();
  std::vector<Tri> tris = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                           {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                           {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      pts.push_back((pts[a] + pts[b]).normalized());
      const int id = static_cast<int>(pts.size()) - 1;
      mid.emplace(key, id);
      return id;
    };
    std::vector<Tri> next;
    next.reserve(tris.size() * 4);
    for (const auto& f : tris) {
      const int a = midpoint(f[0], f[1]), b = midpoint(f[1], f[2]), c = midpoint(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    tris.swap(next);
  }
  ObjMesh m;
  m.vertices.resize(static_cast<Eigen::Index>(pts.size()), 3);
  for (size_t i = 0; i < pts.size(); ++i) set_row3(m.vertices, static_cast<int>(i), center + radius * pts[i]);
  m.triangles = std::move(tris);
  return m;
}

ObjMesh box_mesh(const Vec3& center, const Vec3& size, int cells) {
  if (!(size.minCoeff() > 0.0) || cells < 1) throw Error("box needs positive size and cells >= 1");
  const Vec3 lo = center - 0.5 * size;
  const Vec3 X = Vec3::UnitX() * size.x(), Y = Vec3::UnitY() * size.y(), Z = Vec3::UnitZ() * size.z();
  std::vector<Vec3> pts;
  std::vector<Tri> tris;
  add_patch(pts, tris, lo, Y, X, cells);
  add_patch(pts, tris, lo + Z, X, Y, cells);
  add_patch(pts, tris, lo, Z, Y, cells);
  add_patch(pts, tris, lo + X, Y, Z, cells);
  add_patch(pts, tris, lo, X, Z, cells);
  add_patch(pts, tris, lo + Y, Z, X, cells);
  return weld(pts, tris, 1e-9 * size.maxCoeff());
}

ObjMesh quad_mesh(const Vec3& center, double size_x, double size_z, int cells) {
  if (!(size_x > 0.0 && size_z > 0.0) || cells < 1) throw Error("quad needs positive size and cells >= 1");
  std::vector<Vec3> pts;
  std::vector<Tri> tris;
  add_patch(pts, tris, center - Vec3(0.5 * size_x, 0.0, 0.5 * size_z), Vec3::UnitX() * size_x,
            Vec3::UnitZ() * size_z, cells);
  return weld(pts, tris, 1e-12);
}

Scene build_scene(const SceneConfig& config) {
  ObjMesh cloth;
  if (config.cloth.kind == "grid") {
    cloth = grid_mesh(config.cloth.grid);
  } else if (config.cloth.kind == "mesh") {
    cloth = load_obj(config.cloth.mesh.path);
    apply_transform(cloth.vertices, config.cloth.mesh);
  } else {
    throw Error("cloth: unknown kind '" + config.cloth.kind + "'");
  }
  const int n = static_cast<int>(cloth.vertices.rows());

  std::vector<PinGroup> groups;
  std::vector<int> owner(n, -1);
  for (size_t g = 0; g < config.pins.size(); ++g) {
    const PinSpec& spec = config.pins[g];
    PinGroup group;
    group.motion = spec.motion;
    auto add = [&](int v) {
      if (v < 0 || v >= n) throw Error("pin group " + std::to_string(g) + ": vertex " + std::to_string(v) + " out of range");
      if (owner[v] == static_cast<int>(g)) return;
      if (owner[v] >= 0) throw Error("vertex " + std::to_string(v) + " belongs to two pin groups");
      owner[v] = static_cast<int>(g);
      group.vertices.push_back(v);
    };
    for (int v : spec.vertices) add(v);
    if (spec.use_region)
      for (int v = 0; v < n; ++v) {
        const Vec3 p = row3(cloth.vertices, v);
        if ((p.array() >= spec.region_min.array()).all() && (p.array() <= spec.region_max.array()).all()) add(v);
      }
    if (group.vertices.empty()) throw Error("pin group " + std::to_string(g) + " selects no vertices");
    std::sort(group.vertices.begin(), group.vertices.end());
    groups.push_back(std::move(group));
  }

  Scene scene;
  scene.mesh = build_mesh(cloth.vertices, cloth.triangles, config.density, groups);
  for (const auto& o : config.obstacles) {
    ObjMesh g = obstacle_geometry(o);
    scene.obstacles.push_back(Obstacle{o.name, g.vertices, g.triangles, o.motion});
  }
  scene.f_ext = gravity_force(scene.mesh, config.gravity);

  scene.initial_x = scene.mesh.rest_positions;
  scene.initial_velocity = Positions::Zero(n, 3);
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  for (int v : scene.mesh.free_vertices) {
    scene.initial_velocity.row(v) = config.initial_velocity.transpose();
    if (config.cloth.jitter > 0.0)
      for (int c = 0; c < 3; ++c) scene.initial_x(v, c) += config.cloth.jitter * jitter(rng);
  }
  return scene;
}

Simulator make_simulator(const Scene& scene, const SceneConfig& config) {
  StepConfig solver = config.solver;
  if (solver.dump_dir.empty()) solver.dump_dir = config.output.dump_dir;
  Simulator sim(scene.mesh, config.material, scene.obstacles, solver, config.subspace, scene.f_ext);
  sim.state().x = scene.initial_x;
  sim.state().x_prev = scene.initial_x;
  sim.state().x_dot = scene.initial_velocity;
  return sim;
}

SceneConfig free_fall_scene(int n) {
  SceneConfig c;
  c.name = "free_fall";
  c.cloth.grid = GridSpec{n, n, 0.1, 0.1, Vec3(0.0, 1.0, 0.0), Vec3::UnitX(), Vec3::UnitZ()};
  c.output.steps = 10;
  return c;
}

SceneConfig cantilever_scene(double scale) {
  SceneConfig c;
  c.name = "cantilever";
  const int nx = cells_for(scale, 111), ny = cells_for(scale, 30);
  c.cloth.grid = GridSpec{nx, ny, 1.0, 0.27, Vec3::Zero(), Vec3::UnitX(), Vec3::UnitZ()};
  c.material.bend_stiffness = 0.05;
  PinSpec clamp;
  clamp.use_region = true;
  const double dx = 1.0 / (nx - 1);
  clamp.region_min = Vec3(-1.0, -1.0, -1.0);
  clamp.region_max = Vec3(1.5 * dx, 1.0, 1.0);
  c.pins.push_back(clamp);
  c.output.steps = 50;
  return c;
}

SceneConfig sphere_drape_scene(double scale) {
  SceneConfig c;
  c.name = "sphere_drape";
  const int m = cells_for(scale, 71);
  c.cloth.grid = GridSpec{m, m, 1.0, 1.0, Vec3(-0.5, 0.32, -0.5), Vec3::UnitX(), Vec3::UnitZ()};
  ObstacleSpec sphere;
  sphere.name = "sphere";
  sphere.radius = 0.3;
  sphere.subdivisions = 4;
  c.obstacles.push_back(sphere);
  c.solver.h = 1.0 / 200.0;
  c.output.steps = 200;
  return c;
}

SceneConfig desk_fold_scene(double scale) {
  SceneConfig c;
  c.name = "desk_fold";
  const int m = cells_for(scale, 90);
  c.cloth.grid = GridSpec{m, m, 1.0, 1.0, Vec3(-0.5, 0.02, -0.5), Vec3::UnitX(), Vec3::UnitZ()};
  ObstacleSpec desk;
  desk.name = "desk";
  desk.kind = "box";
  desk.center = Vec3(-0.25, -0.05, 0.0);
  desk.size = Vec3(0.8, 0.1, 1.4);
  desk.subdivisions = 4;
  ObstacleSpec floor;
  floor.name = "floor";
  floor.kind = "quad";
  floor.center = Vec3(0.0, -0.3, 0.0);
  floor.size = Vec3(3.0, 0.0, 3.0);
  floor.subdivisions = 6;
  c.obstacles = {desk, floor};
  c.output.steps = 300;
  return c;
}

SceneConfig twist_scene(double scale) {
  SceneConfig c;
  c.name = "twist";
  const int nx = cells_for(scale, 100), ny = cells_for(scale, 50);
  c.cloth.grid = GridSpec{nx, ny, 1.0, 0.5, Vec3(-0.5, 0.0, -0.25), Vec3::UnitX(), Vec3::UnitZ()};
  const double dx = 1.0 / (nx - 1);
  for (int side : {-1, 1}) {
    PinSpec p;
    p.use_region = true;
    const double x_end = 0.5 * side;
    p.region_min = Vec3(side < 0 ? -1.0 : x_end - 0.5 * dx, -1.0, -1.0);
    p.region_max = Vec3(side < 0 ? x_end + 0.5 * dx : 1.0, 1.0, 1.0);
    p.motion.center = Vec3(x_end, 0.0, 0.0);
    p.motion.axis = Vec3::UnitX();
    p.motion.angular_speed = -2.0 * side;
    p.motion.velocity = Vec3(-0.05 * side, 0.0, 0.0);
    p.motion.stop_time = 3.0;
    c.pins.push_back(p);
  }
  c.gravity = Vec3::Zero();
  c.output.steps = 400;
  return c;
}

SceneConfig teapot_drop_scene(double scale) {
  SceneConfig c;
  c.name = "teapot_drop";
  const int m = cells_for(scale, 40);
  c.cloth.grid = GridSpec{m, m, 0.6, 0.6, Vec3(-0.3, 0.3, -0.3), Vec3::UnitX(), Vec3::UnitZ()};
  c.initial_velocity = Vec3(0.0, -6.0, 0.0);
  ObstacleSpec body;
  body.name = "body";
  body.radius = 0.25;
  body.subdivisions = 3;
  ObstacleSpec base;
  base.name = "base";
  base.kind = "box";
  base.center = Vec3(0.0, -0.28, 0.0);
  base.size = Vec3(0.3, 0.1, 0.3);
  base.subdivisions = 2;
  c.obstacles = {body, base};
  // Fixed per-step budget: only the cap ends the LG loop.
  c.solver.iteration_cap = 50;
  c.solver.eps_outer = 0.0;
  c.solver.max_outer = 200;
  c.output.steps = 40;
  return c;
}

std::vector<std::string> builtin_scene_names() {
  return {"free_fall", "cantilever", "sphere_drape", "desk_fold", "twist", "teapot_drop"};
}

std::optional<SceneConfig> builtin_scene(const std::string& name, double scale) {
  if (name == "free_fall") return free_fall_scene(std::max(2, static_cast<int>(std::lround(2 * scale))));
  if (name == "cantilever") return cantilever_scene(scale);
  if (name == "sphere_drape") return sphere_drape_scene(scale);
  if (name == "desk_fold") return desk_fold_scene(scale);
  if (name == "twist") return twist_scene(scale);
  if (name == "teapot_drop") return teapot_drop_scene(scale);
  return std::nullopt;
}

}  // namespace pdsim
