#pragma once

#include "pdsim/obj.hpp"
#include "pdsim/stepper.hpp"

#include <cstdint>
#include <optional>

namespace pdsim {

// Regular grid spanned by `u` and `v` from `origin`; nx x ny vertices.
// Diagonals alternate so the mesh has no preferred shear direction.
struct GridSpec {
  int nx = 2;
  int ny = 2;
  double width = 1.0;
  double height = 1.0;
  Vec3 origin = Vec3::Zero();
  Vec3 u = Vec3::UnitX();
  Vec3 v = Vec3::UnitZ();

  bool operator==(const GridSpec&) const = default;
};

// External OBJ with a similarity transform applied in the order scale,
// rotate (XYZ Euler, degrees), translate.
struct MeshSource {
  std::string path;
  double scale = 1.0;
  Vec3 rotate_deg = Vec3::Zero();
  Vec3 translate = Vec3::Zero();

  bool operator==(const MeshSource&) const = default;
};

struct ClothSpec {
  std::string kind = "grid";  // grid | mesh
  GridSpec grid;
  MeshSource mesh;
  double jitter = 0.0;  // seeded uniform perturbation of the initial state

  bool operator==(const ClothSpec&) const = default;
};

struct PinSpec {
  std::vector<int> vertices;
  bool use_region = false;  // add every rest vertex inside [region_min, region_max]
  Vec3 region_min = Vec3::Zero();
  Vec3 region_max = Vec3::Zero();
  PinMotion motion;

  bool operator==(const PinSpec&) const = default;
};

struct ObstacleSpec {
  std::string name;
  std::string kind = "sphere";  // sphere | box | quad | mesh
  Vec3 center = Vec3::Zero();
  double radius = 0.5;        // sphere
  int subdivisions = 3;       // sphere: icosphere level; box, quad: cells per side
  Vec3 size = Vec3::Ones();   // box extents; quad uses x and z
  MeshSource mesh;
  PinMotion motion;

  bool operator==(const ObstacleSpec&) const = default;
};

struct OutputSpec {
  int steps = 100;
  int frame_stride = 0;  // 0 writes no frames
  std::string frames_dir;
  std::string metrics_path;
  std::string dump_dir;

  bool operator==(const OutputSpec&) const = default;
};

struct SceneConfig {
  std::string name = "scene";
  ClothSpec cloth;
  double density = 0.2;  // kg / m^2
  MaterialParams material;
  Vec3 gravity = Vec3(0.0, -9.8, 0.0);
  Vec3 initial_velocity = Vec3::Zero();
  std::vector<PinSpec> pins;
  std::vector<ObstacleSpec> obstacles;
  StepConfig solver;
  SubspaceConfig subspace;
  OutputSpec output;
  std::uint64_t seed = 1;

  bool operator==(const SceneConfig&) const = default;
};

struct Scene {
  ClothMesh mesh;
  std::vector<Obstacle> obstacles;
  Positions f_ext;
  Positions initial_x;
  Positions initial_velocity;
};

// Raw geometry.
ObjMesh grid_mesh(const GridSpec& spec);
ObjMesh icosphere(const Vec3& center, double radius, int level);
ObjMesh box_mesh(const Vec3& center, const Vec3& size, int cells);
ObjMesh quad_mesh(const Vec3& center, double size_x, double size_z, int cells);

// Resolves sources, pins and obstacles. Throws Error naming the bad entry.
Scene build_scene(const SceneConfig& config);

// Simulator in the scene's initial state.
Simulator make_simulator(const Scene& scene, const SceneConfig& config);

// Built-in scenes. `scale` multiplies the grid resolution (1 = nominal size).
SceneConfig free_fall_scene(int n = 2);
SceneConfig cantilever_scene(double scale = 1.0);
SceneConfig sphere_drape_scene(double scale = 1.0);
SceneConfig desk_fold_scene(double scale = 1.0);
SceneConfig twist_scene(double scale = 1.0);
SceneConfig teapot_drop_scene(double scale = 1.0);

std::vector<std::string> builtin_scene_names();
std::optional<SceneConfig> builtin_scene(const std::string& name, double scale = 1.0);

}  // namespace pdsim
