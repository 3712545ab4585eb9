#include "pdsim/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace pdsim {

namespace {

std::string located(const std::string& source, int line, int column, const std::string& what) {
  std::ostringstream s;
  s << source;
  if (line > 0) s << ":" << line << ":" << column;
  s << ": " << what;
  return s.str();
}

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& at, const std::string& what) const {
    const YAML::Mark m = at.Mark();
    if (m.is_null()) throw ConfigError(source_, 0, 0, what);
    throw ConfigError(source_, m.line + 1, m.column + 1, what);
  }

  void map(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> keys) const {
    if (!node.IsMap()) fail(node, "'" + where + "' must be a mapping");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& kv : node) {
      const std::string k = kv.first.as<std::string>();
      if (!allowed.count(k)) fail(kv.first, "unknown key '" + k + "' in '" + where + "'");
    }
  }

  template <class T>
  void get(const YAML::Node& node, const char* key, T& out) const {
    const YAML::Node v = node[key];
    if (!v) return;
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      fail(v, std::string("bad value for '") + key + "'");
    }
  }

  void get(const YAML::Node& node, const char* key, Vec3& out) const {
    const YAML::Node v = node[key];
    if (!v) return;
    if (!v.IsSequence() || v.size() != 3) fail(v, std::string("'") + key + "' must be a list of 3 numbers");
    for (int i = 0; i < 3; ++i) {
      try {
        out[i] = v[i].as<double>();
      } catch (const YAML::Exception&) {
        fail(v[i], std::string("bad number in '") + key + "'");
      }
    }
  }

  void get(const YAML::Node& node, const char* key, BarrierMode& out) const {
    const YAML::Node v = node[key];
    if (!v) return;
    const std::string s = v.as<std::string>();
    if (s == "ndb")
      out = BarrierMode::NDB;
    else if (s == "dbb")
      out = BarrierMode::DBB;
    else
      fail(v, "barrier must be 'ndb' or 'dbb'");
  }

  void get(const YAML::Node& node, const char* key, ConvergenceNorm& out) const {
    const YAML::Node v = node[key];
    if (!v) return;
    const std::string s = v.as<std::string>();
    if (s == "max")
      out = ConvergenceNorm::Max;
    else if (s == "frobenius")
      out = ConvergenceNorm::Frobenius;
    else
      fail(v, "convergence_norm must be 'max' or 'frobenius'");
  }

  void require(bool ok, const YAML::Node& at, const std::string& what) const {
    if (!ok) fail(at, what);
  }

 private:
  std::string source_;
};

void read_mesh_source(const Reader& r, const YAML::Node& n, MeshSource& m) {
  r.map(n, "mesh", {"path", "scale", "rotate_deg", "translate"});
  r.get(n, "path", m.path);
  r.get(n, "scale", m.scale);
  r.get(n, "rotate_deg", m.rotate_deg);
  r.get(n, "translate", m.translate);
  r.require(m.scale > 0.0, n, "mesh scale must be positive");
}

void read_motion(const Reader& r, const YAML::Node& n, PinMotion& m) {
  r.map(n, "motion", {"center", "axis", "angular_speed", "velocity", "stop_time"});
  r.get(n, "center", m.center);
  r.get(n, "axis", m.axis);
  r.get(n, "angular_speed", m.angular_speed);
  r.get(n, "velocity", m.velocity);
  r.get(n, "stop_time", m.stop_time);
  r.require(m.axis.norm() > 0.0, n, "motion axis must be non-zero");
}

void read_solver(const Reader& r, const YAML::Node& n, StepConfig& s) {
  r.map(n, "solver",
        {"h", "eps_initial", "eps_inner", "eps_outer", "convergence_norm", "eps_toi", "alpha", "k", "K", "iteration_cap", "barrier",
         "d_hat", "min_separation", "gate", "broad_slack", "smoothing_iterations", "omega", "auto_omega", "sample_count", "projection_sample", "adaptive_samples",
         "max_outer", "max_inner", "warm_start_cap", "dbb_kappa", "residual_forwarding", "rf_weight", "rf_tolerance",
         "rf_max_iterations", "rf_accel_cap", "verify"});
  r.get(n, "h", s.h);
  r.get(n, "eps_initial", s.eps_initial);
  r.get(n, "eps_inner", s.eps_inner);
  r.get(n, "eps_outer", s.eps_outer);
  r.get(n, "convergence_norm", s.norm);
  r.get(n, "eps_toi", s.eps_toi);
  r.get(n, "alpha", s.alpha);
  r.get(n, "k", s.k);
  r.get(n, "K", s.K);
  r.get(n, "iteration_cap", s.iteration_cap);
  r.get(n, "barrier", s.barrier);
  r.get(n, "d_hat", s.d_hat);
  r.get(n, "min_separation", s.min_separation);
  r.get(n, "gate", s.gate);
  r.get(n, "broad_slack", s.broad_slack);
  r.get(n, "smoothing_iterations", s.smoothing_iterations);
  r.get(n, "omega", s.omega);
  r.get(n, "auto_omega", s.auto_omega);
  r.get(n, "sample_count", s.sample_count);
  r.get(n, "projection_sample", s.projection_sample);
  r.get(n, "adaptive_samples", s.adaptive_samples);
  r.get(n, "max_outer", s.max_outer);
  r.get(n, "max_inner", s.max_inner);
  r.get(n, "warm_start_cap", s.warm_start_cap);
  r.get(n, "dbb_kappa", s.dbb_kappa);
  r.get(n, "residual_forwarding", s.residual_forwarding);
  r.get(n, "rf_weight", s.rf_weight);
  r.get(n, "rf_tolerance", s.rf_tolerance);
  r.get(n, "rf_max_iterations", s.rf_max_iterations);
  r.get(n, "rf_accel_cap", s.rf_accel_cap);
  r.get(n, "verify", s.verify);
  try {
    s.validate();
  } catch (const Error& e) {
    r.fail(n, e.what());
  }
}

// Shortest text that parses back to the same double.
std::string num(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

void emit(YAML::Emitter& out, const Vec3& v) {
  out << YAML::Flow << YAML::BeginSeq << num(v.x()) << num(v.y()) << num(v.z()) << YAML::EndSeq;
}

void emit_mesh(YAML::Emitter& out, const MeshSource& m) {
  out << YAML::BeginMap;
  out << YAML::Key << "path" << YAML::Value << m.path;
  out << YAML::Key << "scale" << YAML::Value << num(m.scale);
  out << YAML::Key << "rotate_deg" << YAML::Value;
  emit(out, m.rotate_deg);
  out << YAML::Key << "translate" << YAML::Value;
  emit(out, m.translate);
  out << YAML::EndMap;
}

void emit_motion(YAML::Emitter& out, const PinMotion& m) {
  out << YAML::BeginMap;
  out << YAML::Key << "center" << YAML::Value;
  emit(out, m.center);
  out << YAML::Key << "axis" << YAML::Value;
  emit(out, m.axis);
  out << YAML::Key << "angular_speed" << YAML::Value << num(m.angular_speed);
  out << YAML::Key << "velocity" << YAML::Value;
  emit(out, m.velocity);
  out << YAML::Key << "stop_time" << YAML::Value << num(m.stop_time);
  out << YAML::EndMap;
}

}  // namespace

ConfigError::ConfigError(const std::string& source, int line, int column, const std::string& what)
    : Error(located(source, line, column, what)), line_(line), column_(column) {}

SceneConfig parse_scene_config(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source, e.mark.line + 1, e.mark.column + 1, e.msg);
  }
  const Reader r(source);
  SceneConfig c;
  if (!root || root.IsNull()) return c;
  r.map(root, "<root>",
        {"name", "seed", "density", "gravity", "initial_velocity", "cloth", "material", "solver", "subspace", "pins",
         "obstacles", "output"});
  r.get(root, "name", c.name);
  r.get(root, "seed", c.seed);
  r.get(root, "density", c.density);
  r.require(c.density > 0.0, root["density"] ? root["density"] : root, "density must be positive");
  r.get(root, "gravity", c.gravity);
  r.get(root, "initial_velocity", c.initial_velocity);

  if (const YAML::Node n = root["cloth"]) {
    r.map(n, "cloth", {"kind", "jitter", "grid", "mesh"});
    r.get(n, "kind", c.cloth.kind);
    r.require(c.cloth.kind == "grid" || c.cloth.kind == "mesh", n, "cloth kind must be 'grid' or 'mesh'");
    r.get(n, "jitter", c.cloth.jitter);
    r.require(c.cloth.jitter >= 0.0, n, "jitter must be non-negative");
    if (const YAML::Node g = n["grid"]) {
      r.map(g, "grid", {"nx", "ny", "width", "height", "origin", "u", "v"});
      GridSpec& s = c.cloth.grid;
      r.get(g, "nx", s.nx);
      r.get(g, "ny", s.ny);
      r.get(g, "width", s.width);
      r.get(g, "height", s.height);
      r.get(g, "origin", s.origin);
      r.get(g, "u", s.u);
      r.get(g, "v", s.v);
      r.require(s.nx >= 2 && s.ny >= 2, g, "grid needs nx, ny >= 2");
      r.require(s.width > 0.0 && s.height > 0.0, g, "grid width and height must be positive");
    }
    if (const YAML::Node m = n["mesh"]) read_mesh_source(r, m, c.cloth.mesh);
    r.require(c.cloth.kind != "mesh" || !c.cloth.mesh.path.empty(), n, "mesh cloth needs a path");
  }

  if (const YAML::Node n = root["material"]) {
    r.map(n, "material", {"stretch_stiffness", "bend_stiffness"});
    r.get(n, "stretch_stiffness", c.material.stretch_stiffness);
    r.get(n, "bend_stiffness", c.material.bend_stiffness);
    r.require(c.material.stretch_stiffness > 0.0 && c.material.bend_stiffness >= 0.0, n,
              "stiffness must be positive (bending may be zero)");
  }

  if (const YAML::Node n = root["solver"]) read_solver(r, n, c.solver);

  if (const YAML::Node n = root["subspace"]) {
    r.map(n, "subspace", {"r_bar", "r"});
    r.get(n, "r_bar", c.subspace.r_bar);
    r.get(n, "r", c.subspace.r);
    r.require(c.subspace.r >= 1 && c.subspace.r <= c.subspace.r_bar, n, "subspace needs 1 <= r <= r_bar");
  }

  if (const YAML::Node n = root["pins"]) {
    r.require(n.IsSequence(), n, "'pins' must be a list");
    for (const auto& p : n) {
      r.map(p, "pins[]", {"vertices", "region", "motion"});
      PinSpec spec;
      r.get(p, "vertices", spec.vertices);
      if (const YAML::Node reg = p["region"]) {
        r.map(reg, "region", {"min", "max"});
        spec.use_region = true;
        r.get(reg, "min", spec.region_min);
        r.get(reg, "max", spec.region_max);
      }
      if (const YAML::Node m = p["motion"]) read_motion(r, m, spec.motion);
      r.require(!spec.vertices.empty() || spec.use_region, p, "pin group needs vertices or a region");
      c.pins.push_back(spec);
    }
  }

  if (const YAML::Node n = root["obstacles"]) {
    r.require(n.IsSequence(), n, "'obstacles' must be a list");
    for (const auto& o : n) {
      r.map(o, "obstacles[]", {"name", "kind", "center", "radius", "subdivisions", "size", "mesh", "motion"});
      ObstacleSpec spec;
      r.get(o, "name", spec.name);
      r.get(o, "kind", spec.kind);
      r.require(spec.kind == "sphere" || spec.kind == "box" || spec.kind == "quad" || spec.kind == "mesh", o,
                "obstacle kind must be sphere, box, quad or mesh");
      r.get(o, "center", spec.center);
      r.get(o, "radius", spec.radius);
      r.get(o, "subdivisions", spec.subdivisions);
      r.get(o, "size", spec.size);
      if (const YAML::Node m = o["mesh"]) read_mesh_source(r, m, spec.mesh);
      if (const YAML::Node m = o["motion"]) read_motion(r, m, spec.motion);
      r.require(spec.radius > 0.0 && spec.subdivisions >= 0, o, "obstacle needs radius > 0 and subdivisions >= 0");
      r.require(spec.kind != "mesh" || !spec.mesh.path.empty(), o, "mesh obstacle needs a path");
      c.obstacles.push_back(spec);
    }
  }

  if (const YAML::Node n = root["output"]) {
    r.map(n, "output", {"steps", "frame_stride", "frames_dir", "metrics_path", "dump_dir"});
    r.get(n, "steps", c.output.steps);
    r.get(n, "frame_stride", c.output.frame_stride);
    r.get(n, "frames_dir", c.output.frames_dir);
    r.get(n, "metrics_path", c.output.metrics_path);
    r.get(n, "dump_dir", c.output.dump_dir);
    r.require(c.output.steps >= 0 && c.output.frame_stride >= 0, n, "steps and frame_stride must be >= 0");
  }
  return c;
}

SceneConfig load_scene_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, 0, 0, "cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  SceneConfig c = parse_scene_config(buf.str(), path);

  namespace fs = std::filesystem;
  const fs::path dir = fs::path(path).parent_path();
  auto resolve = [&](std::string& p, const std::string& what) {
    if (p.empty()) return;
    fs::path q(p);
    if (q.is_relative()) q = dir / q;
    if (!fs::exists(q)) throw ConfigError(path, 0, 0, what + " file not found: " + q.string());
    p = q.string();
  };
  if (c.cloth.kind == "mesh") resolve(c.cloth.mesh.path, "cloth mesh");
  for (auto& o : c.obstacles)
    if (o.kind == "mesh") resolve(o.mesh.path, "obstacle '" + o.name + "' mesh");
  return c;
}

std::string serialize_scene_config(const SceneConfig& c) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << c.name;
  out << YAML::Key << "seed" << YAML::Value << c.seed;
  out << YAML::Key << "density" << YAML::Value << num(c.density);
  out << YAML::Key << "gravity" << YAML::Value;
  emit(out, c.gravity);
  out << YAML::Key << "initial_velocity" << YAML::Value;
  emit(out, c.initial_velocity);

  out << YAML::Key << "cloth" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << c.cloth.kind;
  out << YAML::Key << "jitter" << YAML::Value << num(c.cloth.jitter);
  out << YAML::Key << "grid" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "nx" << YAML::Value << c.cloth.grid.nx;
  out << YAML::Key << "ny" << YAML::Value << c.cloth.grid.ny;
  out << YAML::Key << "width" << YAML::Value << num(c.cloth.grid.width);
  out << YAML::Key << "height" << YAML::Value << num(c.cloth.grid.height);
  out << YAML::Key << "origin" << YAML::Value;
  emit(out, c.cloth.grid.origin);
  out << YAML::Key << "u" << YAML::Value;
  emit(out, c.cloth.grid.u);
  out << YAML::Key << "v" << YAML::Value;
  emit(out, c.cloth.grid.v);
  out << YAML::EndMap;
  out << YAML::Key << "mesh" << YAML::Value;
  emit_mesh(out, c.cloth.mesh);
  out << YAML::EndMap;

  out << YAML::Key << "material" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "stretch_stiffness" << YAML::Value << num(c.material.stretch_stiffness);
  out << YAML::Key << "bend_stiffness" << YAML::Value << num(c.material.bend_stiffness);
  out << YAML::EndMap;

  const StepConfig& s = c.solver;
  out << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "h" << YAML::Value << num(s.h);
  out << YAML::Key << "eps_initial" << YAML::Value << num(s.eps_initial);
  out << YAML::Key << "eps_inner" << YAML::Value << num(s.eps_inner);
  out << YAML::Key << "eps_outer" << YAML::Value << num(s.eps_outer);
  out << YAML::Key << "convergence_norm" << YAML::Value << (s.norm == ConvergenceNorm::Max ? "max" : "frobenius");
  out << YAML::Key << "eps_toi" << YAML::Value << num(s.eps_toi);
  out << YAML::Key << "alpha" << YAML::Value << num(s.alpha);
  out << YAML::Key << "k" << YAML::Value << num(s.k);
  out << YAML::Key << "K" << YAML::Value << num(s.K);
  out << YAML::Key << "iteration_cap" << YAML::Value << s.iteration_cap;
  out << YAML::Key << "barrier" << YAML::Value << (s.barrier == BarrierMode::NDB ? "ndb" : "dbb");
  out << YAML::Key << "d_hat" << YAML::Value << num(s.d_hat);
  out << YAML::Key << "min_separation" << YAML::Value << num(s.min_separation);
  out << YAML::Key << "gate" << YAML::Value << num(s.gate);
  out << YAML::Key << "broad_slack" << YAML::Value << num(s.broad_slack);
  out << YAML::Key << "smoothing_iterations" << YAML::Value << s.smoothing_iterations;
  out << YAML::Key << "omega" << YAML::Value << num(s.omega);
  out << YAML::Key << "auto_omega" << YAML::Value << s.auto_omega;
  out << YAML::Key << "sample_count" << YAML::Value << s.sample_count;
  out << YAML::Key << "projection_sample" << YAML::Value << s.projection_sample;
  out << YAML::Key << "adaptive_samples" << YAML::Value << s.adaptive_samples;
  out << YAML::Key << "max_outer" << YAML::Value << s.max_outer;
  out << YAML::Key << "max_inner" << YAML::Value << s.max_inner;
  out << YAML::Key << "warm_start_cap" << YAML::Value << s.warm_start_cap;
  out << YAML::Key << "dbb_kappa" << YAML::Value << num(s.dbb_kappa);
  out << YAML::Key << "residual_forwarding" << YAML::Value << s.residual_forwarding;
  out << YAML::Key << "rf_weight" << YAML::Value << num(s.rf_weight);
  out << YAML::Key << "rf_tolerance" << YAML::Value << num(s.rf_tolerance);
  out << YAML::Key << "rf_max_iterations" << YAML::Value << s.rf_max_iterations;
  out << YAML::Key << "rf_accel_cap" << YAML::Value << num(s.rf_accel_cap);
  out << YAML::Key << "verify" << YAML::Value << s.verify;
  out << YAML::EndMap;

  out << YAML::Key << "subspace" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "r_bar" << YAML::Value << c.subspace.r_bar;
  out << YAML::Key << "r" << YAML::Value << c.subspace.r;
  out << YAML::EndMap;

  out << YAML::Key << "pins" << YAML::Value << YAML::BeginSeq;
  for (const auto& p : c.pins) {
    out << YAML::BeginMap;
    out << YAML::Key << "vertices" << YAML::Value << YAML::Flow << p.vertices;
    if (p.use_region) {
      out << YAML::Key << "region" << YAML::Value << YAML::BeginMap;
      out << YAML::Key << "min" << YAML::Value;
      emit(out, p.region_min);
      out << YAML::Key << "max" << YAML::Value;
      emit(out, p.region_max);
      out << YAML::EndMap;
    }
    out << YAML::Key << "motion" << YAML::Value;
    emit_motion(out, p.motion);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "obstacles" << YAML::Value << YAML::BeginSeq;
  for (const auto& o : c.obstacles) {
    out << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << o.name;
    out << YAML::Key << "kind" << YAML::Value << o.kind;
    out << YAML::Key << "center" << YAML::Value;
    emit(out, o.center);
    out << YAML::Key << "radius" << YAML::Value << num(o.radius);
    out << YAML::Key << "subdivisions" << YAML::Value << o.subdivisions;
    out << YAML::Key << "size" << YAML::Value;
    emit(out, o.size);
    out << YAML::Key << "mesh" << YAML::Value;
    emit_mesh(out, o.mesh);
    out << YAML::Key << "motion" << YAML::Value;
    emit_motion(out, o.motion);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "steps" << YAML::Value << c.output.steps;
  out << YAML::Key << "frame_stride" << YAML::Value << c.output.frame_stride;
  out << YAML::Key << "frames_dir" << YAML::Value << c.output.frames_dir;
  out << YAML::Key << "metrics_path" << YAML::Value << c.output.metrics_path;
  out << YAML::Key << "dump_dir" << YAML::Value << c.output.dump_dir;
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

void save_scene_config(const std::string& path, const SceneConfig& config) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write config file: " + path);
  out << serialize_scene_config(config);
}

}  // namespace pdsim
