#pragma once

#include "pdsim/scenes.hpp"

namespace pdsim {

// Parse or validation failure; line and column are 1-based, 0 when unknown.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& source, int line, int column, const std::string& what);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

// YAML scene description. Unknown keys are errors; missing keys keep their
// defaults. Paths are stored as written.
SceneConfig parse_scene_config(const std::string& text, const std::string& source = "<config>");

// Reads a file, resolves relative mesh paths against its directory and
// checks that they exist.
SceneConfig load_scene_config(const std::string& path);

// Every field, full double precision. parse(serialize(c)) == c.
std::string serialize_scene_config(const SceneConfig& config);

void save_scene_config(const std::string& path, const SceneConfig& config);

}  // namespace pdsim
