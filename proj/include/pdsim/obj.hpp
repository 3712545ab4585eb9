#pragma once

#include "pdsim/types.hpp"

#include <iosfwd>
#include <string>

namespace pdsim {

struct ObjMesh {
  Positions vertices;
  std::vector<Tri> triangles;
};

// ASCII OBJ: `v` and `f` records, 1-based (or negative relative) indices.
// Quads split as (0,1,2)/(0,2,3); larger polygons fan from vertex 0.
ObjMesh read_obj(std::istream& in);
ObjMesh load_obj(const std::string& path);

// Fixed-point output with `precision` decimals.
void write_obj(std::ostream& out, const Positions& x, const std::vector<Tri>& triangles, int precision = 9);
void save_obj(const std::string& path, const Positions& x, const std::vector<Tri>& triangles, int precision = 9);

}  // namespace pdsim
