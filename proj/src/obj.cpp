#include "pdsim/obj.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace pdsim {

namespace {

int parse_index(const std::string& token, int vertex_count, int line_no) {
  const std::string head = token.substr(0, token.find('/'));
  int idx = 0;
  try {
    idx = std::stoi(head);
  } catch (const std::exception&) {
    throw Error("obj line " + std::to_string(line_no) + ": bad face index '" + token + "'");
  }
  if (idx < 0) idx = vertex_count + idx + 1;
  if (idx < 1 || idx > vertex_count)
    throw Error("obj line " + std::to_string(line_no) + ": face index out of range");
  return idx - 1;
}

}  // namespace

ObjMesh read_obj(std::istream& in) {
  std::vector<Vec3> verts;
  std::vector<Tri> tris;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z()))
        throw Error("obj line " + std::to_string(line_no) + ": malformed vertex");
      verts.push_back(p);
    } else if (tag == "f") {
      std::vector<int> face;
      std::string tok;
      while (ls >> tok) face.push_back(parse_index(tok, static_cast<int>(verts.size()), line_no));
      if (face.size() < 3) throw Error("obj line " + std::to_string(line_no) + ": face with < 3 vertices");
      for (size_t k = 1; k + 1 < face.size(); ++k) tris.push_back({face[0], face[k], face[k + 1]});
    }
  }
  ObjMesh m;
  m.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
  for (size_t i = 0; i < verts.size(); ++i) m.vertices.row(static_cast<Eigen::Index>(i)) = verts[i].transpose();
  m.triangles = std::move(tris);
  return m;
}

ObjMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open obj file: " + path);
  return read_obj(in);
}

void write_obj(std::ostream& out, const Positions& x, const std::vector<Tri>& triangles, int precision) {
  out << std::fixed << std::setprecision(precision);
  for (Eigen::Index i = 0; i < x.rows(); ++i) out << "v " << x(i, 0) << ' ' << x(i, 1) << ' ' << x(i, 2) << '\n';
  for (const auto& t : triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

void save_obj(const std::string& path, const Positions& x, const std::vector<Tri>& triangles, int precision) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write obj file: " + path);
  write_obj(out, x, triangles, precision);
}

}  // namespace pdsim
