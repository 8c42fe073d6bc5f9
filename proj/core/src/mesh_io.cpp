// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <string_view>

#include "tsegformer/error.hpp"
#include "tsegformer/io_util.hpp"
#include "tsegformer/mesh.hpp"

namespace tseg {
namespace {

class LineReader {
 public:
  explicit LineReader(const std::string& text) : text_(text) {}

  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    std::size_t end = text_.find('\n', pos_);
    if (end == std::string::npos) end = text_.size();
    line = std::string_view(text_).substr(pos_, end - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = end + 1;
    ++line_no_;
    return true;
  }

  std::size_t line_no() const { return line_no_; }

 private:
  const std::string& text_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

[[noreturn]] void parse_fail(const std::string& origin, std::size_t line, const std::string& what) {
  throw Error(ErrorCode::parse, origin + ":" + std::to_string(line) + ": " + what);
}

template <typename T>
bool parse_number(std::string_view token, T& out) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size();
}

double need_double(std::string_view token, const std::string& origin, std::size_t line) {
  double v = 0.0;
  if (!parse_number(token, v)) parse_fail(origin, line, "invalid number '" + std::string(token) + "'");
  return v;
}

void push_polygon(std::vector<Face>& faces, const std::vector<std::int32_t>& poly) {
  // Fan triangulation; triangles pass through unchanged.
  for (std::size_t k = 1; k + 1 < poly.size(); ++k) faces.push_back({poly[0], poly[k], poly[k + 1]});
}

TriMesh parse_obj(const std::string& text, const std::string& origin) {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  LineReader reader(text);
  std::string_view line;
  while (reader.next(line)) {
    auto tok = split(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    if (tok[0] == "v") {
      if (tok.size() < 4) parse_fail(origin, reader.line_no(), "vertex record needs 3 coordinates");
      vertices.emplace_back(need_double(tok[1], origin, reader.line_no()),
                            need_double(tok[2], origin, reader.line_no()),
                            need_double(tok[3], origin, reader.line_no()));
    } else if (tok[0] == "f") {
      if (tok.size() < 4) parse_fail(origin, reader.line_no(), "face record needs at least 3 vertices");
      std::vector<std::int32_t> poly;
      for (std::size_t k = 1; k < tok.size(); ++k) {
        std::string_view ref = tok[k].substr(0, tok[k].find('/'));
        std::int64_t idx = 0;
        if (!parse_number(ref, idx) || idx == 0) {
          parse_fail(origin, reader.line_no(), "invalid face vertex reference '" + std::string(tok[k]) + "'");
        }
        // Negative indices are relative to the vertices read so far.
        idx = idx > 0 ? idx - 1 : static_cast<std::int64_t>(vertices.size()) + idx;
        if (idx < 0 || idx > std::numeric_limits<std::int32_t>::max()) {
          parse_fail(origin, reader.line_no(), "face vertex reference out of range '" + std::string(tok[k]) + "'");
        }
        poly.push_back(static_cast<std::int32_t>(idx));
      }
      push_polygon(faces, poly);
    }
    // vn, vt, o, g, usemtl, mtllib, s: not needed.
  }
  return make_mesh(std::move(vertices), std::move(faces));
}

TriMesh parse_ply(const std::string& text, const std::string& origin) {
  LineReader reader(text);
  std::string_view line;
  if (!reader.next(line) || split(line) != std::vector<std::string_view>{"ply"}) {
    parse_fail(origin, 1, "missing 'ply' magic");
  }
  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> properties;  // scalar names; list properties are "list:<name>"
  };
  std::vector<Element> elements;
  bool ascii = false;
  bool header_done = false;
  while (reader.next(line)) {
    auto tok = split(line);
    if (tok.empty()) continue;
    if (tok[0] == "format") {
      if (tok.size() < 2 || tok[1] != "ascii") {
        parse_fail(origin, reader.line_no(), "only ASCII PLY is supported");
      }
      ascii = true;
    } else if (tok[0] == "comment" || tok[0] == "obj_info") {
      continue;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) parse_fail(origin, reader.line_no(), "malformed element declaration");
      Element e;
      e.name = std::string(tok[1]);
      if (!parse_number(tok[2], e.count)) parse_fail(origin, reader.line_no(), "invalid element count");
      elements.push_back(std::move(e));
    } else if (tok[0] == "property") {
      if (elements.empty()) parse_fail(origin, reader.line_no(), "property before element");
      if (tok.size() == 5 && tok[1] == "list") {
        elements.back().properties.push_back("list:" + std::string(tok[4]));
      } else if (tok.size() == 3) {
        elements.back().properties.emplace_back(tok[2]);
      } else {
        parse_fail(origin, reader.line_no(), "malformed property declaration");
      }
    } else if (tok[0] == "end_header") {
      header_done = true;
      break;
    } else {
      parse_fail(origin, reader.line_no(), "unexpected header line '" + std::string(line) + "'");
    }
  }
  if (!header_done) parse_fail(origin, reader.line_no(), "missing end_header");
  if (!ascii) parse_fail(origin, reader.line_no(), "missing format line");

  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  for (const Element& e : elements) {
    const bool is_vertex = e.name == "vertex";
    const bool is_face = e.name == "face";
    std::array<int, 3> xyz{-1, -1, -1};
    int list_slot = -1;
    for (std::size_t p = 0; p < e.properties.size(); ++p) {
      const std::string& name = e.properties[p];
      if (is_vertex && name == "x") xyz[0] = static_cast<int>(p);
      if (is_vertex && name == "y") xyz[1] = static_cast<int>(p);
      if (is_vertex && name == "z") xyz[2] = static_cast<int>(p);
      if (is_face && (name == "list:vertex_indices" || name == "list:vertex_index")) list_slot = static_cast<int>(p);
    }
    if (is_vertex && std::ranges::any_of(xyz, [](int s) { return s < 0; })) {
      parse_fail(origin, reader.line_no(), "vertex element lacks x/y/z properties");
    }
    if (is_face && list_slot < 0) parse_fail(origin, reader.line_no(), "face element lacks vertex_indices list");

    for (std::size_t r = 0; r < e.count; ++r) {
      if (!reader.next(line)) parse_fail(origin, reader.line_no(), "unexpected end of file in element '" + e.name + "'");
      auto tok = split(line);
      if (is_vertex) {
        if (tok.size() < e.properties.size()) parse_fail(origin, reader.line_no(), "too few vertex properties");
        vertices.emplace_back(need_double(tok[xyz[0]], origin, reader.line_no()),
                              need_double(tok[xyz[1]], origin, reader.line_no()),
                              need_double(tok[xyz[2]], origin, reader.line_no()));
      } else if (is_face) {
        // Walk properties in order: scalars take one token, lists take 1 + n.
        std::size_t t = 0;
        std::vector<std::int32_t> poly;
        for (std::size_t p = 0; p < e.properties.size(); ++p) {
          if (t >= tok.size()) parse_fail(origin, reader.line_no(), "too few face properties");
          if (e.properties[p].rfind("list:", 0) == 0) {
            std::size_t n = 0;
            if (!parse_number(tok[t], n)) parse_fail(origin, reader.line_no(), "invalid list length");
            if (t + 1 + n > tok.size()) parse_fail(origin, reader.line_no(), "face list shorter than declared");
            if (static_cast<int>(p) == list_slot) {
              for (std::size_t k = 0; k < n; ++k) {
                std::int32_t idx = 0;
                if (!parse_number(tok[t + 1 + k], idx)) parse_fail(origin, reader.line_no(), "invalid vertex index");
                poly.push_back(idx);
              }
            }
            t += 1 + n;
          } else {
            t += 1;
          }
        }
        if (poly.size() < 3) parse_fail(origin, reader.line_no(), "face with fewer than 3 vertices");
        push_polygon(faces, poly);
      }
    }
  }
  return make_mesh(std::move(vertices), std::move(faces));
}

TriMesh parse_stl(const std::string& text, const std::string& origin) {
  LineReader reader(text);
  std::string_view line;
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  // STL stores triangle soup; identical coordinates are welded so that the
  // face adjacency is recoverable.
  std::map<std::array<double, 3>, std::int32_t> index_of;
  std::vector<std::int32_t> loop;
  bool saw_solid = false;
  while (reader.next(line)) {
    auto tok = split(line);
    if (tok.empty()) continue;
    if (tok[0] == "solid") {
      saw_solid = true;
    } else if (tok[0] == "outer") {
      loop.clear();
    } else if (tok[0] == "vertex") {
      if (tok.size() != 4) parse_fail(origin, reader.line_no(), "vertex record needs 3 coordinates");
      std::array<double, 3> p{need_double(tok[1], origin, reader.line_no()),
                              need_double(tok[2], origin, reader.line_no()),
                              need_double(tok[3], origin, reader.line_no())};
      auto [it, inserted] = index_of.try_emplace(p, static_cast<std::int32_t>(vertices.size()));
      if (inserted) vertices.emplace_back(p[0], p[1], p[2]);
      loop.push_back(it->second);
    } else if (tok[0] == "endloop") {
      if (loop.size() != 3) parse_fail(origin, reader.line_no(), "facet loop must have exactly 3 vertices");
      faces.push_back({loop[0], loop[1], loop[2]});
    } else if (tok[0] == "facet" || tok[0] == "endfacet" || tok[0] == "endsolid") {
      continue;
    } else {
      parse_fail(origin, reader.line_no(), "unexpected STL record '" + std::string(tok[0]) + "'");
    }
  }
  if (!saw_solid) parse_fail(origin, 1, "missing 'solid' header (binary STL is not supported)");
  return make_mesh(std::move(vertices), std::move(faces));
}

}  // namespace

MeshFormat mesh_format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::ranges::transform(ext, ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".obj") return MeshFormat::obj;
  if (ext == ".ply") return MeshFormat::ply;
  if (ext == ".stl") return MeshFormat::stl;
  throw Error(ErrorCode::invalid_argument, "unsupported mesh extension '" + ext + "' (expected .obj, .ply or .stl)");
}

TriMesh parse_mesh(const std::string& text, MeshFormat format, const std::string& origin) {
  try {
    switch (format) {
      case MeshFormat::obj: return parse_obj(text, origin);
      case MeshFormat::ply: return parse_ply(text, origin);
      case MeshFormat::stl: return parse_stl(text, origin);
    }
  } catch (const Error& e) {
    // make_mesh does not know where the data came from.
    if (e.code() != ErrorCode::validation) throw;
    throw Error(ErrorCode::validation, origin + ": " + e.what());
  }
  throw Error(ErrorCode::invalid_argument, "unknown mesh format");
}

TriMesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
  return parse_mesh(read_text_file(path), format, path.string());
}

TriMesh load_mesh(const std::filesystem::path& path) {
  return load_mesh(path, mesh_format_from_path(path));
}

std::string format_obj(const TriMesh& mesh) {
  std::string out;
  out.reserve(mesh.vertices.size() * 40 + mesh.faces.size() * 24);
  char buf[128];
  for (const Vec3& v : mesh.vertices) {
    int n = std::snprintf(buf, sizeof buf, "v %.6f %.6f %.6f\n", v.x(), v.y(), v.z());
    out.append(buf, static_cast<std::size_t>(n));
  }
  for (const Face& f : mesh.faces) {
    int n = std::snprintf(buf, sizeof buf, "f %d %d %d\n", f[0] + 1, f[1] + 1, f[2] + 1);
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

void save_mesh(const TriMesh& mesh, const std::filesystem::path& path) {
  atomic_write(path, format_obj(mesh));
}

}  // namespace tseg
