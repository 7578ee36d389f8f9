// SPDX-License-Identifier: Apache-2.0
#include "volsurf/meshing/mesh_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "volsurf/core/error.hpp"

namespace volsurf {
namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

double parse_double(std::string_view s, int line) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw FormatError("obj line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

long parse_index(std::string_view s, std::size_t count, int line) {
  if (s.empty()) return -1;
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || v == 0) {
    throw FormatError("obj line " + std::to_string(line) + ": bad index '" + std::string(s) + "'");
  }
  const long idx = v > 0 ? v - 1 : static_cast<long>(count) + v;
  if (idx < 0 || idx >= static_cast<long>(count)) {
    throw FormatError("obj line " + std::to_string(line) + ": index out of range");
  }
  return idx;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Stored normals are already unit length; keep their exact bits.
UnitVec3 to_unit(const Vec3& n) {
  const double len = length(n);
  if (std::abs(len - 1.0) < 1e-12) return UnitVec3::assume_normalized(n);
  return len > 0.0 ? UnitVec3(n) : UnitVec3();
}

template <class T>
void put_le(std::string& out, T v) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T get_le(const std::string& data, std::size_t& pos) {
  if (pos + sizeof(T) > data.size()) throw FormatError("ply: truncated binary data");
  T v;
  std::memcpy(&v, data.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string obj_to_string(const TriMesh& mesh) {
  mesh.validate();
  std::string out;
  out.reserve(mesh.positions.size() * 96 + mesh.triangles.size() * 40);
  out += "# layer_index " + std::to_string(mesh.layer_index) + "\n";
  auto line3 = [&](const char* tag, double a, double b, double c) {
    out += tag;
    for (double v : {a, b, c}) {
      out += ' ';
      append_double(out, v);
    }
    out += '\n';
  };
  for (const auto& p : mesh.positions) line3("v", p.x, p.y, p.z);
  for (const auto& t : mesh.uvs) {
    out += "vt ";
    append_double(out, t.x);
    out += ' ';
    append_double(out, t.y);
    out += '\n';
  }
  for (const auto& n : mesh.normals) line3("vn", n.x(), n.y(), n.z());
  for (const auto& f : mesh.triangles) {
    out += 'f';
    for (std::uint32_t i : f) {
      const std::string s = std::to_string(i + 1);
      out += ' ';
      out += s;
      if (mesh.has_uvs() || mesh.has_normals()) {
        out += '/';
        if (mesh.has_uvs()) out += s;
        if (mesh.has_normals()) out += "/" + s;
      }
    }
    out += '\n';
  }
  return out;
}

TriMesh obj_from_string(const std::string& text) {
  std::vector<Vec3> v, vn;
  std::vector<Vec2> vt;
  using Corner = std::tuple<long, long, long>;
  std::vector<std::array<Corner, 3>> faces;
  int layer_index = 0;

  std::istringstream is(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    const auto tok = split_ws(raw);
    if (tok.empty()) continue;
    if (tok[0] == "#") {
      if (tok.size() == 3 && tok[1] == "layer_index") layer_index = static_cast<int>(parse_double(tok[2], line_no));
      continue;
    }
    if (tok[0] == "v" || tok[0] == "vn") {
      if (tok.size() < 4) throw FormatError("obj line " + std::to_string(line_no) + ": expected 3 numbers");
      const Vec3 p{parse_double(tok[1], line_no), parse_double(tok[2], line_no), parse_double(tok[3], line_no)};
      (tok[0] == "v" ? v : vn).push_back(p);
    } else if (tok[0] == "vt") {
      if (tok.size() < 3) throw FormatError("obj line " + std::to_string(line_no) + ": expected 2 numbers");
      vt.push_back({parse_double(tok[1], line_no), parse_double(tok[2], line_no)});
    } else if (tok[0] == "f") {
      if (tok.size() < 4) throw FormatError("obj line " + std::to_string(line_no) + ": face needs 3 corners");
      std::vector<Corner> corners;
      for (std::size_t i = 1; i < tok.size(); ++i) {
        const std::string_view c = tok[i];
        const auto s1 = c.find('/');
        const std::string_view a = c.substr(0, s1);
        std::string_view b, n;
        if (s1 != std::string_view::npos) {
          const auto rest = c.substr(s1 + 1);
          const auto s2 = rest.find('/');
          b = rest.substr(0, s2);
          if (s2 != std::string_view::npos) n = rest.substr(s2 + 1);
        }
        const long vi = parse_index(a, v.size(), line_no);
        if (vi < 0) throw FormatError("obj line " + std::to_string(line_no) + ": missing vertex index");
        corners.emplace_back(vi, parse_index(b, vt.size(), line_no), parse_index(n, vn.size(), line_no));
      }
      for (std::size_t i = 1; i + 1 < corners.size(); ++i) faces.push_back({corners[0], corners[i], corners[i + 1]});
    }
  }

  TriMesh mesh;
  mesh.layer_index = layer_index;
  if (faces.empty()) {
    mesh.positions = std::move(v);
    return mesh;
  }
  const bool has_t = std::get<1>(faces[0][0]) >= 0;
  const bool has_n = std::get<2>(faces[0][0]) >= 0;
  bool aligned = (!has_t || vt.size() == v.size()) && (!has_n || vn.size() == v.size());
  for (const auto& f : faces) {
    for (const auto& c : f) {
      if ((std::get<1>(c) >= 0) != has_t || (std::get<2>(c) >= 0) != has_n) {
        throw FormatError("obj: faces mix corners with and without uv/normal indices");
      }
      if ((has_t && std::get<1>(c) != std::get<0>(c)) || (has_n && std::get<2>(c) != std::get<0>(c))) {
        aligned = false;
      }
    }
  }

  if (aligned) {
    // One index per corner, as written by obj_to_string: keep the file's vertex order.
    mesh.positions = std::move(v);
    if (has_t) mesh.uvs = std::move(vt);
    if (has_n) {
      for (const auto& n : vn) mesh.normals.push_back(to_unit(n));
    }
    for (const auto& f : faces) {
      mesh.triangles.push_back({static_cast<std::uint32_t>(std::get<0>(f[0])),
                                static_cast<std::uint32_t>(std::get<0>(f[1])),
                                static_cast<std::uint32_t>(std::get<0>(f[2]))});
    }
    return mesh;
  }

  std::map<Corner, std::uint32_t> index;
  for (const auto& f : faces) {
    Triangle t{};
    for (int k = 0; k < 3; ++k) {
      const auto& c = f[k];
      auto [it, inserted] = index.try_emplace(c, static_cast<std::uint32_t>(mesh.positions.size()));
      if (inserted) {
        mesh.positions.push_back(v[std::get<0>(c)]);
        if (has_t) mesh.uvs.push_back(vt[std::get<1>(c)]);
        if (has_n) mesh.normals.push_back(to_unit(vn[std::get<2>(c)]));
      }
      t[k] = it->second;
    }
    mesh.triangles.push_back(t);
  }
  return mesh;
}

void write_obj(const std::filesystem::path& path, const TriMesh& mesh) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << obj_to_string(mesh);
  if (!os) throw IoError("failed writing " + path.string());
}

TriMesh read_obj(const std::filesystem::path& path) { return obj_from_string(read_file(path)); }

void write_ply(const std::filesystem::path& path, const TriMesh& mesh) {
  mesh.validate();
  std::string out = "ply\nformat binary_little_endian 1.0\n";
  out += "comment layer_index " + std::to_string(mesh.layer_index) + "\n";
  out += "element vertex " + std::to_string(mesh.positions.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\n";
  if (mesh.has_normals()) out += "property double nx\nproperty double ny\nproperty double nz\n";
  if (mesh.has_uvs()) out += "property double u\nproperty double v\n";
  out += "element face " + std::to_string(mesh.triangles.size()) + "\n";
  out += "property list uchar uint vertex_indices\nend_header\n";
  for (std::size_t i = 0; i < mesh.positions.size(); ++i) {
    for (int a = 0; a < 3; ++a) put_le(out, mesh.positions[i][a]);
    if (mesh.has_normals()) {
      for (int a = 0; a < 3; ++a) put_le(out, mesh.normals[i].vec()[a]);
    }
    if (mesh.has_uvs()) {
      put_le(out, mesh.uvs[i].x);
      put_le(out, mesh.uvs[i].y);
    }
  }
  for (const auto& f : mesh.triangles) {
    put_le(out, std::uint8_t{3});
    for (std::uint32_t i : f) put_le(out, i);
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

TriMesh read_ply(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  const auto header_end = data.find("end_header\n");
  if (data.rfind("ply\n", 0) != 0 || header_end == std::string::npos) {
    throw FormatError("ply: missing header in " + path.string());
  }
  std::istringstream header(data.substr(0, header_end));
  std::string line;
  TriMesh mesh;
  std::size_t vertex_count = 0, face_count = 0;
  std::vector<std::pair<std::string, std::string>> vprops;  // (type, name)
  std::string list_count_type, list_index_type;
  std::string element;
  while (std::getline(header, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "binary_little_endian") throw FormatError("ply: only binary_little_endian is supported");
    } else if (word == "comment") {
      std::string key;
      int value = 0;
      if (ls >> key >> value && key == "layer_index") mesh.layer_index = value;
    } else if (word == "element") {
      std::size_t count = 0;
      ls >> element >> count;
      if (element == "vertex") vertex_count = count;
      else if (element == "face") face_count = count;
      else throw FormatError("ply: unsupported element '" + element + "'");
    } else if (word == "property") {
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string name;
        ls >> list_count_type >> list_index_type >> name;
      } else {
        std::string name;
        ls >> name;
        if (element != "vertex") throw FormatError("ply: unexpected face property '" + name + "'");
        vprops.emplace_back(type, name);
      }
    }
  }

  std::size_t pos = header_end + std::strlen("end_header\n");
  auto has = [&](const char* n) {
    return std::any_of(vprops.begin(), vprops.end(), [&](const auto& p) { return p.second == n; });
  };
  const bool normals = has("nx") && has("ny") && has("nz");
  const bool uvs = (has("u") && has("v")) || (has("s") && has("t"));
  mesh.positions.resize(vertex_count);
  if (normals) mesh.normals.resize(vertex_count);
  if (uvs) mesh.uvs.resize(vertex_count);
  for (std::size_t i = 0; i < vertex_count; ++i) {
    Vec3 p, n;
    Vec2 t;
    for (const auto& [type, name] : vprops) {
      double value = 0.0;
      if (type == "double" || type == "float64") value = get_le<double>(data, pos);
      else if (type == "float" || type == "float32") value = get_le<float>(data, pos);
      else throw FormatError("ply: unsupported vertex property type '" + type + "'");
      if (name == "x") p.x = value;
      else if (name == "y") p.y = value;
      else if (name == "z") p.z = value;
      else if (name == "nx") n.x = value;
      else if (name == "ny") n.y = value;
      else if (name == "nz") n.z = value;
      else if (name == "u" || name == "s") t.x = value;
      else if (name == "v" || name == "t") t.y = value;
    }
    mesh.positions[i] = p;
    if (normals) mesh.normals[i] = to_unit(n);
    if (uvs) mesh.uvs[i] = t;
  }
  for (std::size_t f = 0; f < face_count; ++f) {
    std::size_t count = 0;
    if (list_count_type == "uchar" || list_count_type == "uint8") count = get_le<std::uint8_t>(data, pos);
    else if (list_count_type == "int" || list_count_type == "uint") count = get_le<std::uint32_t>(data, pos);
    else throw FormatError("ply: unsupported list count type '" + list_count_type + "'");
    std::vector<std::uint32_t> idx(count);
    for (auto& i : idx) {
      if (list_index_type == "int" || list_index_type == "uint" || list_index_type == "int32" ||
          list_index_type == "uint32") {
        i = get_le<std::uint32_t>(data, pos);
      } else {
        throw FormatError("ply: unsupported index type '" + list_index_type + "'");
      }
    }
    for (std::size_t k = 1; k + 1 < count; ++k) mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
  }
  mesh.validate();
  return mesh;
}

}  // namespace volsurf
