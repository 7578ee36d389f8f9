// SPDX-License-Identifier: Apache-2.0
#include "volsurf/assets/bundle.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "volsurf/appearance/bake.hpp"
#include "volsurf/core/error.hpp"
#include "volsurf/core/image.hpp"
#include "volsurf/meshing/mesh_io.hpp"

namespace volsurf {
namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr const char* kFormatTag = "volsurf-bundle";

Json vec_json(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw FormatError("manifest" + path + ": " + what);
}

const Json& member(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(path + "." + key, "missing field");
  return *it;
}

double number(const Json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

int integer(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

std::string text(const Json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

const Json& array_at(const Json& j, const std::string& key, const std::string& path,
                     std::size_t size = 0) {
  const Json& a = member(j, key, path);
  if (!a.is_array()) fail(path + "." + key, "expected an array");
  if (size && a.size() != size) {
    fail(path + "." + key, "expected " + std::to_string(size) + " elements");
  }
  return a;
}

Vec3 vec_at(const Json& j, const std::string& key, const std::string& path) {
  const Json& a = array_at(j, key, path, 3);
  const std::string p = path + "." + key;
  return {number(a[0], p + "[0]"), number(a[1], p + "[1]"), number(a[2], p + "[2]")};
}

Json camera_json(const Camera& c) {
  return Json{{"width", c.width},         {"height", c.height},     {"fx", c.fx},
              {"fy", c.fy},               {"cx", c.cx},             {"cy", c.cy},
              {"position", vec_json(c.position)}, {"right", vec_json(c.right)},
              {"down", vec_json(c.down)}, {"forward", vec_json(c.forward)}};
}

Camera camera_from(const Json& j, const std::string& path) {
  Camera c;
  c.width = integer(member(j, "width", path), path + ".width");
  c.height = integer(member(j, "height", path), path + ".height");
  c.fx = number(member(j, "fx", path), path + ".fx");
  c.fy = number(member(j, "fy", path), path + ".fy");
  c.cx = number(member(j, "cx", path), path + ".cx");
  c.cy = number(member(j, "cy", path), path + ".cy");
  c.position = vec_at(j, "position", path);
  c.right = vec_at(j, "right", path);
  c.down = vec_at(j, "down", path);
  c.forward = vec_at(j, "forward", path);
  if (c.width < 1 || c.height < 1) fail(path, "image size must be positive");
  if (!(c.fx > 0.0) || !(c.fy > 0.0)) fail(path, "focal lengths must be positive");
  return c;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string bundle_mesh_name(int layer) { return "layer" + std::to_string(layer) + ".obj"; }

std::string bundle_texture_name(int layer, int coefficient) {
  return "layer" + std::to_string(layer) + "_coef" + std::to_string(coefficient) + ".png";
}

std::string bundle_manifest(const ShellSet& shells, const ShTextureSet& texset,
                            const BundleMeta& meta) {
  if (shells.k() != texset.k()) {
    throw InvalidArgument("shell count " + std::to_string(shells.k()) +
                          " differs from texture layer count " + std::to_string(texset.k()));
  }
  const int k = shells.k();
  const int n = sh_coefficient_count(texset.degree);
  Json draw = Json::array();
  Json layers = Json::array();
  for (int j = 0; j < k; ++j) {
    draw.push_back(j);
    Json textures = Json::array();
    for (int i = 0; i < n; ++i) textures.push_back(bundle_texture_name(j, i));
    layers.push_back(Json{{"index", j},
                          {"mesh", bundle_mesh_name(j)},
                          {"vertices", shells.shells[j].vertex_count()},
                          {"triangles", shells.shells[j].triangle_count()},
                          {"textures", textures}});
  }
  Json res = Json::array();
  for (int r : texset.layout().band_resolutions) res.push_back(r);

  Json m;
  m["format"] = kFormatTag;
  m["version"] = kBundleFormatVersion;
  m["name"] = meta.name;
  m["k"] = k;
  m["draw_order"] = draw;
  m["layers"] = layers;
  m["sh"] = Json{{"degree", texset.degree},
                 {"basis", "real_sh_bands_l_then_m"},
                 {"band_resolutions", res},
                 {"v_min", texset.v_min},
                 {"v_max", texset.v_max},
                 {"rounding", kRoundingMode},
                 {"sampling", "bilinear_texel_centers_clamp"},
                 {"uv_origin", "first_row"},
                 {"activation", "sigmoid"}};
  m["attenuation"] = Json{{"constant", kAttenuationConstant}, {"formula", kAttenuationFormula}};
  m["background"] = Json::array({meta.background.r, meta.background.g, meta.background.b});
  m["camera"] = meta.camera ? camera_json(*meta.camera) : Json(nullptr);
  return m.dump(2) + "\n";
}

void export_bundle(const fs::path& dir, const ShellSet& shells, const ShTextureSet& texset,
                   const BundleMeta& meta) {
  const std::string manifest = bundle_manifest(shells, texset, meta);
  const std::vector<BakedLayer> baked = bake_textures(texset);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (int j = 0; j < shells.k(); ++j) {
    TriMesh mesh = shells.shells[j];
    mesh.layer_index = j;
    write_obj(dir / bundle_mesh_name(j), mesh);
    for (std::size_t i = 0; i < baked[j].size(); ++i) {
      write_png(dir / bundle_texture_name(j, static_cast<int>(i)), baked[j][i]);
    }
  }
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << manifest;
  if (!out) throw IoError("write failed: " + (dir / "manifest.json").string());
}

Bundle import_bundle(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw FormatError("missing " + manifest_path.string());
  Json m;
  try {
    m = Json::parse(read_text(manifest_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("manifest: invalid JSON: ") + e.what());
  }
  if (text(member(m, "format", ""), ".format") != kFormatTag) {
    fail(".format", "expected \"" + std::string(kFormatTag) + "\"");
  }
  const int version = integer(member(m, "version", ""), ".version");
  if (version != kBundleFormatVersion) {
    throw VersionError("manifest.version: unsupported bundle version " + std::to_string(version) +
                       " (this build reads version " + std::to_string(kBundleFormatVersion) + ")");
  }

  Bundle b;
  b.meta.name = text(member(m, "name", ""), ".name");
  const int k = integer(member(m, "k", ""), ".k");
  if (k < 1 || k > 9) fail(".k", "k must be in [1,9]");

  const Json& sh = member(m, "sh", "");
  const int degree = integer(member(sh, "degree", ".sh"), ".sh.degree");
  if (degree < 0 || degree > kMaxShDegree) fail(".sh.degree", "must be in [0,3]");
  const Json& res = array_at(sh, "band_resolutions", ".sh", static_cast<std::size_t>(degree) + 1);
  std::vector<int> resolutions;
  for (std::size_t i = 0; i < res.size(); ++i) {
    const std::string p = ".sh.band_resolutions[" + std::to_string(i) + "]";
    const int r = integer(res[i], p);
    if (r < 1 || (r & (r - 1)) != 0) fail(p, "must be a power of two");
    if (i > 0 && r > resolutions.back()) {
      fail(p, "band resolutions must not increase with band index (" + std::to_string(r) + " > " +
                  std::to_string(resolutions.back()) + ")");
    }
    resolutions.push_back(r);
  }
  const double v_min = number(member(sh, "v_min", ".sh"), ".sh.v_min");
  const double v_max = number(member(sh, "v_max", ".sh"), ".sh.v_max");
  if (!(v_max > v_min)) fail(".sh", "v_min must be below v_max");
  if (text(member(sh, "rounding", ".sh"), ".sh.rounding") != kRoundingMode) {
    fail(".sh.rounding", "unsupported rounding mode");
  }
  if (text(member(sh, "activation", ".sh"), ".sh.activation") != "sigmoid") {
    fail(".sh.activation", "unsupported activation");
  }

  const Json& att = member(m, "attenuation", "");
  if (number(member(att, "constant", ".attenuation"), ".attenuation.constant") !=
          kAttenuationConstant ||
      text(member(att, "formula", ".attenuation"), ".attenuation.formula") != kAttenuationFormula) {
    fail(".attenuation", "unsupported attenuation");
  }
  const Vec3 bg = vec_at(m, "background", "");
  b.meta.background = {bg.x, bg.y, bg.z};
  const Json& cam = member(m, "camera", "");
  if (!cam.is_null()) b.meta.camera = camera_from(cam, ".camera");

  const Json& draw = array_at(m, "draw_order", "", static_cast<std::size_t>(k));
  std::vector<int> order;
  std::vector<bool> seen(k, false);
  for (int i = 0; i < k; ++i) {
    const std::string p = ".draw_order[" + std::to_string(i) + "]";
    const int d = integer(draw[i], p);
    if (d < 0 || d >= k || seen[d]) fail(p, "draw order must be a permutation of 0..k-1");
    seen[d] = true;
    order.push_back(d);
  }

  const Json& layers = array_at(m, "layers", "", static_cast<std::size_t>(k));
  const int n = sh_coefficient_count(degree);
  std::vector<TriMesh> meshes(k);
  std::vector<BakedLayer> baked(k);
  for (int j = 0; j < k; ++j) {
    const std::string p = ".layers[" + std::to_string(j) + "]";
    const Json& L = layers[j];
    if (integer(member(L, "index", p), p + ".index") != j) fail(p + ".index", "must equal " + std::to_string(j));
    const std::string mesh_name = text(member(L, "mesh", p), p + ".mesh");
    if (!fs::exists(dir / mesh_name)) fail(p + ".mesh", "file not found: " + mesh_name);
    meshes[j] = read_obj(dir / mesh_name);
    meshes[j].validate();
    if (!meshes[j].has_uvs()) fail(p + ".mesh", "mesh has no texture coordinates");
    const Json& tex = array_at(L, "textures", p, static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const std::string tp = p + ".textures[" + std::to_string(i) + "]";
      const std::string name = text(tex[i], tp);
      if (!fs::exists(dir / name)) fail(tp, "file not found: " + name);
      Image8 img = read_png(dir / name);
      const int r = resolutions[sh_band_of(i)];
      if (img.width != r || img.height != r) {
        fail(tp, name + " is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                     ", expected " + std::to_string(r) + "x" + std::to_string(r));
      }
      baked[j].push_back(std::move(img));
    }
  }

  ShTextureSet stored = load_baked_textures(baked, degree, v_min, v_max);
  b.textures = stored;
  for (int i = 0; i < k; ++i) {
    TriMesh mesh = std::move(meshes[order[i]]);
    mesh.layer_index = i;
    b.shells.shells.push_back(std::move(mesh));
    b.textures.layers[i] = stored.layers[order[i]];
  }
  return b;
}

}  // namespace volsurf
