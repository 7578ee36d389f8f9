// SPDX-License-Identifier: Apache-2.0
#include "volsurf/fields/scene.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "volsurf/core/error.hpp"
#include "volsurf/fields/kernels.hpp"

namespace volsurf {
namespace {

using Json = nlohmann::ordered_json;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Json vec_json(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }
Json rgb_json(const Rgb& c) { return Json::array({c.r, c.g, c.b}); }

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw FormatError("scene" + path + ": " + what);
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

double number_at(const Json& j, const std::string& key, const std::string& path) {
  return number(member(j, key, path), path + "." + key);
}

Vec3 vec_at(const Json& j, const std::string& key, const std::string& path) {
  const Json& a = member(j, key, path);
  const std::string p = path + "." + key;
  if (!a.is_array() || a.size() != 3) fail(p, "expected an array of 3 numbers");
  return {number(a[0], p + "[0]"), number(a[1], p + "[1]"), number(a[2], p + "[2]")};
}

Rgb rgb_at(const Json& j, const std::string& key, const std::string& path) {
  const Vec3 v = vec_at(j, key, path);
  return {v.x, v.y, v.z};
}

Json field_json(const SdfField& f);

Json field_json(const sdf::Node& node) {
  return std::visit(
      Overloaded{
          [](const sdf::Sphere& s) {
            return Json{{"type", "sphere"}, {"center", vec_json(s.center)}, {"radius", s.radius}};
          },
          [](const sdf::Box& b) {
            return Json{{"type", "box"},
                        {"center", vec_json(b.center)},
                        {"half_extent", vec_json(b.half_extent)}};
          },
          [](const sdf::Torus& t) {
            return Json{{"type", "torus"},
                        {"center", vec_json(t.center)},
                        {"major_radius", t.major_radius},
                        {"minor_radius", t.minor_radius}};
          },
          [](const sdf::Capsule& c) {
            return Json{
                {"type", "capsule"}, {"a", vec_json(c.a)}, {"b", vec_json(c.b)}, {"radius", c.radius}};
          },
          [](const sdf::Plane& p) {
            return Json{{"type", "plane"}, {"normal", vec_json(p.normal)}, {"offset", p.offset}};
          },
          [](const sdf::Union& u) {
            return Json{{"type", "union"}, {"a", field_json(*u.a)}, {"b", field_json(*u.b)}};
          },
          [](const sdf::Intersection& u) {
            return Json{{"type", "intersection"}, {"a", field_json(*u.a)}, {"b", field_json(*u.b)}};
          },
          [](const sdf::Subtraction& u) {
            return Json{{"type", "subtraction"}, {"a", field_json(*u.a)}, {"b", field_json(*u.b)}};
          },
          [](const sdf::SmoothUnion& u) {
            return Json{{"type", "smooth_union"},
                        {"k", u.k},
                        {"a", field_json(*u.a)},
                        {"b", field_json(*u.b)}};
          },
          [](const sdf::Offset& o) {
            return Json{{"type", "offset"}, {"amount", o.amount}, {"child", field_json(*o.child)}};
          },
          [](const sdf::Scale& s) {
            return Json{{"type", "scale"}, {"factor", s.factor}, {"child", field_json(*s.child)}};
          },
          [](const sdf::Grid& g) {
            return Json{{"type", "grid"},
                        {"bounds", Json{{"min", vec_json(g.bounds.lo)}, {"max", vec_json(g.bounds.hi)}}},
                        {"dims", Json::array({g.nx, g.ny, g.nz})},
                        {"values", g.values}};
          },
      },
      node);
}

Json field_json(const SdfField& f) { return field_json(f.node()); }

SdfField parse_field(const Json& j, const std::string& path) {
  const Json& type_j = member(j, "type", path);
  if (!type_j.is_string()) fail(path + ".type", "expected a string");
  const std::string type = type_j.get<std::string>();
  try {
    if (type == "sphere") return SdfField::sphere(vec_at(j, "center", path), number_at(j, "radius", path));
    if (type == "box") return SdfField::box(vec_at(j, "center", path), vec_at(j, "half_extent", path));
    if (type == "torus") {
      return SdfField::torus(vec_at(j, "center", path), number_at(j, "major_radius", path),
                             number_at(j, "minor_radius", path));
    }
    if (type == "capsule") {
      return SdfField::capsule(vec_at(j, "a", path), vec_at(j, "b", path), number_at(j, "radius", path));
    }
    if (type == "plane") return SdfField::plane(vec_at(j, "normal", path), number_at(j, "offset", path));
    if (type == "union" || type == "intersection" || type == "subtraction" || type == "smooth_union") {
      const SdfField a = parse_field(member(j, "a", path), path + ".a");
      const SdfField b = parse_field(member(j, "b", path), path + ".b");
      if (type == "union") return SdfField::make_union(a, b);
      if (type == "intersection") return SdfField::make_intersection(a, b);
      if (type == "subtraction") return SdfField::make_subtraction(a, b);
      return SdfField::smooth_union(a, b, number_at(j, "k", path));
    }
    if (type == "offset") {
      return SdfField::offset(parse_field(member(j, "child", path), path + ".child"),
                              number_at(j, "amount", path));
    }
    if (type == "scale") {
      return SdfField::scale(parse_field(member(j, "child", path), path + ".child"),
                             number_at(j, "factor", path));
    }
    if (type == "grid") {
      const Json& b = member(j, "bounds", path);
      const Aabb bounds{vec_at(b, "min", path + ".bounds"), vec_at(b, "max", path + ".bounds")};
      const Json& dims = member(j, "dims", path);
      if (!dims.is_array() || dims.size() != 3) fail(path + ".dims", "expected 3 integers");
      const Json& values = member(j, "values", path);
      if (!values.is_array()) fail(path + ".values", "expected an array");
      std::vector<double> v;
      v.reserve(values.size());
      for (std::size_t i = 0; i < values.size(); ++i) {
        v.push_back(number(values[i], path + ".values[" + std::to_string(i) + "]"));
      }
      return SdfField::grid(bounds, dims[0].get<int>(), dims[1].get<int>(), dims[2].get<int>(),
                            std::move(v));
    }
  } catch (const InvalidArgument& e) {
    fail(path, e.what());
  }
  fail(path + ".type", "unknown field type '" + type + "'");
}

Json offset_json(const OffsetField& o) {
  Json j{{"raw", o.raw}, {"sign", o.sign == OffsetSign::inside ? "inside" : "outside"}};
  if (!o.modulation.empty()) {
    j["center"] = vec_json(o.center);
    j["modulation"] = o.modulation;
  }
  return j;
}

OffsetField parse_offset(const Json& j, const std::string& path) {
  OffsetField o;
  o.raw = number_at(j, "raw", path);
  const Json& s = member(j, "sign", path);
  if (s == "inside") {
    o.sign = OffsetSign::inside;
  } else if (s == "outside") {
    o.sign = OffsetSign::outside;
  } else {
    fail(path + ".sign", "expected \"inside\" or \"outside\"");
  }
  if (j.contains("modulation")) {
    o.center = vec_at(j, "center", path);
    const Json& m = j["modulation"];
    if (!m.is_array()) fail(path + ".modulation", "expected an array");
    for (std::size_t i = 0; i < m.size(); ++i) {
      o.modulation.push_back(number(m[i], path + ".modulation[" + std::to_string(i) + "]"));
    }
  }
  return o;
}

Json appearance_json(const LayerAppearance& a) {
  return Json{{"base", rgb_json(a.base)},
              {"stripe", rgb_json(a.stripe)},
              {"stripe_frequency", a.stripe_frequency},
              {"stripe_axis", vec_json(a.stripe_axis)},
              {"rim", rgb_json(a.rim)},
              {"rim_strength", a.rim_strength},
              {"opacity", a.opacity},
              {"attenuate", a.attenuate}};
}

LayerAppearance parse_appearance(const Json& j, const std::string& path) {
  LayerAppearance a;
  a.base = rgb_at(j, "base", path);
  a.stripe = rgb_at(j, "stripe", path);
  a.stripe_frequency = number_at(j, "stripe_frequency", path);
  a.stripe_axis = vec_at(j, "stripe_axis", path);
  a.rim = rgb_at(j, "rim", path);
  a.rim_strength = number_at(j, "rim_strength", path);
  a.opacity = number_at(j, "opacity", path);
  const Json& att = member(j, "attenuate", path);
  if (!att.is_boolean()) fail(path + ".attenuate", "expected a boolean");
  a.attenuate = att.get<bool>();
  return a;
}

std::vector<OffsetField> parse_offsets(const Json& root, const std::string& key) {
  std::vector<OffsetField> out;
  const Json& arr = member(root, key, "");
  if (!arr.is_array()) fail("." + key, "expected an array");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out.push_back(parse_offset(arr[i], "." + key + "[" + std::to_string(i) + "]"));
  }
  return out;
}

}  // namespace

double BetaSchedule::at(double s) const {
  s = std::clamp(s, 0.0, 1.0);
  return beta1 * std::pow(beta3 / beta1, s);
}

std::string scene_to_json(const Scene& scene) {
  Json j;
  j["format"] = "volsurf-scene";
  j["version"] = kSceneFormatVersion;
  j["name"] = scene.name;
  j["bounds"] = Json{{"min", vec_json(scene.bounds.lo)}, {"max", vec_json(scene.bounds.hi)}};
  j["beta"] = scene.ksdf.beta();
  j["background"] = rgb_json(scene.background);
  j["field"] = field_json(scene.ksdf.main());
  j["outer_offsets"] = Json::array();
  for (const auto& o : scene.ksdf.outer_offsets()) j["outer_offsets"].push_back(offset_json(o));
  j["inner_offsets"] = Json::array();
  for (const auto& o : scene.ksdf.inner_offsets()) j["inner_offsets"].push_back(offset_json(o));
  j["appearance"] = Json::array();
  for (const auto& a : scene.appearance.layers()) j["appearance"].push_back(appearance_json(a));
  return j.dump(2) + "\n";
}

Scene scene_from_json(const std::string& text) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw FormatError(std::string("scene: invalid JSON: ") + e.what());
  }
  if (!root.is_object()) fail("", "expected a JSON object");
  const Json& version = member(root, "version", "");
  if (!version.is_number_integer()) fail(".version", "expected an integer");
  if (version.get<int>() != kSceneFormatVersion) {
    throw VersionError("scene.version: unsupported scene version " + std::to_string(version.get<int>()));
  }
  const SdfField main = parse_field(member(root, "field", ""), ".field");
  auto inner = parse_offsets(root, "inner_offsets");
  auto outer = parse_offsets(root, "outer_offsets");
  const double beta = number_at(root, "beta", "");
  const int k = 1 + static_cast<int>(inner.size() + outer.size());
  if (k > kMaxLayers) {
    throw InvalidArgument("k must be in [1,9] (scene defines " + std::to_string(k) + " layers)");
  }
  const Json& app = member(root, "appearance", "");
  if (!app.is_array()) fail(".appearance", "expected an array");
  if (static_cast<int>(app.size()) != k) {
    fail(".appearance", "expected " + std::to_string(k) + " entries, found " + std::to_string(app.size()));
  }
  std::vector<LayerAppearance> layers;
  for (std::size_t i = 0; i < app.size(); ++i) {
    layers.push_back(parse_appearance(app[i], ".appearance[" + std::to_string(i) + "]"));
  }
  const Json& b = member(root, "bounds", "");
  Scene scene{member(root, "name", "").get<std::string>(),
              KSdf(main, std::move(inner), std::move(outer), beta),
              AppearanceField(std::move(layers)),
              Aabb{vec_at(b, "min", ".bounds"), vec_at(b, "max", ".bounds")},
              rgb_at(root, "background", "")};
  if (scene.bounds.empty()) fail(".bounds", "empty bounding box");
  return scene;
}

void write_scene(const std::filesystem::path& path, const Scene& scene) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << scene_to_json(scene);
  if (!os) throw IoError("failed writing " + path.string());
}

Scene read_scene(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open scene file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return scene_from_json(ss.str());
}

std::vector<std::string> canonical_scene_names() {
  return {"fuzzy-sphere", "torus-with-halo", "two-lobe-blob"};
}

namespace {

// Outermost layers are the most transparent; the innermost is opaque.
std::vector<LayerAppearance> layered_palette(int k) {
  static const Rgb palette[] = {{0.95, 0.55, 0.20}, {0.85, 0.30, 0.35}, {0.30, 0.65, 0.90},
                                {0.45, 0.80, 0.40}, {0.90, 0.85, 0.30}, {0.60, 0.40, 0.85},
                                {0.25, 0.80, 0.75}, {0.95, 0.45, 0.65}, {0.35, 0.35, 0.80}};
  std::vector<LayerAppearance> layers(k);
  for (int j = 0; j < k; ++j) {
    LayerAppearance& a = layers[j];
    a.base = palette[j % 9];
    a.stripe = lerp(a.base, {1.0, 1.0, 1.0}, 0.45);
    a.stripe_frequency = 6.0 + 2.0 * j;
    a.stripe_axis = {0.0, 1.0, 0.0};
    a.rim = {1.0, 0.95, 0.85};
    a.rim_strength = 0.35;
    a.opacity = (j + 1 == k) ? 1.0 : 0.35 + 0.3 * j / std::max(1, k - 1);
    a.attenuate = true;
  }
  return layers;
}

Aabb padded_bounds(const Aabb& b, double pad) {
  return {b.lo - Vec3{pad, pad, pad}, b.hi + Vec3{pad, pad, pad}};
}

}  // namespace

Scene make_canonical_scene(const std::string& name, int k, double init_beta, double beta) {
  if (k < 1 || k > kMaxLayers) {
    throw InvalidArgument("k must be in [1,9] (got " + std::to_string(k) + ")");
  }
  if (!(init_beta > 0.0)) throw InvalidArgument("init beta must be positive");
  const double spacing = delta_o_init(init_beta);

  SdfField main = SdfField::sphere({0, 0, 0}, 0.8);
  std::vector<OffsetField> inner, outer;
  if (name == "fuzzy-sphere") {
    for (int i = 1; i < k; ++i) inner.push_back(OffsetField::constant(spacing, OffsetSign::inside));
  } else if (name == "torus-with-halo") {
    main = SdfField::torus({0, 0, 0}, 0.6, 0.28);
    if (k >= 2) {
      OffsetField halo = OffsetField::constant(spacing, OffsetSign::outside);
      halo.center = {0, 0, 0};
      halo.modulation = {0.0, 0.0, 0.6, 0.0};
      outer.push_back(halo);
    }
    for (int i = 2; i < k; ++i) inner.push_back(OffsetField::constant(spacing, OffsetSign::inside));
  } else if (name == "two-lobe-blob") {
    main = SdfField::smooth_union(SdfField::sphere({-0.35, 0, 0}, 0.45),
                                  SdfField::sphere({0.35, 0.05, 0}, 0.42), 0.2);
    for (int i = 1; i < k; ++i) inner.push_back(OffsetField::constant(spacing, OffsetSign::inside));
  } else {
    throw InvalidArgument("unknown scene '" + name + "'");
  }

  double outer_extent = 0.0;
  for (const auto& o : outer) outer_extent += o.max_activated();
  Scene scene{name, KSdf(main, std::move(inner), std::move(outer), beta),
              AppearanceField(layered_palette(k)), padded_bounds(main.bounds(), 0.25 + outer_extent),
              Rgb{1.0, 1.0, 1.0}};
  return scene;
}

}  // namespace volsurf
