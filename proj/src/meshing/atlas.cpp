// SPDX-License-Identifier: Apache-2.0
#include "volsurf/meshing/atlas.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numbers>
#include <numeric>
#include <unordered_map>

#include "volsurf/core/error.hpp"

namespace volsurf {
namespace {

struct Chart {
  Vec3 axis;
  std::vector<std::uint32_t> faces;
  // Filled by projection.
  std::vector<std::uint32_t> vertices;  // original indices
  std::vector<Vec2> local;              // per entry of `vertices`, origin at the chart's min corner
  double width = 0.0;
  double height = 0.0;
};

std::vector<std::vector<std::uint32_t>> face_neighbours(const TriMesh& mesh) {
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> by_edge;
  by_edge.reserve(mesh.triangles.size() * 2);
  for (std::uint32_t f = 0; f < mesh.triangles.size(); ++f) {
    for (int e = 0; e < 3; ++e) {
      std::uint32_t a = mesh.triangles[f][e], b = mesh.triangles[f][(e + 1) % 3];
      if (a > b) std::swap(a, b);
      by_edge[(static_cast<std::uint64_t>(a) << 32) | b].push_back(f);
    }
  }
  std::vector<std::vector<std::uint32_t>> adj(mesh.triangles.size());
  for (const auto& [key, faces] : by_edge) {
    for (std::uint32_t f : faces) {
      for (std::uint32_t g : faces) {
        if (f != g) adj[f].push_back(g);
      }
    }
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());
  return adj;
}

// Faces are labelled with the closest of the six axis directions; charts are
// the edge-connected components of equal label. Every face keeps a normal
// with positive component along its chart axis, so each chart projects
// without folds.
std::vector<Chart> grow_charts(const TriMesh& mesh, const std::vector<Vec3>& normals,
                               const std::vector<std::vector<std::uint32_t>>& adj) {
  static const Vec3 kAxes[6] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  std::vector<int> label(mesh.triangles.size());
  for (std::size_t f = 0; f < label.size(); ++f) {
    int best = 0;
    for (int a = 1; a < 6; ++a) {
      if (dot(normals[f], kAxes[a]) > dot(normals[f], kAxes[best])) best = a;
    }
    label[f] = best;
  }
  // Smooth jagged label borders: a face joins the label held by at least two
  // of its neighbours when its normal still faces that axis.
  for (int pass = 0; pass < 8; ++pass) {
    bool changed = false;
    for (std::size_t f = 0; f < label.size(); ++f) {
      int votes[6] = {0, 0, 0, 0, 0, 0};
      for (std::uint32_t g : adj[f]) ++votes[label[g]];
      for (int a = 0; a < 6; ++a) {
        if (a != label[f] && votes[a] >= 2 && votes[a] > votes[label[f]] &&
            dot(normals[f], kAxes[a]) > 0.2) {
          label[f] = a;
          changed = true;
          break;
        }
      }
    }
    if (!changed) break;
  }
  std::vector<int> owner(mesh.triangles.size(), -1);
  std::vector<Chart> charts;
  for (std::uint32_t seed = 0; seed < mesh.triangles.size(); ++seed) {
    if (owner[seed] >= 0) continue;
    Chart chart;
    chart.axis = kAxes[label[seed]];
    const int id = static_cast<int>(charts.size());
    std::deque<std::uint32_t> queue{seed};
    owner[seed] = id;
    while (!queue.empty()) {
      const std::uint32_t f = queue.front();
      queue.pop_front();
      chart.faces.push_back(f);
      for (std::uint32_t g : adj[f]) {
        if (owner[g] >= 0 || label[g] != label[seed]) continue;
        owner[g] = id;
        queue.push_back(g);
      }
    }
    std::sort(chart.faces.begin(), chart.faces.end());
    charts.push_back(std::move(chart));
  }
  return charts;
}

// Andrew's monotone chain; counter-clockwise, collinear points dropped.
std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Vec2> h(2 * pts.size());
  std::size_t k = 0;
  for (const Vec2& q : pts) {
    while (k >= 2 && cross2(h[k - 1] - h[k - 2], q - h[k - 2]) <= 0.0) --k;
    h[k++] = q;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross2(h[k - 1] - h[k - 2], pts[i] - h[k - 2]) <= 0.0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

void project_chart(const TriMesh& mesh, Chart& chart) {
  const Vec3 a = chart.axis;
  const Vec3 helper = std::abs(a.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
  const Vec3 t1 = UnitVec3(cross(a, helper)).vec();
  const Vec3 t2 = cross(a, t1);

  for (std::uint32_t f : chart.faces) {
    for (std::uint32_t v : mesh.triangles[f]) chart.vertices.push_back(v);
  }
  std::sort(chart.vertices.begin(), chart.vertices.end());
  chart.vertices.erase(std::unique(chart.vertices.begin(), chart.vertices.end()), chart.vertices.end());

  std::vector<Vec2> p;
  p.reserve(chart.vertices.size());
  Vec2 mean;
  for (std::uint32_t v : chart.vertices) {
    const Vec2 q{dot(mesh.positions[v], t1), dot(mesh.positions[v], t2)};
    p.push_back(q);
    mean = mean + q;
  }
  mean = mean * (1.0 / static_cast<double>(p.size()));

  // Turn the chart so its minimum-area bounding rectangle is axis aligned;
  // that rectangle has a side along some convex hull edge.
  const std::vector<Vec2> hull = convex_hull(p);
  double best_area = std::numeric_limits<double>::infinity(), angle = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vec2 e = hull[(i + 1) % hull.size()] - hull[i];
    if (e.x == 0.0 && e.y == 0.0) continue;
    const double th = std::atan2(e.y, e.x);
    const double c = std::cos(th), s = std::sin(th);
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const Vec2& q : hull) {
      const double u = c * q.x + s * q.y, v = -s * q.x + c * q.y;
      x0 = std::min(x0, u);
      x1 = std::max(x1, u);
      y0 = std::min(y0, v);
      y1 = std::max(y1, v);
    }
    const double area = (x1 - x0) * (y1 - y0);
    if (area < best_area * (1.0 - 1e-12)) {
      best_area = area;
      angle = th;
    }
  }
  const double c = std::cos(angle), s = std::sin(angle);
  Vec2 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  Vec2 hi{-lo.x, -lo.y};
  for (auto& q : p) {
    const Vec2 d = q - mean;
    q = {c * d.x + s * d.y, -s * d.x + c * d.y};
    lo = {std::min(lo.x, q.x), std::min(lo.y, q.y)};
    hi = {std::max(hi.x, q.x), std::max(hi.y, q.y)};
  }
  for (auto& q : p) q = q - lo;
  chart.local = std::move(p);
  chart.width = hi.x - lo.x;
  chart.height = hi.y - lo.y;
}

struct Placement {
  int x = 0;
  int y = 0;
  bool rotated = false;  // chart turned by 90 degrees
};

int texel_extent(double size, double scale) {
  return std::max(1, static_cast<int>(std::ceil(size * scale)));
}

// Skyline bottom-left packing of chart rectangles (content plus gutter on
// every side), largest side first; each chart may be turned by 90 degrees.
bool pack(const std::vector<Chart>& charts, double scale, int resolution, int gutter,
          std::vector<Placement>* out) {
  struct Segment {
    int x, y, w;
  };
  std::vector<std::size_t> order(charts.size());
  std::iota(order.begin(), order.end(), 0);
  auto long_side = [&](std::size_t i) {
    return std::max(texel_extent(charts[i].width, scale), texel_extent(charts[i].height, scale));
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return long_side(a) > long_side(b); });

  std::vector<Segment> sky{{0, 0, resolution}};
  std::vector<Placement> placed(charts.size());
  for (std::size_t i : order) {
    const int cw = texel_extent(charts[i].width, scale) + 2 * gutter;
    const int ch = texel_extent(charts[i].height, scale) + 2 * gutter;
    int best_top = std::numeric_limits<int>::max(), best_x = 0, best_y = 0;
    std::size_t best_seg = 0;
    bool best_rot = false, found = false;
    for (int rot = 0; rot < 2; ++rot) {
      const int w = rot ? ch : cw;
      const int h = rot ? cw : ch;
      for (std::size_t si = 0; si < sky.size(); ++si) {
        const int x = sky[si].x;
        if (x + w > resolution) break;
        int y = 0;
        for (std::size_t sj = si; sj < sky.size() && sky[sj].x < x + w; ++sj) y = std::max(y, sky[sj].y);
        if (y + h > resolution) continue;
        if (y + h < best_top || (y + h == best_top && x < best_x)) {
          best_top = y + h;
          best_x = x;
          best_y = y;
          best_seg = si;
          best_rot = rot == 1;
          found = true;
        }
      }
    }
    if (!found) return false;
    placed[i] = {best_x, best_y, best_rot};
    const int w = best_rot ? ch : cw;
    // Replace the covered span of the skyline by one segment at the new top.
    std::vector<Segment> next(sky.begin(), sky.begin() + static_cast<std::ptrdiff_t>(best_seg));
    next.push_back({best_x, best_top, w});
    for (std::size_t sj = best_seg; sj < sky.size(); ++sj) {
      const int end = sky[sj].x + sky[sj].w;
      if (end <= best_x + w) continue;
      const int start = std::max(sky[sj].x, best_x + w);
      next.push_back({start, sky[sj].y, end - start});
    }
    sky.clear();
    for (const Segment& seg : next) {
      if (!sky.empty() && sky.back().y == seg.y) {
        sky.back().w += seg.w;
      } else {
        sky.push_back(seg);
      }
    }
  }
  if (out) *out = std::move(placed);
  return true;
}

}  // namespace

TriMesh generate_uv_atlas(const TriMesh& mesh, const AtlasConfig& cfg, AtlasReport* report) {
  if (cfg.resolution < 4) throw InvalidArgument("atlas resolution must be at least 4");
  if (cfg.gutter < 1) throw InvalidArgument("atlas gutter must be at least 1 texel");
  if (cfg.max_charts < 1) throw InvalidArgument("max_charts must be positive");
  mesh.validate();
  if (mesh.triangles.empty()) throw EmptyMeshError("cannot atlas an empty mesh");

  AtlasReport rep;
  std::vector<Vec3> normals(mesh.triangles.size());
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    const Vec3 c = mesh.face_cross(f);
    const double len = length(c);
    if (!(len > 0.0)) throw InvalidArgument("mesh has a zero-area triangle; clean it first");
    normals[f] = c / len;
  }
  const auto adj = face_neighbours(mesh);

  auto charts = grow_charts(mesh, normals, adj);
  if (static_cast<int>(charts.size()) > cfg.max_charts) {
    rep.warnings.push_back("chart count " + std::to_string(charts.size()) + " exceeds max_charts " +
                           std::to_string(cfg.max_charts));
  }
  for (auto& c : charts) project_chart(mesh, c);

  double max_dim = 0.0;
  for (const auto& c : charts) max_dim = std::max({max_dim, c.width, c.height});
  const int R = cfg.resolution;
  const int g = cfg.gutter;
  double scale = 0.0;
  if (cfg.texels_per_unit > 0.0 && pack(charts, cfg.texels_per_unit, R, g, nullptr)) {
    scale = cfg.texels_per_unit;
  } else {
    double lo = 0.0;
    double hi = max_dim > 0.0 ? (R - 2.0 * g) / max_dim : 1.0;
    if (!pack(charts, 1e-12, R, g, nullptr)) {
      throw InvalidArgument("atlas of " + std::to_string(R) + " texels cannot hold " +
                            std::to_string(charts.size()) + " charts with gutter " + std::to_string(g));
    }
    if (pack(charts, hi, R, g, nullptr)) {
      lo = hi;
    } else {
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (pack(charts, mid, R, g, nullptr) ? lo : hi) = mid;
      }
    }
    scale = lo > 0.0 ? lo : 1e-12;
    if (cfg.texels_per_unit > 0.0) {
      rep.warnings.push_back("atlas overflow: charts scaled by " + std::to_string(scale / cfg.texels_per_unit));
    }
  }
  std::vector<Placement> placement;
  pack(charts, scale, R, g, &placement);

  TriMesh out;
  out.layer_index = mesh.layer_index;
  out.triangles.resize(mesh.triangles.size());
  for (std::size_t ci = 0; ci < charts.size(); ++ci) {
    const Chart& c = charts[ci];
    std::unordered_map<std::uint32_t, std::uint32_t> local_index;
    for (std::size_t i = 0; i < c.vertices.size(); ++i) {
      const std::uint32_t v = c.vertices[i];
      local_index[v] = static_cast<std::uint32_t>(out.positions.size());
      out.positions.push_back(mesh.positions[v]);
      if (mesh.has_normals()) out.normals.push_back(mesh.normals[v]);
      const Placement& pl = placement[ci];
      // A turned chart maps local (x, y) to (y, width - x).
      const double lx = pl.rotated ? c.local[i].y : c.local[i].x;
      const double ly = pl.rotated ? c.width - c.local[i].x : c.local[i].y;
      out.uvs.push_back({(pl.x + g + lx * scale) / R, (pl.y + g + ly * scale) / R});
    }
    for (std::uint32_t f : c.faces) {
      for (int k = 0; k < 3; ++k) out.triangles[f][k] = local_index.at(mesh.triangles[f][k]);
    }
  }

  rep.charts = static_cast<int>(charts.size());
  rep.texels_per_unit = scale;
  if (report) *report = std::move(rep);
  return out;
}

std::vector<int> uv_chart_ids(const TriMesh& mesh) {
  std::vector<int> parent(mesh.positions.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& t : mesh.triangles) {
    const int a = find(static_cast<int>(t[0]));
    for (int k = 1; k < 3; ++k) {
      const int b = find(static_cast<int>(t[k]));
      if (a != b) parent[b] = a;
    }
  }
  std::map<int, int> ids;
  std::vector<int> out(mesh.triangles.size());
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    const int root = find(static_cast<int>(mesh.triangles[f][0]));
    auto it = ids.try_emplace(root, static_cast<int>(ids.size())).first;
    out[f] = it->second;
  }
  return out;
}

}  // namespace volsurf
