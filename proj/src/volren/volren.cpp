// SPDX-License-Identifier: Apache-2.0
#include "volsurf/volren/volren.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "volsurf/core/error.hpp"
#include "volsurf/core/parallel.hpp"
#include "volsurf/fields/kernels.hpp"
#include "volsurf/shellrender/blend.hpp"

namespace volsurf {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Maps an arc length u in [0, total] over the union of intervals to a ray t.
class IntervalMap {
 public:
  explicit IntervalMap(const std::vector<std::array<double, 2>>& intervals) : iv_(intervals) {
    cum_.reserve(iv_.size() + 1);
    cum_.push_back(0.0);
    for (const auto& i : iv_) cum_.push_back(cum_.back() + (i[1] - i[0]));
  }
  double total() const { return cum_.back(); }
  double operator()(double u) const {
    if (u >= total()) return iv_.back()[1];
    auto it = std::upper_bound(cum_.begin() + 1, cum_.end(), u);
    const std::size_t k = static_cast<std::size_t>(it - cum_.begin()) - 1;
    return std::min(iv_[k][0] + (u - cum_[k]), iv_[k][1]);
  }

 private:
  const std::vector<std::array<double, 2>>& iv_;
  std::vector<double> cum_;
};

void eval_distances(const KSdf& k, const std::vector<Vec3>& x, std::size_t begin,
                    std::vector<double>& d) {
  const std::size_t layers = static_cast<std::size_t>(k.k());
  d.resize(x.size() * layers);
  for (std::size_t i = begin; i < x.size(); ++i) {
    k.layer_distances(x[i], std::span<double>(d.data() + i * layers, layers));
  }
}

}  // namespace

SampleSet sample_uniform(const Ray& ray, const OccupancyGrid& grid, int n,
                         std::optional<std::uint64_t> jitter_seed) {
  if (n < 2) throw InvalidArgument("n must be at least 2");
  SampleSet out;
  const auto intervals = occupied_intervals(ray, grid);
  if (intervals.empty()) return out;
  const IntervalMap map(intervals);
  const double total = map.total();
  if (!(total > 0.0)) return out;

  std::mt19937_64 rng(jitter_seed ? splitmix64(*jitter_seed) : 0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  out.t.reserve(n);
  for (int s = 0; s < n; ++s) {
    const double u = jitter_seed ? (s + uniform(rng)) / n * total
                                 : static_cast<double>(s) / (n - 1) * total;
    const double t = map(u);
    if (!out.t.empty() && !(t > out.t.back())) continue;
    out.t.push_back(t);
  }
  out.x.reserve(out.t.size());
  for (double t : out.t) out.x.push_back(ray.at(t));
  out.uniform_count = static_cast<int>(out.t.size());
  return out;
}

void surface_weights_layer(std::span<const double> d, double beta, std::span<double> w) {
  const std::size_t n = d.size();
  if (w.size() < n) throw InvalidArgument("weight buffer too small");
  double transmittance = 1.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double ratio = std::exp(log_sigmoid(beta * d[i + 1]) - log_sigmoid(beta * d[i]));
    const double a = std::clamp(1.0 - ratio, 0.0, 1.0);
    w[i] = a * transmittance;
    transmittance *= 1.0 - a;
  }
  if (n > 0) w[n - 1] = 0.0;
}

std::vector<double> surface_weights(std::span<const double> layer_d, int k, double beta) {
  if (k < 1) throw InvalidArgument("k must be in [1,9]");
  const std::size_t layers = static_cast<std::size_t>(k);
  const std::size_t n = layer_d.size() / layers;
  std::vector<double> out(n * layers, 0.0);
  std::vector<double> d(n), w(n);
  for (std::size_t j = 0; j < layers; ++j) {
    for (std::size_t i = 0; i < n; ++i) d[i] = layer_d[i * layers + j];
    surface_weights_layer(d, beta, w);
    for (std::size_t i = 0; i < n; ++i) out[i * layers + j] = w[i];
  }
  return out;
}

int importance_round(const Ray& ray, const KSdf& k, SampleSet& cur, std::vector<double>& d, int count,
                     double beta, double stratum_offset) {
  if (count < 0) throw InvalidArgument("sample count must be non-negative");
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  if (!(stratum_offset >= 0.0 && stratum_offset < 1.0)) {
    throw InvalidArgument("stratum offset must lie in [0,1)");
  }
  const std::size_t layers = static_cast<std::size_t>(k.k());
  const std::size_t n = cur.size();
  if (d.size() != n * layers) throw InvalidArgument("layer distance count does not match the samples");
  if (n < 2 || count == 0) return 0;
  const std::vector<double> w = surface_weights(d, k.k(), beta);

  // Interval i spans [t_i, t_{i+1}] and carries the summed weight of sample i.
  std::vector<double> cdf(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double wi = 0.0;
    for (std::size_t j = 0; j < layers; ++j) wi += w[i * layers + j];
    total += wi;
    cdf[i + 1] = total;
  }
  if (!(total > 0.0)) {
    total = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      total += cur.t[i + 1] - cur.t[i];
      cdf[i + 1] = total;
    }
  }

  std::vector<double> fresh;
  fresh.reserve(count);
  for (int s = 0; s < count; ++s) {
    const double u = (s + stratum_offset) / count * total;
    auto it = std::upper_bound(cdf.begin() + 1, cdf.end(), u);
    std::size_t i = static_cast<std::size_t>(it - cdf.begin()) - 1;
    i = std::min(i, n - 2);
    const double mass = cdf[i + 1] - cdf[i];
    const double f = mass > 0.0 ? std::clamp((u - cdf[i]) / mass, 0.0, 1.0) : 0.5;
    fresh.push_back(cur.t[i] + f * (cur.t[i + 1] - cur.t[i]));
  }

  // Merge the sorted new samples into the set. Old samples win ties, so a
  // fresh sample equal to an existing one is dropped.
  SampleSet merged;
  std::vector<double> merged_d;
  merged.t.reserve(n + fresh.size());
  merged.x.reserve(n + fresh.size());
  merged_d.reserve((n + fresh.size()) * layers);
  std::size_t a = 0, c = 0;
  int added = 0;
  std::vector<std::size_t> pending;  // positions in `merged` that need distances
  while (a < n || c < fresh.size()) {
    const bool take_old = c >= fresh.size() || (a < n && cur.t[a] <= fresh[c]);
    if (take_old) {
      merged.t.push_back(cur.t[a]);
      merged.x.push_back(cur.x[a]);
      merged_d.insert(merged_d.end(), d.begin() + a * layers, d.begin() + (a + 1) * layers);
      ++a;
    } else {
      if (!merged.t.empty() && merged.t.back() == fresh[c]) {
        ++c;
        continue;
      }
      merged.t.push_back(fresh[c]);
      merged.x.push_back(ray.at(fresh[c]));
      merged_d.resize(merged_d.size() + layers);
      pending.push_back(merged.t.size() - 1);
      ++added;
      ++c;
    }
  }
  for (std::size_t p : pending) {
    k.layer_distances(merged.x[p], std::span<double>(merged_d.data() + p * layers, layers));
  }
  merged.uniform_count = cur.uniform_count;
  merged.importance_count = cur.importance_count + added;
  cur = std::move(merged);
  d = std::move(merged_d);
  return added;
}

SampleSet importance_resample(const Ray& ray, const KSdf& k, const SampleSet& base, int m,
                              double beta, std::vector<double>* layer_d) {
  if (m < 0 || m % 2 != 0) throw InvalidArgument("m must be even and non-negative");
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  if (base.empty()) throw InvalidArgument("importance resampling needs a nonempty base sample set");

  SampleSet cur = base;
  std::vector<double> d;
  eval_distances(k, cur.x, 0, d);
  // Distinct stratum offsets keep the two rounds from landing on the same
  // positions when both fall back to the uniform CDF.
  importance_round(ray, k, cur, d, m / 2, 0.5 * beta, 0.5);
  importance_round(ray, k, cur, d, m / 2, beta, 0.25);
  if (layer_d) *layer_d = std::move(d);
  return cur;
}

void RenderConfig::validate() const {
  if (n < 2) throw InvalidArgument("n must be at least 2");
  if (m < 0 || m % 2 != 0) throw InvalidArgument("m must be even and non-negative");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidArgument("beta must be positive");
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("tau must lie in (0,1)");
  if (occupancy_resolution < 1) throw InvalidArgument("occupancy resolution must be positive");
}

RayEvaluation evaluate_ray(const Ray& ray, const KSdf& k, const OccupancyGrid& grid,
                           const RenderConfig& cfg, std::uint64_t pixel) {
  RayEvaluation ev;
  ev.k = k.k();
  std::optional<std::uint64_t> jitter;
  if (cfg.jitter) jitter = splitmix64(cfg.seed) ^ pixel;
  ev.samples = sample_uniform(ray, grid, cfg.n, jitter);
  if (ev.samples.empty()) return ev;
  if (cfg.m > 0) {
    ev.samples = importance_resample(ray, k, ev.samples, cfg.m, cfg.beta, &ev.layer_d);
  } else {
    eval_distances(k, ev.samples.x, 0, ev.layer_d);
  }
  ev.weights = surface_weights(ev.layer_d, ev.k, cfg.beta);
  return ev;
}

LayerRadiance render_layer(const Ray& ray, const KSdf& k, int layer, const AppearanceField& app,
                           const RayEvaluation& eval) {
  if (layer < 0 || layer >= k.k() || layer >= app.layer_count()) {
    throw InvalidArgument("layer index out of range");
  }
  LayerRadiance out;
  const Vec3& v = ray.direction.vec();
  const std::size_t layers = static_cast<std::size_t>(eval.k);
  for (std::size_t i = 0; i < eval.samples.size(); ++i) {
    const double w = eval.weights[i * layers + layer];
    if (!(w > 1e-12)) continue;
    const Vec3& x = eval.samples.x[i];
    const Vec3 g = k.layer_gradient(layer, x);
    const double len = length(g);
    const Vec3 n = len > 1e-12 ? g / len : -v;
    out.color = out.color + app.color(layer, x, v, n) * w;
    out.alpha += w * app.alpha(layer, x, v, n);
  }
  return out;
}

LayerRadiance render_layer(const Ray& ray, const KSdf& k, int layer, const AppearanceField& app,
                           const OccupancyGrid& grid, const RenderConfig& cfg) {
  cfg.validate();
  return render_layer(ray, k, layer, app, evaluate_ray(ray, k, grid, cfg));
}

Rgba render_volumetric(const Ray& ray, const KSdf& k, const AppearanceField& app,
                       const OccupancyGrid& grid, const RenderConfig& cfg, std::uint64_t pixel) {
  if (app.layer_count() != k.k()) throw InvalidArgument("appearance must define one entry per layer");
  const RayEvaluation ev = evaluate_ray(ray, k, grid, cfg, pixel);
  FrontToBack acc;
  if (!ev.samples.empty()) {
    for (int j = 0; j < k.k(); ++j) {
      const LayerRadiance l = render_layer(ray, k, j, app, ev);
      acc.add({l.color, l.alpha});
    }
  }
  return acc.over(cfg.background);
}

FrameBuffer render_image_volumetric(const Camera& camera, const Scene& scene,
                                    const RenderConfig& cfg, const OccupancyGrid* grid) {
  cfg.validate();
  if (camera.width < 1 || camera.height < 1) throw InvalidArgument("image size must be positive");
  OccupancyGrid local;
  if (!grid) {
    local = build_occupancy(scene.ksdf, scene.bounds, cfg.beta, cfg.occupancy_resolution, cfg.tau);
    grid = &local;
  }
  FrameBuffer fb(camera.width, camera.height);
  parallel_for(static_cast<std::size_t>(camera.height), 1, [&](std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      for (int x = 0; x < camera.width; ++x) {
        const std::uint64_t pixel = y * static_cast<std::uint64_t>(camera.width) + x;
        const Ray ray = camera.pixel_ray(x, static_cast<int>(y));
        fb.set(x, static_cast<int>(y),
               render_volumetric(ray, scene.ksdf, scene.appearance, *grid, cfg, pixel));
      }
    }
  });
  return fb;
}

}  // namespace volsurf
