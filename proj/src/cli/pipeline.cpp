// SPDX-License-Identifier: Apache-2.0
#include "volsurf/cli/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

#include "volsurf/appearance/bake.hpp"
#include "volsurf/assets/bundle.hpp"
#include "volsurf/core/error.hpp"
#include "volsurf/core/parallel.hpp"
#include "volsurf/fields/kernels.hpp"
#include "volsurf/shellrender/render.hpp"
#include "volsurf/volren/volren.hpp"

namespace volsurf {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

double framing_distance(const Scene& scene, double fov_deg) {
  const Vec3 e = scene.bounds.extent() * 0.5;
  const double r = std::max({e.x, e.y, e.z});
  return r / std::tan(0.5 * fov_deg * std::numbers::pi / 180.0);
}

ShTextureSet random_textures(int k, const TextureLayout& layout, double sigma, std::uint64_t seed,
                             bool quantize) {
  ShTextureSet set = ShTextureSet::zeros(k, layout, quantize);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, sigma);
  for (auto& bands : set.layers) {
    for (auto& t : bands) {
      for (double& v : t.values) v = nd(rng);
    }
  }
  return set;
}

ShellSet quick_shells(const Scene& scene, int resolution) {
  SimplifyConfig simplify;
  simplify.target_ratio = 0.05;
  AtlasConfig atlas;
  atlas.resolution = 64;
  atlas.gutter = 1;
  return extract_shells(scene.ksdf, scene.bounds, resolution, simplify, atlas);
}

TextureLayout small_layout() { return {3, {16, 8, 4, 2}, -15.0, 15.0}; }

CheckOutcome check_sorted_blend(const ValidateConfig& cfg) {
  ShellSet shells;
  ShTextureSet texset;
  Rgb bg{1.0, 1.0, 1.0};
  Camera cam;
  if (cfg.bundle) {
    Bundle b = import_bundle(*cfg.bundle);
    shells = std::move(b.shells);
    texset = std::move(b.textures);
    bg = b.meta.background;
    const Aabb box = [&] {
      Aabb a;
      for (const auto& m : shells.shells) a.expand(m.bounds());
      return a;
    }();
    const Vec3 e = box.extent() * 0.5;
    const double d = 1.3 * std::max({e.x, e.y, e.z}) / std::tan(20.0 * std::numbers::pi / 180.0);
    cam = orbit_camera(box.center(), 30.0, 20.0, d, 40.0, 96, 96);
  } else {
    const Scene scene = make_canonical_scene(cfg.scene, cfg.k);
    shells = quick_shells(scene, 64);
    texset = random_textures(shells.k(), small_layout(), 0.5, cfg.seed, true);
    bg = scene.background;
    cam = default_camera(scene, 96, 96);
  }
  const ShellRenderer renderer(shells);
  const FrameBuffer fixed = renderer.render(cam, texset, bg);
  const FrameBuffer sorted = renderer.render_sorted(
      cam, [&](int j, const LayerHit& h, const Ray& r) { return shade_texture(texset, j, h, r); },
      bg);
  std::size_t differing = 0;
  double max_diff = 0.0;
  for (std::size_t i = 0; i < fixed.rgba.size(); ++i) {
    const double d = std::abs(static_cast<double>(fixed.rgba[i]) - sorted.rgba[i]);
    if (d != 0.0) ++differing;
    max_diff = std::max(max_diff, d);
  }
  return {"sorted-blend", differing == 0,
          "differing_values=" + std::to_string(differing) + " max_diff=" + std::to_string(max_diff)};
}

CheckOutcome check_occupancy(const ValidateConfig& cfg) {
  const Scene scene = make_canonical_scene(cfg.scene, cfg.k);
  const double beta = 4096.0, tau = 1e-4;
  const OccupancyGrid grid = build_occupancy(scene.ksdf, scene.bounds, beta, 128, tau);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double support = density_support_radius(beta, tau);
  std::size_t dense = 0, violations = 0;
  std::vector<double> d(scene.ksdf.k());
  for (int s = 0; s < 10000; ++s) {
    const Vec3 e = scene.bounds.extent();
    Vec3 x = scene.bounds.lo + Vec3(u(rng) * e.x, u(rng) * e.y, u(rng) * e.z);
    if (s % 2 == 1) {
      // Pull half the points into the thin density shells around a layer.
      const int j = static_cast<int>(u(rng) * scene.ksdf.k()) % scene.ksdf.k();
      for (int it = 0; it < 4; ++it) {
        const Vec3 g = scene.ksdf.layer_gradient(j, x);
        const double len = length(g);
        if (!(len > 1e-12)) break;
        x -= g * (scene.ksdf.layer_distance(j, x) / (len * len));
      }
      const Vec3 g = scene.ksdf.layer_gradient(j, x);
      if (length(g) > 1e-12) x += g * ((2.0 * u(rng) - 1.0) * support / length(g));
      x = scene.bounds.clamp(x);
    }
    scene.ksdf.layer_distances(x, d);
    bool any = false;
    for (double dj : d) any = any || logistic_density(beta, dj) >= tau;
    if (!any) continue;
    ++dense;
    if (!grid.occupied_at(x)) ++violations;
  }
  return {"occupancy", violations == 0 && dense > 0,
          "dense_points=" + std::to_string(dense) + " violations=" + std::to_string(violations)};
}

CheckOutcome check_gradient(const ValidateConfig& cfg) {
  const Scene scene = make_canonical_scene(cfg.scene, cfg.k);
  const ShellSet shells = quick_shells(scene, 48);
  FitConfig fc;
  fc.layout = small_layout();
  fc.quantize = false;
  fc.background = scene.background;
  const Camera cam = default_camera(scene, 16, 16);
  ShTextureSet truth = random_textures(shells.k(), fc.layout, 0.5, cfg.seed + 1, false);
  std::vector<FitTarget> targets{{cam, render_shells(cam, shells, truth, scene.background)}};
  const TextureFitter fitter(shells, targets, fc);
  ShTextureSet p = random_textures(shells.k(), fc.layout, 0.5, cfg.seed + 2, false);
  std::vector<double> grad;
  fitter.loss_and_gradient(p, grad);
  std::vector<std::size_t> touched;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (grad[i] != 0.0) touched.push_back(i);
  }
  std::mt19937_64 rng(cfg.seed);
  std::shuffle(touched.begin(), touched.end(), rng);
  const double h = 1e-4;
  double worst = 0.0;
  const std::size_t n = std::min<std::size_t>(20, touched.size());
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t i = touched[s];
    const double x0 = p.parameter(i);
    auto f = [&](double x) {
      p.parameter(i) = x;
      return fitter.loss(p);
    };
    const double fd = (-f(x0 + 2 * h) + 8 * f(x0 + h) - 8 * f(x0 - h) + f(x0 - 2 * h)) / (12 * h);
    p.parameter(i) = x0;
    worst = std::max(worst, std::abs(fd - grad[i]) /
                                std::max({std::abs(fd), std::abs(grad[i]), 1e-8}));
  }
  return {"gradient", n > 0 && worst < 1e-4,
          "parameters=" + std::to_string(n) + " worst_relative_error=" + std::to_string(worst)};
}

CheckOutcome check_quantization(const ValidateConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> nd(0.0, 3.0);
  std::size_t failures = 0;
  double worst = 0.0;
  for (int s = 0; s < 10000; ++s) {
    const double x = u(rng);
    if (quantize(quantize(x)) != quantize(x)) ++failures;
    const double raw = nd(rng);
    const std::array<double, 1> r{raw};
    const double a = decode_coefficients(r, -15.0, 15.0, true)[0];
    const double b = decode_coefficients(r, -15.0, 15.0, false)[0];
    worst = std::max(worst, std::abs(a - b));
  }
  const bool ok = failures == 0 && worst <= 30.0 / 510.0 + 1e-12;
  return {"quantization", ok,
          "idempotence_failures=" + std::to_string(failures) + " max_error=" + std::to_string(worst)};
}

CheckOutcome check_bake_roundtrip(const ValidateConfig& cfg) {
  const ShTextureSet set = random_textures(2, small_layout(), 2.0, cfg.seed + 3, true);
  const ShTextureSet loaded =
      load_baked_textures(bake_textures(set), set.degree, set.v_min, set.v_max);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t mismatches = 0;
  for (int s = 0; s < 2000; ++s) {
    const Vec2 uv{u(rng), u(rng)};
    const UnitVec3 v(Vec3(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5 + 1e-3));
    const int layer = s % 2;
    if (!(decode_rgba(set, layer, uv, v) == decode_rgba(loaded, layer, uv, v))) ++mismatches;
  }
  return {"bake-roundtrip", mismatches == 0, "mismatches=" + std::to_string(mismatches)};
}

CheckOutcome check_kernels(const ValidateConfig&) {
  const double a0 = alpha_attenuation({0, 0, 1}, {1, 0, 0});
  const double a1 = alpha_attenuation({0, 0, 1}, {0, 0, 1});
  const double d = delta_o_init(512.0) - std::numbers::pi / (std::sqrt(3.0) * 512.0);
  const bool ok = std::abs(a0) < 1e-6 && std::abs(a1 - std::tanh(5.0)) < 1e-6 && d == 0.0;
  return {"kernels", ok,
          "attenuation0=" + std::to_string(a0) + " attenuation1=" + std::to_string(a1)};
}

}  // namespace

void PipelineConfig::validate() const {
  if (scene_path.empty()) throw InvalidArgument("a scene file is required");
  if (out_dir.empty()) throw InvalidArgument("an output directory is required");
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  if (mc_resolution < 8) throw InvalidArgument("mesh resolution must be >= 8");
  if (!(simplify_ratio > 0.0 && simplify_ratio <= 1.0)) {
    throw InvalidArgument("simplify ratio must be in (0, 1]");
  }
  if (atlas_resolution < 8) throw InvalidArgument("atlas resolution must be >= 8");
  if (views < 1 || view_size < 1) throw InvalidArgument("need at least one training view");
  if (!skip_fit) fit.validate();
}

std::vector<Camera> training_cameras(const Scene& scene, int count, int size, double fov_deg) {
  return fibonacci_cameras(count, scene.bounds.center(), framing_distance(scene, fov_deg), fov_deg,
                           size, size);
}

Camera default_camera(const Scene& scene, int width, int height, double fov_deg) {
  return orbit_camera(scene.bounds.center(), 30.0, 20.0, framing_distance(scene, fov_deg), fov_deg,
                      width, height);
}

BakeResult run_bake(const PipelineConfig& cfg, std::ostream* log) {
  cfg.validate();
  BakeResult result;
  auto stage = [&](const std::string& name, Clock::time_point t0) {
    result.stages.push_back({name, seconds_since(t0)});
    if (log) *log << "stage name=" << name << " seconds=" << result.stages.back().seconds << "\n";
  };

  auto t0 = Clock::now();
  const Scene scene = read_scene(cfg.scene_path);
  stage("scene", t0);

  t0 = Clock::now();
  SimplifyConfig simplify;
  simplify.target_ratio = cfg.simplify_ratio;
  AtlasConfig atlas;
  atlas.resolution = cfg.atlas_resolution;
  const ShellSet shells =
      extract_shells(scene.ksdf, scene.bounds, cfg.mc_resolution, simplify, atlas, &result.shells);
  stage("shells", t0);

  t0 = Clock::now();
  RenderConfig rc;
  rc.beta = cfg.beta;
  rc.n = cfg.samples_uniform;
  rc.m = cfg.samples_importance;
  rc.background = scene.background;
  rc.occupancy_resolution = cfg.occupancy_resolution;
  rc.seed = cfg.seed;
  const OccupancyGrid grid =
      build_occupancy(scene.ksdf, scene.bounds, rc.beta, rc.occupancy_resolution, rc.tau);
  std::vector<FitTarget> targets;
  for (const Camera& cam : training_cameras(scene, cfg.views, cfg.view_size, cfg.fov_deg)) {
    targets.push_back({cam, render_image_volumetric(cam, scene, rc, &grid)});
  }
  stage("reference", t0);

  t0 = Clock::now();
  FitConfig fc = cfg.fit;
  fc.background = scene.background;
  fc.seed = cfg.seed;
  ShTextureSet texset = ShTextureSet::zeros(shells.k(), fc.layout, fc.quantize);
  if (!cfg.skip_fit) texset = fit_textures(shells, targets, fc, std::move(texset), &result.fit);
  stage("fit", t0);

  t0 = Clock::now();
  BundleMeta meta;
  meta.name = scene.name;
  meta.background = scene.background;
  meta.camera = default_camera(scene, 512, 512, cfg.fov_deg);
  export_bundle(cfg.out_dir, shells, texset, meta);
  write_scene(cfg.out_dir / "scene.json", scene);
  stage("export", t0);

  t0 = Clock::now();
  const Bundle bundle = import_bundle(cfg.out_dir);
  const ShellRenderer renderer(bundle.shells);
  for (const FitTarget& t : targets) {
    const FrameBuffer img = renderer.render(t.camera, bundle.textures, bundle.meta.background);
    result.training_psnr.push_back(image_metrics(img, t.image).psnr);
  }
  stage("evaluate", t0);
  if (log && !result.training_psnr.empty()) {
    double mn = result.training_psnr[0], mean = 0.0;
    for (double p : result.training_psnr) {
      mn = std::min(mn, p);
      mean += p;
    }
    mean /= static_cast<double>(result.training_psnr.size());
    *log << "bake views=" << result.training_psnr.size() << " psnr_min=" << mn
         << " psnr_mean=" << mean << "\n";
  }
  return result;
}

BenchResult run_bench(const BenchConfig& cfg) {
  if (cfg.ks.empty()) throw InvalidArgument("no k values to benchmark");
  if (cfg.frames < 1 || cfg.size < 1) throw InvalidArgument("frames and size must be positive");
  const int threads = cfg.threads > 0 ? cfg.threads : default_thread_count();
  BenchResult result;

  auto time_frames = [&](const ShellRenderer& renderer, const ShTextureSet& texset,
                         const Scene& scene, int t) {
    set_thread_count(t);
    const double dist = framing_distance(scene, 40.0);
    std::vector<double> ms;
    for (int f = 0; f < cfg.frames; ++f) {
      const Camera cam = orbit_camera(scene.bounds.center(), 360.0 * f / cfg.frames, 20.0, dist,
                                      40.0, cfg.size, cfg.size);
      const auto t0 = Clock::now();
      const FrameBuffer fb = renderer.render(cam, texset, scene.background);
      ms.push_back(seconds_since(t0) * 1e3);
    }
    set_thread_count(0);
    std::sort(ms.begin(), ms.end());
    return ms[ms.size() / 2];
  };

  const double rays = static_cast<double>(cfg.size) * cfg.size;
  for (std::size_t i = 0; i < cfg.ks.size(); ++i) {
    const int k = cfg.ks[i];
    const Scene scene = make_canonical_scene("fuzzy-sphere", k);
    const ShellRenderer renderer(quick_shells(scene, cfg.mc_resolution));
    // Zero textures decode to half-transparent gray, so no ray exits early
    // and every layer is traced.
    const ShTextureSet texset = ShTextureSet::zeros(k, small_layout(), true);
    const double ms = time_frames(renderer, texset, scene, threads);
    result.entries.push_back({k, threads, ms, rays / (ms * 1e-3)});
    if (i == 0) {
      const double single = time_frames(renderer, texset, scene, 1);
      result.speedup = single / ms;
      result.speedup_threads = threads;
    }
  }
  result.monotonic = true;
  for (std::size_t i = 1; i < result.entries.size(); ++i) {
    if (!(result.entries[i].frame_ms > result.entries[i - 1].frame_ms)) result.monotonic = false;
  }
  return result;
}

std::vector<ValidationCheck> validation_checks() {
  return {{"sorted-blend", "fixed-order shell render equals the per-pixel sorted blend"},
          {"occupancy", "every sampled point with density >= tau lies in an occupied voxel"},
          {"gradient", "analytic fitting gradients match central finite differences"},
          {"quantization", "quantizer idempotence and the decode error bound"},
          {"bake-roundtrip", "baked and reloaded textures decode exactly like the originals"},
          {"kernels", "attenuation endpoints and initial shell spacing"}};
}

std::vector<CheckOutcome> run_validation(const ValidateConfig& cfg) {
  using Fn = std::function<CheckOutcome(const ValidateConfig&)>;
  const std::vector<std::pair<std::string, Fn>> all = {
      {"sorted-blend", check_sorted_blend}, {"occupancy", check_occupancy},
      {"gradient", check_gradient},         {"quantization", check_quantization},
      {"bake-roundtrip", check_bake_roundtrip}, {"kernels", check_kernels}};
  for (const std::string& name : cfg.only) {
    if (std::none_of(all.begin(), all.end(), [&](const auto& c) { return c.first == name; })) {
      throw InvalidArgument("unknown check: " + name);
    }
  }
  std::vector<CheckOutcome> out;
  for (const auto& [name, fn] : all) {
    if (!cfg.only.empty() && std::find(cfg.only.begin(), cfg.only.end(), name) == cfg.only.end()) {
      continue;
    }
    out.push_back(fn(cfg));
  }
  return out;
}

}  // namespace volsurf
