// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Run a subset with `volsurf_acceptance 2 5 6`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "volsurf/appearance/fit.hpp"
#include "volsurf/appearance/texture.hpp"
#include "volsurf/cli/pipeline.hpp"
#include "volsurf/fields/kernels.hpp"
#include "volsurf/fields/regularizers.hpp"
#include "volsurf/fields/scene.hpp"
#include "volsurf/meshing/marching_cubes.hpp"
#include "volsurf/meshing/shells.hpp"
#include "volsurf/shellrender/blend.hpp"
#include "volsurf/shellrender/bvh.hpp"
#include "volsurf/shellrender/render.hpp"
#include "volsurf/volren/volren.hpp"

using namespace volsurf;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool passed = false;
  std::string detail;
};

/// Appends "key=value" pairs to a detail string.
class Detail {
 public:
  template <typename T>
  Detail& add(const std::string& key, const T& value) {
    if (out_.tellp() > 0) out_ << ' ';
    out_ << key << '=' << value;
    return *this;
  }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

ShTextureSet random_textures(int k, const TextureLayout& layout, std::uint64_t seed, double sigma,
                             bool quantize) {
  ShTextureSet t = ShTextureSet::zeros(k, layout, quantize);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, sigma);
  for (std::size_t i = 0; i < t.parameter_count(); ++i) t.parameter(i) = nd(rng);
  return t;
}

ShellSet shells_of(const Scene& scene, int mc_resolution, int atlas_resolution) {
  SimplifyConfig sc;
  sc.target_ratio = 0.05;
  AtlasConfig ac;
  ac.resolution = atlas_resolution;
  ac.gutter = 1;
  return extract_shells(scene.ksdf, scene.bounds, mc_resolution, sc, ac);
}

// 1. Volumetric renders at rising sharpness converge to the shell render.
Outcome peaked_density_convergence() {
  const auto t0 = Clock::now();
  const Scene scene = make_canonical_scene("fuzzy-sphere", 3);
  SimplifyConfig sc;
  sc.target_ratio = 0.05;
  const ShellSet shells = extract_shells(scene.ksdf, scene.bounds, 128, sc, AtlasConfig{});
  const Camera cam = default_camera(scene, 256, 256);
  // Shells carry the scene's own appearance, evaluated at the surface hit.
  const LayerShader shader = [&](int j, const LayerHit& h, const Ray& r) {
    const Vec3 x = r.at(h.t);
    const Vec3& v = r.direction.vec();
    return LayerSample{scene.appearance.color(j, x, v, h.normal.vec()),
                       scene.appearance.alpha(j, x, v, h.normal.vec())};
  };
  const FrameBuffer shell_img = ShellRenderer(shells).render(cam, shader, scene.background);
  Detail d;
  std::vector<double> mae;
  double last_render_s = 0.0;
  for (double beta : {256.0, 1024.0, 4096.0}) {
    Scene s = scene;
    s.ksdf = scene.ksdf.with_beta(beta);
    RenderConfig rc;
    rc.beta = beta;
    rc.background = scene.background;
    const auto r0 = Clock::now();
    const FrameBuffer vol = render_image_volumetric(cam, s, rc);
    last_render_s = seconds_since(r0);
    mae.push_back(image_metrics(vol, shell_img).mae);
    d.add("mae255_beta" + std::to_string(static_cast<int>(beta)), mae.back() * 255.0);
  }
  const double total = seconds_since(t0);
  d.add("render4096_s", last_render_s).add("total_s", total);
  const bool ok = mae[0] > mae[1] && mae[1] > mae[2] && mae[2] < 2.0 / 255.0 && total < 60.0;
  return {ok, d.str()};
}

// 2. Fixed-order blending equals the per-pixel sorted blend on nested shells.
Outcome sorting_free() {
  Detail d;
  bool ok = true;
  std::size_t max_diff_values = 0, min_control = SIZE_MAX;
  for (const std::string& name : canonical_scene_names()) {
    for (int k : {3, 5, 7, 9}) {
      const Scene scene = make_canonical_scene(name, k);
      const ShellSet shells = shells_of(scene, 96, 64);
      const ShTextureSet tex =
          random_textures(k, {3, {32, 16, 8, 4}, -15.0, 15.0}, 100 + k, 1.0, true);
      const Camera cam = default_camera(scene, 64, 64);
      const FrameBuffer a = render_shells(cam, shells, tex, scene.background);
      const FrameBuffer b = oracle_sorted_blend(cam, shells, tex, scene.background);
      std::size_t diff = 0;
      for (std::size_t i = 0; i < a.rgba.size(); ++i) diff += a.rgba[i] != b.rgba[i];
      max_diff_values = std::max(max_diff_values, diff);

      // Negative control: reversing the layer order breaks the equality.
      ShellSet reversed = shells;
      std::reverse(reversed.shells.begin(), reversed.shells.end());
      const FrameBuffer c = render_shells(cam, reversed, tex, scene.background);
      const FrameBuffer e = oracle_sorted_blend(cam, reversed, tex, scene.background);
      std::size_t control = 0;
      for (std::size_t i = 0; i < c.rgba.size(); ++i) control += c.rgba[i] != e.rgba[i];
      min_control = std::min(min_control, control);
      ok = ok && diff == 0 && control > 0;
    }
  }
  d.add("scenes", canonical_scene_names().size()).add("ks", "3,5,7,9");
  d.add("max_differing_values", max_diff_values).add("min_control_differing_values", min_control);
  return {ok, d.str()};
}

// 3. Refit from scratch against renders of a known texture set.
Outcome texture_recovery() {
  const Scene scene = make_canonical_scene("fuzzy-sphere", 3);
  const ShellSet shells = shells_of(scene, 64, 32);
  const TextureLayout layout{3, {32, 16, 8, 4}, -15.0, 15.0};
  const std::vector<Camera> cams = fibonacci_cameras(6, {0, 0, 0}, 3.0, 40.0, 48, 48);
  Detail d;
  bool ok = true;
  for (bool quantize : {false, true}) {
    const auto t0 = Clock::now();
    const ShTextureSet truth = random_textures(3, layout, 7, 0.4, quantize);
    std::vector<FitTarget> targets;
    for (const Camera& c : cams) {
      targets.push_back({c, render_shells(c, shells, truth, scene.background)});
    }
    FitConfig fc;
    fc.layout = layout;
    fc.quantize = quantize;
    fc.iterations = 2000;
    fc.batch_size = 0;
    fc.background = scene.background;
    FitReport rep;
    const ShTextureSet got = fit_textures(shells, targets, fc, &rep);
    double worst = kPsnrCap;
    for (const FitTarget& t : targets) {
      worst = std::min(worst,
                       image_metrics(render_shells(t.camera, shells, got, scene.background), t.image).psnr);
    }
    const double secs = seconds_since(t0);
    const double threshold = quantize ? 39.0 : 40.0;
    const std::string tag = quantize ? "quantized" : "float";
    d.add("psnr_min_" + tag, worst).add("iterations_" + tag, rep.iterations).add("seconds_" + tag, secs);
    ok = ok && worst > threshold && rep.iterations <= 2000 && secs < 600.0;
  }
  return {ok, d.str()};
}

// 4. Full bake of the fuzzy sphere from 32 training views.
Outcome end_to_end_bake() {
  const fs::path dir = fs::temp_directory_path() / "volsurf_acceptance_bake";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_scene(dir / "scene.json", make_canonical_scene("fuzzy-sphere", 3));
  PipelineConfig pc;
  pc.scene_path = dir / "scene.json";
  pc.out_dir = dir / "bundle";
  pc.views = 32;
  pc.fit.layout.band_resolutions = {64, 32, 16, 8};
  const auto t0 = Clock::now();
  const BakeResult r = run_bake(pc);
  const double worst = *std::min_element(r.training_psnr.begin(), r.training_psnr.end());
  double mean = 0.0;
  for (double p : r.training_psnr) mean += p / static_cast<double>(r.training_psnr.size());
  Detail d;
  d.add("views", r.training_psnr.size()).add("psnr_min", worst).add("psnr_mean", mean);
  d.add("seconds", seconds_since(t0));
  return {r.training_psnr.size() == 32 && worst > 30.0, d.str()};
}

// 5. Analytic fitting gradients against central differences.
Outcome gradient_oracle() {
  const Scene scene = make_canonical_scene("fuzzy-sphere", 3);
  const ShellSet shells = shells_of(scene, 48, 32);
  FitConfig fc;
  fc.layout = {3, {16, 8, 4, 2}, -15.0, 15.0};
  fc.quantize = false;
  fc.background = scene.background;
  const ShTextureSet truth = random_textures(3, fc.layout, 51, 0.5, false);
  std::vector<FitTarget> targets;
  for (const Camera& c : fibonacci_cameras(2, {0, 0, 0}, 3.0, 40.0, 24, 24)) {
    targets.push_back({c, render_shells(c, shells, truth, scene.background)});
  }
  const TextureFitter fitter(shells, targets, fc);
  ShTextureSet p = random_textures(3, fc.layout, 52, 0.5, false);
  std::vector<double> grad;
  fitter.loss_and_gradient(p, grad);
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (std::abs(grad[i]) > 1e-7) live.push_back(i);
  }
  std::mt19937_64 rng(53);
  std::shuffle(live.begin(), live.end(), rng);
  const std::size_t n = std::min<std::size_t>(100, live.size());
  const double h = 1e-4;
  double worst = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t i = live[s];
    const double x0 = p.parameter(i);
    auto f = [&](double x) {
      p.parameter(i) = x;
      return fitter.loss(p);
    };
    const double fd = (-f(x0 + 2 * h) + 8 * f(x0 + h) - 8 * f(x0 - h) + f(x0 - 2 * h)) / (12 * h);
    p.parameter(i) = x0;
    worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-8}));
  }
  Detail d;
  d.add("parameters", n).add("worst_relative_error", worst);
  return {n == 100 && worst < 1e-4, d.str()};
}

// 6. Numerical kernels.
Outcome kernel_suite() {
  Detail d;
  bool ok = true;

  // Density integral by composite Simpson over a range whose tails are
  // below double precision.
  double worst_integral = 0.0;
  for (double beta : {30.0, 512.0, 4096.0}) {
    const int n = 400000;
    const double a = -80.0 / beta, b = 80.0 / beta, h = (b - a) / n;
    double s = logistic_density(beta, a) + logistic_density(beta, b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * logistic_density(beta, a + i * h);
    worst_integral = std::max(worst_integral, std::abs(s * h / 3.0 - 1.0));
  }
  ok = ok && worst_integral < 1e-6;
  d.add("density_integral_error", worst_integral);

  double worst_spacing = 0.0;
  for (double beta : {1.0, 30.0, 512.0, 4096.0}) {
    const double want = (1.0 / beta) * std::numbers::pi / std::sqrt(3.0);
    worst_spacing = std::max(worst_spacing, std::abs(delta_o_init(beta) - want) / want);
  }
  ok = ok && worst_spacing < 1e-15;
  d.add("spacing_relative_error", worst_spacing);

  const Vec3 n{0, 0, 1};
  const double a0 = alpha_attenuation({1, 0, 0}, n);
  const double a1 = alpha_attenuation({0, 0, 1}, n);
  ok = ok && std::abs(a0) <= 1e-6 && std::abs(a1 - std::tanh(5.0)) <= 1e-6;
  d.add("attenuation_0", a0).add("attenuation_1", a1);

  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  int idempotence_failures = 0;
  for (int i = 0; i < 100000; ++i) {
    const double q = quantize(u01(rng));
    idempotence_failures += quantize(q) != q;
  }
  std::normal_distribution<double> nd(0.0, 3.0);
  std::vector<double> raw(100000);
  for (double& x : raw) x = nd(rng);
  const auto dq = decode_coefficients(raw, -15.0, 15.0, true);
  const auto df = decode_coefficients(raw, -15.0, 15.0, false);
  double decode_error = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) decode_error = std::max(decode_error, std::abs(dq[i] - df[i]));
  ok = ok && idempotence_failures == 0 && decode_error <= 30.0 / 510.0;
  d.add("idempotence_failures", idempotence_failures).add("max_decode_error", decode_error);

  std::vector<Vec3> pts(10000);
  for (Vec3& p : pts) p = {2.0 * u01(rng) - 1.0, 2.0 * u01(rng) - 1.0, 2.0 * u01(rng) - 1.0};
  double eik = 0.0;
  for (const SdfField& f : {SdfField::sphere({0.1, -0.2, 0.05}, 0.6), SdfField::plane({1, 2, 2}, 0.1),
                            SdfField::capsule({-0.3, 0, 0}, {0.3, 0.1, 0}, 0.2)}) {
    eik = std::max(eik, eikonal_residual(f, pts));
  }
  ok = ok && eik < 1e-10;
  d.add("eikonal_residual", eik);

  // Per-layer weight sums along random rays through a nested scene.
  const Scene scene = make_canonical_scene("torus-with-halo", 5);
  const OccupancyGrid grid = build_occupancy(scene.ksdf, scene.bounds, scene.ksdf.beta(), 64);
  double worst_sum = 0.0;
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const Vec3 o = UnitVec3(Vec3(g(rng), g(rng), g(rng))).vec() * 3.0;
    const Vec3 target{u01(rng) - 0.5, u01(rng) - 0.5, u01(rng) - 0.5};
    Ray r;
    r.origin = o;
    r.direction = UnitVec3(target - o);
    const SampleSet base = sample_uniform(r, grid, 64);
    if (base.empty()) continue;
    const SampleSet s = importance_resample(r, scene.ksdf, base, 64, scene.ksdf.beta());
    std::vector<double> dist;
    for (const Vec3& x : s.x) {
      const auto l = scene.ksdf.layer_distances(x);
      dist.insert(dist.end(), l.begin(), l.end());
    }
    const int k = scene.ksdf.k();
    const std::vector<double> w = surface_weights(dist, k, scene.ksdf.beta());
    for (int j = 0; j < k; ++j) {
      double sum = 0.0;
      for (std::size_t m = 0; m < s.size(); ++m) sum += w[m * k + j];
      worst_sum = std::max(worst_sum, sum);
    }
  }
  // The exact sum is 1 - T_end; summation rounding can add a few ulps.
  ok = ok && worst_sum <= 1.0 + 1e-12;
  d.add("max_weight_sum_minus_one", worst_sum - 1.0);
  return {ok, d.str()};
}

// 7. Marching cubes, simplified-shell nesting and the BVH.
Outcome geometry_suite() {
  Detail d;
  bool ok = true;
  const Aabb box({-1, -1, -1}, {1, 1, 1});
  const int res = 64;
  const double diag = std::sqrt(3.0) * 2.0 / res;
  const SdfField sphere = SdfField::sphere({0.03, -0.02, 0.01}, 0.6);
  const TriMesh sm = marching_cubes(sphere, box, res);
  double residual = 0.0;
  for (const Vec3& p : sm.positions) residual = std::max(residual, std::abs(sphere.eval(p)));
  const long chi_sphere = analyze_topology(sm).euler_characteristic();
  const long chi_torus =
      analyze_topology(marching_cubes(SdfField::torus({0, 0, 0}, 0.6, 0.2), box, res)).euler_characteristic();
  ok = ok && residual < diag && chi_sphere == 2 && chi_torus == 0;
  d.add("mc_residual_over_diagonal", residual / diag).add("chi_sphere", chi_sphere).add("chi_torus", chi_torus);

  std::mt19937_64 rng(71);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  long nesting_violations = 0, bvh_mismatches = 0, all_hit = 0;
  for (const std::string& name : canonical_scene_names()) {
    const Scene scene = make_canonical_scene(name, 3);
    const ShellSet set = shells_of(scene, 64, 64);
    std::vector<Bvh> bvhs;
    for (const TriMesh& m : set.shells) bvhs.emplace_back(m);
    for (int i = 0; i < 10000; ++i) {
      Ray r;
      r.origin = UnitVec3(Vec3(nd(rng), nd(rng), nd(rng))).vec() * 3.0;
      r.direction = UnitVec3(Vec3(u(rng), u(rng), u(rng)) - r.origin);
      std::vector<double> t;
      for (std::size_t j = 0; j < bvhs.size(); ++j) {
        const auto a = first_hit(bvhs[j], set.shells[j], r);
        const auto b = brute_force_first_hit(set.shells[j], r);
        if (a.has_value() != b.has_value() || (a && (a->t != b->t || a->triangle != b->triangle))) {
          ++bvh_mismatches;
        }
        if (a) t.push_back(a->t);
      }
      if (t.size() != bvhs.size()) continue;
      ++all_hit;
      for (std::size_t j = 1; j < t.size(); ++j) nesting_violations += !(t[j] > t[j - 1]);
    }
  }
  ok = ok && nesting_violations == 0 && bvh_mismatches == 0 && all_hit > 1000;
  d.add("rays_all_layers_hit", all_hit).add("nesting_violations", nesting_violations);
  d.add("bvh_mismatches", bvh_mismatches);
  return {ok, d.str()};
}

// 8. Occupancy grid never culls a point of noticeable density.
Outcome occupancy_conservative() {
  const Scene s = make_canonical_scene("torus-with-halo", 3);
  const double beta = 4096.0, tau = 1e-4;
  const OccupancyGrid g = build_occupancy(s.ksdf, s.bounds, beta, 128, tau);
  const double support = density_support_radius(beta, tau);
  std::mt19937_64 rng(81);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  long violations = 0, dense = 0, drawn = 0;
  // Draw until 1e5 points above the threshold have been tested. Most are
  // projected onto a layer and jittered within the density support.
  while (dense < 100000) {
    ++drawn;
    Vec3 p;
    for (int a = 0; a < 3; ++a) p[a] = s.bounds.lo[a] + u01(rng) * s.bounds.extent()[a];
    if (drawn % 8 != 0) {
      const int j = static_cast<int>(drawn % s.ksdf.k());
      for (int it = 0; it < 4; ++it) {
        const Vec3 n = s.ksdf.layer_gradient(j, p);
        if (length(n) < 1e-9) break;
        p = p - n / length(n) * s.ksdf.layer_distance(j, p);
      }
      const Vec3 n = s.ksdf.layer_gradient(j, p);
      if (length(n) > 1e-9) p = p + n / length(n) * ((2.0 * u01(rng) - 1.0) * support);
      p = s.bounds.clamp(p);
    }
    bool any = false;
    for (double d : s.ksdf.layer_distances(p)) any = any || logistic_density(beta, d) >= tau;
    if (!any) continue;
    ++dense;
    violations += !g.occupied_at(p);
  }
  Detail d;
  d.add("dense_points", dense).add("drawn", drawn).add("violations", violations);
  return {violations == 0, d.str()};
}

// 9. Shell render cost grows with the number of layers.
Outcome benchmark_trend() {
  BenchConfig cfg;
  const BenchResult r = run_bench(cfg);
  Detail d;
  std::string ms;
  for (const BenchEntry& e : r.entries) {
    if (!ms.empty()) ms += ",";
    ms += std::to_string(e.k) + ":" + std::to_string(e.frame_ms);
  }
  d.add("frame_ms", ms);
  return {r.monotonic, d.str()};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "peaked-density-convergence", peaked_density_convergence},
      {2, "sorting-free", sorting_free},
      {3, "texture-recovery", texture_recovery},
      {4, "end-to-end-bake", end_to_end_bake},
      {5, "gradient-oracle", gradient_oracle},
      {6, "numerical-kernels", kernel_suite},
      {7, "geometry", geometry_suite},
      {8, "occupancy-conservative", occupancy_conservative},
      {9, "benchmark-trend", benchmark_trend},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const Criterion& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %d %s: %s (%.1f s) %s\n", c.id, c.name, o.passed ? "PASS" : "FAIL",
                seconds_since(t0), o.detail.c_str());
    std::fflush(stdout);
    failures += !o.passed;
  }
  return failures == 0 ? 0 : 1;
}
