// SPDX-License-Identifier: Apache-2.0
// volsurf: scene generation, rendering, baking, benchmarking and validation.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "volsurf/assets/bundle.hpp"
#include "volsurf/cli/pipeline.hpp"
#include "volsurf/core/error.hpp"
#include "volsurf/core/parallel.hpp"
#include "volsurf/fields/scene.hpp"
#include "volsurf/shellrender/render.hpp"
#include "volsurf/volren/volren.hpp"

namespace fs = std::filesystem;
using namespace volsurf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct SceneArgs {
  std::string name;
  int k = 3;
  double beta_init = 512.0;
  double beta = 4096.0;
  std::string out;
  bool list = false;
};

struct RenderArgs {
  std::string scene;
  std::string bundle;
  std::string mode;
  std::string out;
  std::string reference;
  double beta = 4096.0;
  int n = 64;
  int m = 64;
  int occupancy = 256;
  int width = 256;
  int height = 256;
  double yaw = 30.0;
  double pitch = 20.0;
  double fov = 40.0;
  double distance = 0.0;
};

struct BakeArgs {
  std::string scene;
  std::string out;
  std::string textures = "256,128,64,32";
  bool no_quantize = false;
  PipelineConfig cfg;
};

struct ValidateArgs {
  std::string scene = "fuzzy-sphere";
  int k = 3;
  std::string bundle;
  std::vector<std::string> checks;
  bool list = false;
  std::uint64_t seed = 0;
};

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidArgument("not an integer list: " + text);
    }
  }
  return out;
}

Aabb mesh_bounds(const ShellSet& shells) {
  Aabb box;
  for (const auto& m : shells.shells) box.expand(m.bounds());
  return box;
}

Camera make_camera(const RenderArgs& a, const Aabb& box) {
  const Vec3 e = box.extent() * 0.5;
  const double r = std::max({e.x, e.y, e.z});
  const double d =
      a.distance > 0.0 ? a.distance : r / std::tan(0.5 * a.fov * std::numbers::pi / 180.0);
  return orbit_camera(box.center(), a.yaw, a.pitch, d, a.fov, a.width, a.height);
}

void write_image(const fs::path& path, const FrameBuffer& fb) {
  write_png(path, to_image8(fb));
  std::cout << "wrote " << path.string() << "\n";
}

void print_metrics(const FrameBuffer& fb, const std::string& reference) {
  if (reference.empty()) return;
  const FrameBuffer ref = from_image8(read_png(reference));
  const FrameBuffer ours = from_image8(to_image8(fb));
  const ImageMetrics m = image_metrics(ours, ref);
  std::cout << "metrics psnr=" << m.psnr << " mae=" << m.mae << " mae255=" << m.mae * 255.0 << "\n";
}

int cmd_scene(const SceneArgs& a) {
  if (a.list) {
    for (const auto& n : canonical_scene_names()) std::cout << n << "\n";
    return kExitOk;
  }
  if (a.name.empty() || a.out.empty()) throw InvalidArgument("scene needs --name and --out");
  const Scene scene = make_canonical_scene(a.name, a.k, a.beta_init, a.beta);
  fs::create_directories(a.out);
  const fs::path path = fs::path(a.out) / "scene.json";
  write_scene(path, scene);
  std::cout << "wrote " << path.string() << " k=" << scene.ksdf.k() << "\n";
  return kExitOk;
}

int cmd_render(const RenderArgs& a) {
  if (a.mode != "volumetric" && a.mode != "shells" && a.mode != "buffers") {
    throw InvalidArgument("--mode must be volumetric, shells or buffers");
  }
  std::optional<Scene> scene;
  if (!a.scene.empty()) {
    scene = read_scene(a.scene);
  } else if (!a.bundle.empty() && fs::exists(fs::path(a.bundle) / "scene.json")) {
    scene = read_scene(fs::path(a.bundle) / "scene.json");
  }
  std::optional<Bundle> bundle;
  if (!a.bundle.empty()) bundle = import_bundle(a.bundle);
  fs::create_directories(a.out);
  const fs::path out(a.out);

  if (a.mode == "volumetric") {
    if (!scene) throw InvalidArgument("volumetric mode needs --scene or a bundle with scene.json");
    RenderConfig rc;
    rc.beta = a.beta;
    rc.n = a.n;
    rc.m = a.m;
    rc.occupancy_resolution = a.occupancy;
    rc.background = scene->background;
    const FrameBuffer fb = render_image_volumetric(make_camera(a, scene->bounds), *scene, rc);
    write_image(out / "volumetric.png", fb);
    print_metrics(fb, a.reference);
    return kExitOk;
  }

  if (!bundle) throw InvalidArgument(a.mode + " mode needs --bundle");
  const Camera cam = make_camera(a, scene ? scene->bounds : mesh_bounds(bundle->shells));
  if (a.mode == "shells") {
    const FrameBuffer fb = ShellRenderer(bundle->shells).render(cam, bundle->textures,
                                                                 bundle->meta.background);
    write_image(out / "shells.png", fb);
    print_metrics(fb, a.reference);
    return kExitOk;
  }
  const auto buffers = render_debug_buffers(cam, bundle->shells, bundle->textures);
  for (std::size_t j = 0; j < buffers.size(); ++j) {
    const std::string p = "layer" + std::to_string(j) + "_";
    write_image(out / (p + "normal.png"), buffers[j].normal);
    write_image(out / (p + "uv.png"), buffers[j].uv);
    write_image(out / (p + "opacity.png"), buffers[j].opacity);
    write_image(out / (p + "color.png"), buffers[j].color);
  }
  return kExitOk;
}

int cmd_bake(BakeArgs a) {
  a.cfg.scene_path = a.scene;
  a.cfg.out_dir = a.out;
  const std::vector<int> res = parse_int_list(a.textures);
  a.cfg.fit.layout.band_resolutions = res;
  a.cfg.fit.layout.degree = static_cast<int>(res.size()) - 1;
  a.cfg.fit.quantize = !a.no_quantize;
  run_bake(a.cfg, &std::cout);
  std::cout << "wrote bundle " << a.out << "\n";
  return kExitOk;
}

int cmd_bench(const BenchConfig& cfg) {
  const BenchResult r = run_bench(cfg);
  for (const BenchEntry& e : r.entries) {
    std::printf("bench frame_ms=%.3f rays_per_s=%.1f k=%d threads=%d\n", e.frame_ms, e.rays_per_s,
                e.k, e.threads);
  }
  std::printf("bench_speedup threads=%d speedup=%.3f\n", r.speedup_threads, r.speedup);
  std::printf("bench_trend monotonic=%d\n", r.monotonic ? 1 : 0);
  return r.monotonic ? kExitOk : kExitFailure;
}

int cmd_validate(const ValidateArgs& a) {
  if (a.list) {
    for (const auto& c : validation_checks()) std::cout << c.name << "  " << c.description << "\n";
    return kExitOk;
  }
  ValidateConfig cfg;
  cfg.scene = a.scene;
  cfg.k = a.k;
  if (!a.bundle.empty()) cfg.bundle = a.bundle;
  cfg.only = a.checks;
  cfg.seed = a.seed;
  bool ok = true;
  for (const CheckOutcome& o : run_validation(cfg)) {
    std::cout << "check name=" << o.name << " status=" << (o.passed ? "pass" : "fail") << " "
              << o.detail << "\n";
    ok = ok && o.passed;
  }
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"volsurf: nested-shell surfaces from volumetric fields"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: VOLSURF_THREADS or all cores)");

  SceneArgs scene_args;
  auto* scene = app.add_subcommand("scene", "Write a canonical test scene");
  scene->add_option("--name", scene_args.name, "fuzzy-sphere | torus-with-halo | two-lobe-blob");
  scene->add_option("--k", scene_args.k, "Number of surfaces");
  scene->add_option("--beta-init", scene_args.beta_init, "Sharpness that sets the shell spacing");
  scene->add_option("--beta", scene_args.beta, "Sharpness stored in the scene");
  scene->add_option("--out", scene_args.out, "Output directory");
  scene->add_flag("--list", scene_args.list, "List scene names");

  RenderArgs render_args;
  auto* render = app.add_subcommand("render", "Render a scene or bundle");
  render->add_option("--mode", render_args.mode, "volumetric | shells | buffers")->required();
  render->add_option("--scene", render_args.scene, "Scene file");
  render->add_option("--bundle", render_args.bundle, "Bundle directory");
  render->add_option("--out", render_args.out, "Output directory")->required();
  render->add_option("--reference", render_args.reference, "PNG to compare against");
  render->add_option("--beta", render_args.beta, "Volumetric sharpness");
  render->add_option("--n", render_args.n, "Uniform samples per ray");
  render->add_option("--m", render_args.m, "Importance samples per ray");
  render->add_option("--occupancy", render_args.occupancy, "Occupancy grid resolution");
  render->add_option("--width", render_args.width, "Image width");
  render->add_option("--height", render_args.height, "Image height");
  render->add_option("--yaw", render_args.yaw, "Camera yaw in degrees");
  render->add_option("--pitch", render_args.pitch, "Camera pitch in degrees");
  render->add_option("--fov", render_args.fov, "Vertical field of view in degrees");
  render->add_option("--distance", render_args.distance, "Camera distance (0 = fit bounds)");

  BakeArgs bake_args;
  auto* bake = app.add_subcommand("bake", "Extract shells, fit textures, write a bundle");
  PipelineConfig& pc = bake_args.cfg;
  bake->add_option("--scene", bake_args.scene, "Scene file")->required();
  bake->add_option("--out", bake_args.out, "Bundle directory")->required();
  bake->add_option("--beta", pc.beta, "Sharpness of the volumetric reference");
  bake->add_option("--n", pc.samples_uniform, "Uniform samples per ray");
  bake->add_option("--m", pc.samples_importance, "Importance samples per ray");
  bake->add_option("--occupancy", pc.occupancy_resolution, "Occupancy grid resolution");
  bake->add_option("--mc-resolution", pc.mc_resolution, "Marching cubes cells per axis");
  bake->add_option("--simplify", pc.simplify_ratio, "Fraction of triangles kept");
  bake->add_option("--atlas", pc.atlas_resolution, "UV atlas resolution");
  bake->add_option("--views", pc.views, "Training views");
  bake->add_option("--view-size", pc.view_size, "Training view size in pixels");
  bake->add_option("--fov", pc.fov_deg, "Training view field of view in degrees");
  bake->add_option("--iterations", pc.fit.iterations, "Fitting iterations");
  bake->add_option("--batch", pc.fit.batch_size, "Rays per iteration (0 = all)");
  bake->add_option("--lr", pc.fit.learning_rate, "Initial learning rate");
  bake->add_option("--textures", bake_args.textures, "Per-band texture resolutions");
  bake->add_flag("--no-quantize", bake_args.no_quantize, "Fit without 8-bit quantization");
  bake->add_flag("--skip-fit", pc.skip_fit, "Keep zero-initialized textures");
  bake->add_option("--seed", pc.seed, "Random seed");

  BenchConfig bench_cfg;
  std::string bench_ks = "3,5,7,9";
  auto* bench = app.add_subcommand("bench", "Time shell rendering for several k");
  bench->add_option("--k", bench_ks, "Comma separated k values");
  bench->add_option("--frames", bench_cfg.frames, "Frames per k");
  bench->add_option("--size", bench_cfg.size, "Frame size in pixels");
  bench->add_option("--mc-resolution", bench_cfg.mc_resolution, "Marching cubes cells per axis");
  bench->add_option("--seed", bench_cfg.seed, "Random seed");

  ValidateArgs validate_args;
  auto* validate = app.add_subcommand("validate", "Run the oracle checks");
  validate->add_option("--scene", validate_args.scene, "Canonical scene name");
  validate->add_option("--k", validate_args.k, "Number of surfaces");
  validate->add_option("--bundle", validate_args.bundle, "Bundle for the sorted-blend check");
  validate->add_option("--check", validate_args.checks, "Run only the named checks");
  validate->add_flag("--list", validate_args.list, "List checks");
  validate->add_option("--seed", validate_args.seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (threads > 0) set_thread_count(threads);
    if (*scene) return cmd_scene(scene_args);
    if (*render) return cmd_render(render_args);
    if (*bake) return cmd_bake(bake_args);
    if (*bench) {
      bench_cfg.ks = parse_int_list(bench_ks);
      bench_cfg.threads = threads;
      return cmd_bench(bench_cfg);
    }
    if (*validate) return cmd_validate(validate_args);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
