// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "volsurf/appearance/fit.hpp"
#include "volsurf/fields/scene.hpp"
#include "volsurf/meshing/shells.hpp"

namespace volsurf {

/// Settings for scene -> shells -> fitted textures -> bundle.
struct PipelineConfig {
  std::filesystem::path scene_path;
  std::filesystem::path out_dir;
  double beta = 4096.0;              // volumetric reference sharpness
  int occupancy_resolution = 256;
  int samples_uniform = 64;
  int samples_importance = 64;
  int mc_resolution = 128;
  double simplify_ratio = 0.05;
  int atlas_resolution = 256;
  int views = 32;
  int view_size = 64;
  double fov_deg = 40.0;
  bool skip_fit = false;
  std::uint64_t seed = 0;
  FitConfig fit;

  void validate() const;
};

/// Cameras on a Fibonacci sphere around the scene, far enough that the
/// bounds fit inside the field of view.
std::vector<Camera> training_cameras(const Scene& scene, int count, int size, double fov_deg);

/// Default viewpoint for a scene: yaw 30, pitch 20, same distance rule.
Camera default_camera(const Scene& scene, int width, int height, double fov_deg = 40.0);

struct StageTiming {
  std::string name;
  double seconds = 0.0;
};

struct BakeResult {
  std::vector<StageTiming> stages;
  std::vector<double> training_psnr;  // bundle renders vs volumetric references
  ShellReport shells;
  FitReport fit;
};

/// Runs the pipeline and writes the bundle (plus scene.json) into
/// cfg.out_dir. Training-view PSNR is measured on the re-imported bundle.
BakeResult run_bake(const PipelineConfig& cfg, std::ostream* log = nullptr);

struct BenchConfig {
  std::vector<int> ks{3, 5, 7, 9};
  int frames = 8;
  int size = 128;
  int mc_resolution = 64;
  int threads = 0;  // 0 = default worker count
  std::uint64_t seed = 0;
};

struct BenchEntry {
  int k = 0;
  int threads = 0;
  double frame_ms = 0.0;
  double rays_per_s = 0.0;
};

struct BenchResult {
  std::vector<BenchEntry> entries;
  bool monotonic = false;  // frame time strictly increasing with k
  double speedup = 1.0;    // first k, one thread vs `threads`
  int speedup_threads = 1;
};

/// Shell renders of the canonical fuzzy sphere over an orbit, per k. Frame
/// time is the median over frames.
BenchResult run_bench(const BenchConfig& cfg);

/// Oracle checks exposed by `volsurf validate`.
struct ValidationCheck {
  std::string name;
  std::string description;
};
struct CheckOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};
struct ValidateConfig {
  std::string scene = "fuzzy-sphere";
  int k = 3;
  std::optional<std::filesystem::path> bundle;
  std::vector<std::string> only;  // empty = all checks
  std::uint64_t seed = 0;
};

std::vector<ValidationCheck> validation_checks();
std::vector<CheckOutcome> run_validation(const ValidateConfig& cfg);

}  // namespace volsurf
