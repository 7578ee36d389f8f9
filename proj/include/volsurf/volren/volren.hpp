// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "volsurf/core/camera.hpp"
#include "volsurf/core/image.hpp"
#include "volsurf/fields/ksdf.hpp"
#include "volsurf/fields/scene.hpp"
#include "volsurf/volren/appearance_field.hpp"

namespace volsurf {

/// Binary occupancy over a box, one bit per voxel, x fastest.
struct OccupancyGrid {
  int resolution = 0;
  Aabb bbox;
  std::vector<std::uint8_t> bits;

  Vec3 voxel_size() const { return bbox.extent() / static_cast<double>(resolution); }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * resolution + j) * resolution + i;
  }
  bool occupied(int i, int j, int k) const { return bits[index(i, j, k)] != 0; }
  /// Voxel containing x, clamped to the grid.
  std::array<int, 3> voxel_of(const Vec3& x) const;
  /// False outside the box.
  bool occupied_at(const Vec3& x) const;
  std::size_t occupied_count() const;
};

/// Marks voxel v when, for some layer j, logistic_density(beta,
/// max(0, |d_j(center)| - half_diagonal)) >= tau.
OccupancyGrid build_occupancy(const KSdf& k, const Aabb& bbox, double beta, int resolution = 256,
                              double tau = 1e-4);

/// |d| at which logistic_density(beta, d) falls to tau; 0 when beta/4 < tau.
double density_support_radius(double beta, double tau);

/// Ordered samples along one ray.
struct SampleSet {
  std::vector<double> t;
  std::vector<Vec3> x;
  int uniform_count = 0;
  int importance_count = 0;

  std::size_t size() const { return t.size(); }
  bool empty() const { return t.empty(); }
};

/// Occupied parametric intervals [t0, t1] along the ray, in order, adjacent
/// voxels merged.
std::vector<std::array<double, 2>> occupied_intervals(const Ray& ray, const OccupancyGrid& grid);

/// n samples spread evenly over the union of occupied intervals, first and
/// last at its ends. With a jitter seed each sample is instead drawn uniformly
/// within its stratum. Empty when the ray misses every occupied voxel.
SampleSet sample_uniform(const Ray& ray, const OccupancyGrid& grid, int n,
                         std::optional<std::uint64_t> jitter_seed = std::nullopt);

/// Per-sample weights of one layer from its signed distances at the samples:
/// a_i = clamp(1 - S(beta d_{i+1}) / S(beta d_i), 0, 1), a_last = 0,
/// w_i = a_i prod_{l<i} (1 - a_l).
void surface_weights_layer(std::span<const double> d, double beta, std::span<double> w);

/// Weights for all layers. `layer_d` holds k distances per sample (sample
/// major); the result uses the same layout.
std::vector<double> surface_weights(std::span<const double> layer_d, int k, double beta);

/// One round of inverse-CDF resampling: `count` stratified draws, the s-th at
/// quantile (s + stratum_offset) / count of the summed per-layer weights at
/// `beta`, merged into `cur`. `d` holds the k distances per sample and is
/// updated alongside. An all-zero weight sum falls back to a uniform CDF over
/// the current span. Returns the number of samples added.
int importance_round(const Ray& ray, const KSdf& k, SampleSet& cur, std::vector<double>& d, int count,
                     double beta, double stratum_offset = 0.5);

/// Two rounds of inverse-CDF resampling, each adding m/2 samples drawn from the
/// normalized sum of per-layer interval weights; round one uses beta/2, round
/// two beta. `layer_d`, when given, receives the k distances at every final
/// sample (sample major).
SampleSet importance_resample(const Ray& ray, const KSdf& k, const SampleSet& base, int m,
                              double beta, std::vector<double>* layer_d = nullptr);

struct RenderConfig {
  int n = 64;
  int m = 64;
  double beta = 4096.0;
  Rgb background{1.0, 1.0, 1.0};
  double tau = 1e-4;
  int occupancy_resolution = 256;
  /// Stratified jitter of the uniform stage; off gives evenly spaced samples.
  bool jitter = false;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument unless n >= 2, m >= 0 even, beta > 0, tau in (0,1).
  void validate() const;
};

/// Samples, layer distances and weights of one ray, shared by the layer and
/// composite renderers.
struct RayEvaluation {
  SampleSet samples;
  int k = 0;
  std::vector<double> layer_d;  // sample major, k per sample
  std::vector<double> weights;  // same layout
};

RayEvaluation evaluate_ray(const Ray& ray, const KSdf& k, const OccupancyGrid& grid,
                           const RenderConfig& cfg, std::uint64_t pixel = 0);

struct LayerRadiance {
  Rgb color;           // C_j = sum_i w_ij xi(x_i, v, n_ij)
  double alpha = 0.0;  // A_j = sum_i w_ij alpha(x_i, v, n_ij)
};

LayerRadiance render_layer(const Ray& ray, const KSdf& k, int layer, const AppearanceField& app,
                           const RayEvaluation& eval);
LayerRadiance render_layer(const Ray& ray, const KSdf& k, int layer, const AppearanceField& app,
                           const OccupancyGrid& grid, const RenderConfig& cfg);

/// Composites the k layers front to back, outermost first, over
/// cfg.background. Alpha is the total coverage 1 - prod_j (1 - A_j).
Rgba render_volumetric(const Ray& ray, const KSdf& k, const AppearanceField& app,
                       const OccupancyGrid& grid, const RenderConfig& cfg, std::uint64_t pixel = 0);

/// Renders every pixel; builds the occupancy grid when none is given.
FrameBuffer render_image_volumetric(const Camera& camera, const Scene& scene,
                                    const RenderConfig& cfg,
                                    const OccupancyGrid* grid = nullptr);

}  // namespace volsurf
