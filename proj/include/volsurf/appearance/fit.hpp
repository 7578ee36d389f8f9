// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "volsurf/appearance/texture.hpp"
#include "volsurf/core/camera.hpp"
#include "volsurf/core/image.hpp"
#include "volsurf/meshing/trimesh.hpp"

namespace volsurf {

/// Target image (straight color over the background, alpha = coverage) seen
/// from a known camera.
struct FitTarget {
  Camera camera;
  FrameBuffer image;
};

struct FitConfig {
  int iterations = 2000;
  double learning_rate = 0.02;
  /// Learning rate at the last iteration relative to the first; decays
  /// exponentially in between.
  double final_lr_ratio = 0.01;
  /// Rays per iteration; 0 uses every ray.
  int batch_size = 8192;
  bool quantize = true;
  std::uint64_t seed = 0;
  double clip_norm = 10.0;
  Rgb background{1.0, 1.0, 1.0};
  TextureLayout layout;

  /// Throws InvalidArgument on negative iterations or non-positive rates.
  /// Zero iterations are allowed and leave the initialization unchanged.
  void validate() const;
};

struct FitReport {
  std::vector<double> loss_history;  // minibatch loss per iteration
  int iterations = 0;
  double seconds = 0.0;
};

/// Mean L1 RGBA error of the shell renderer against a fixed set of targets,
/// with gradients derived by hand through blending, attenuation, the final
/// sigmoid, the SH dot product, the rescale, a straight-through quantizer,
/// the texel sigmoid and the bilinear taps. Ray hits are traced once at
/// construction; layer order, early exit and arithmetic order follow the
/// shell renderer exactly.
class TextureFitter {
 public:
  TextureFitter(const ShellSet& shells, const std::vector<FitTarget>& targets,
                const FitConfig& cfg);

  std::size_t ray_count() const { return rays_.size(); }
  std::size_t parameter_count() const { return param_count_; }
  const FitConfig& config() const { return cfg_; }

  /// Loss over every ray. `texset` must have raw storage and the configured
  /// layout; its own quantize flag is used.
  double loss(const ShTextureSet& texset) const;
  /// Loss over every ray and its gradient in flat parameter order.
  double loss_and_gradient(const ShTextureSet& texset, std::vector<double>& grad) const;

  /// Runs cfg.iterations of minibatch Adam from `init`. Throws NumericalError
  /// naming the iteration when the loss becomes non-finite.
  ShTextureSet fit(ShTextureSet init, FitReport* report = nullptr) const;

 private:
  struct Fragment {
    int layer = 0;
    Vec3 v;
    double attenuation = 0.0;
    std::array<std::uint32_t, 16> offsets{};  // [band][tap], flat index of the texel block
    std::array<double, 16> weights{};
  };
  struct RayRecord {
    std::uint32_t first = 0;  // into fragments_
    std::uint32_t count = 0;
    std::array<float, 4> target{};
  };

  /// Squeezed (optionally quantized) texel values and the derivative of the
  /// squeeze, cached per parameter.
  struct TexelCache {
    std::vector<double> unit;
    std::vector<double> slope;
    void update(const std::vector<double>& params, bool quantize, std::size_t i);
  };
  /// Gradient sink: contributions are added in ray order, either straight
  /// into `values` or via per-chunk lists merged in chunk order, which gives
  /// bit-identical sums.
  struct GradSink {
    std::vector<double> values;
    std::vector<std::uint8_t> mark;
    std::vector<std::uint32_t> touched;
    void add(std::uint32_t idx, double g) {
      if (!mark[idx]) {
        mark[idx] = 1;
        touched.push_back(idx);
      }
      values[idx] += g;
    }
  };
  template <typename Emit>
  double eval_ray(const RayRecord& ray, const TexelCache& cache, double grad_scale,
                  bool want_grad, Emit&& emit) const;
  double eval_batch(const std::vector<std::uint32_t>* subset, const TexelCache& cache,
                    GradSink* grad) const;

  FitConfig cfg_;
  std::vector<std::size_t> band_offsets_;  // [layer * (degree+1) + band]
  std::size_t param_count_ = 0;
  std::vector<Fragment> fragments_;
  std::vector<RayRecord> rays_;
};

/// Fits from zero-initialized raw textures.
ShTextureSet fit_textures(const ShellSet& shells, const std::vector<FitTarget>& targets,
                          const FitConfig& cfg, FitReport* report = nullptr);
ShTextureSet fit_textures(const ShellSet& shells, const std::vector<FitTarget>& targets,
                          const FitConfig& cfg, ShTextureSet init, FitReport* report = nullptr);

/// Flat raw parameters of a texture set, in ShTextureSet::parameter order.
std::vector<double> flatten_parameters(const ShTextureSet& texset);
void unflatten_parameters(const std::vector<double>& flat, ShTextureSet& texset);

}  // namespace volsurf
