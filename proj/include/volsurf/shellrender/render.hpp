// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "volsurf/appearance/texture.hpp"
#include "volsurf/core/camera.hpp"
#include "volsurf/core/image.hpp"
#include "volsurf/meshing/trimesh.hpp"
#include "volsurf/shellrender/blend.hpp"
#include "volsurf/shellrender/bvh.hpp"

namespace volsurf {

/// Transmittance below which the remaining layers are skipped.
inline constexpr double kEarlyExitTransmittance = 1.0 / 512.0;

/// Color and opacity of `layer` at a mesh hit seen along `ray`.
using LayerShader = std::function<LayerSample(int layer, const LayerHit& hit, const Ray& ray)>;

/// Texture shader: decode_rgba at the hit uv along the ray direction, alpha
/// scaled by the grazing-angle attenuation.
LayerSample shade_texture(const ShTextureSet& texset, int layer, const LayerHit& hit,
                          const Ray& ray);

/// Shell set with one BVH per layer, ready for repeated queries.
class ShellRenderer {
 public:
  explicit ShellRenderer(ShellSet shells);

  const ShellSet& shells() const { return shells_; }
  int k() const { return shells_.k(); }

  std::optional<LayerHit> first_hit(int layer, const Ray& ray) const;

  /// Layers queried in stored order, blended front to back over `background`.
  Rgba shade_ray(const Ray& ray, const LayerShader& shader, const Rgb& background,
                 bool early_exit = true) const;
  Rgba shade_ray(const Ray& ray, const ShTextureSet& texset, const Rgb& background,
                 bool early_exit = true) const;

  /// Gathers the first hit of every layer, sorts by (t, layer) and blends in
  /// that order with the same accumulator. Reference for the fixed order.
  Rgba shade_ray_sorted(const Ray& ray, const LayerShader& shader, const Rgb& background) const;

  FrameBuffer render(const Camera& camera, const LayerShader& shader, const Rgb& background,
                     bool early_exit = true) const;
  FrameBuffer render(const Camera& camera, const ShTextureSet& texset, const Rgb& background,
                     bool early_exit = true) const;
  FrameBuffer render_sorted(const Camera& camera, const LayerShader& shader,
                            const Rgb& background) const;

 private:
  ShellSet shells_;
  std::vector<Bvh> bvhs_;
};

FrameBuffer render_shells(const Camera& camera, const ShellSet& shells, const ShTextureSet& texset,
                          const Rgb& background);

FrameBuffer oracle_sorted_blend(const Camera& camera, const ShellSet& shells,
                                const ShTextureSet& texset, const Rgb& background);

/// Per-layer debug images. Normals are in view space (x right, y up, z toward
/// the camera) encoded as 0.5 n + 0.5; uv is (u, v, 0, 1); opacity is the
/// attenuated alpha replicated to RGB; color is premultiplied by that alpha.
/// Missed pixels are zero.
struct LayerBuffers {
  FrameBuffer normal;
  FrameBuffer uv;
  FrameBuffer opacity;
  FrameBuffer color;
};

std::vector<LayerBuffers> render_debug_buffers(const Camera& camera, const ShellSet& shells,
                                               const ShTextureSet& texset);

struct ImageMetrics {
  double psnr = 0.0;  // dB over RGB, capped at kPsnrCap
  double mae = 0.0;   // mean absolute RGB error
};

inline constexpr double kPsnrCap = 100.0;

/// Throws InvalidArgument when the sizes differ.
ImageMetrics image_metrics(const FrameBuffer& a, const FrameBuffer& b);

}  // namespace volsurf
