// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "volsurf/appearance/sh.hpp"
#include "volsurf/core/vec.hpp"

namespace volsurf {

/// Texel values are either raw (pre-sigmoid, being fitted) or unit (squeezed
/// and quantized, as loaded from baked images).
enum class TexelStorage { raw, unit };

/// One SH band of one layer: W x H texels, each holding RGBA for the band's
/// 2l+1 coefficients. Layout is texel major, then coefficient, then channel.
struct ShTexture {
  int band = 0;
  int width = 0;
  int height = 0;
  TexelStorage storage = TexelStorage::raw;
  std::vector<double> values;

  static ShTexture zeros(int band, int width, int height);

  int coefficients() const { return sh_band_size(band); }
  std::size_t block_size() const { return static_cast<std::size_t>(coefficients()) * 4; }
  std::size_t texel_offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width + x) * block_size();
  }
};

/// Resolution and value range of a texture set.
struct TextureLayout {
  int degree = 3;
  std::vector<int> band_resolutions{256, 128, 64, 32};
  double v_min = -15.0;
  double v_max = 15.0;

  /// Production resolutions, eight times the defaults per axis.
  static TextureLayout full_resolution() { return {3, {2048, 1024, 512, 256}, -15.0, 15.0}; }
  /// Throws InvalidArgument on a degree outside [0,3], too few or non power of
  /// two resolutions, resolutions increasing with band, or an empty range.
  void validate() const;
};

/// Per-layer, per-band textures plus the global value range. `quantize`
/// selects whether raw texels are rounded to 8 bits when decoded.
struct ShTextureSet {
  int degree = 3;
  double v_min = -15.0;
  double v_max = 15.0;
  bool quantize = true;
  std::vector<std::vector<ShTexture>> layers;  // [layer][band]

  static ShTextureSet zeros(int k, const TextureLayout& layout, bool quantize = true);

  int k() const { return static_cast<int>(layers.size()); }
  TextureLayout layout() const;
  void validate() const;

  /// Flat parameter indexing over all layers and bands, in storage order.
  std::size_t parameter_count() const;
  std::size_t parameter_offset(int layer, int band) const;
  double& parameter(std::size_t flat);
  double parameter(std::size_t flat) const;
};

/// Rounds 255x half away from zero, divided by 255.
inline double quantize(double x) { return std::round(255.0 * x) / 255.0; }

/// Unit-range value of one stored texel component.
double texel_unit_value(double stored, TexelStorage storage, bool quantize);

/// Four texel taps around uv with texel i centered at (i + 0.5) / W, clamped
/// to the edge. Weights sum to one.
struct BilinearTaps {
  std::array<int, 4> x{};
  std::array<int, 4> y{};
  std::array<double, 4> w{};
};
BilinearTaps bilinear_taps(int width, int height, const Vec2& uv);

/// Bilinear interpolation of the stored values of `tex` at uv.
std::vector<double> sample_bilinear(const ShTexture& tex, const Vec2& uv);

/// sigmoid, optional quantization, then rescale to [v_min, v_max], elementwise.
std::vector<double> decode_coefficients(std::span<const double> raw, double v_min, double v_max,
                                        bool quantize);

/// RGBA of `layer` at uv seen along v: per band, bilinear interpolation of the
/// squeezed (and quantized) texels, rescale, dot with the SH basis of v, then a
/// sigmoid per channel.
Rgba decode_rgba(const ShTextureSet& texset, int layer, const Vec2& uv, const UnitVec3& v);

/// Decoded coefficient block (degree+1)^2 x RGBA at uv, before the SH dot.
std::vector<double> decode_block(const ShTextureSet& texset, int layer, const Vec2& uv);

}  // namespace volsurf
