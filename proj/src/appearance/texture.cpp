// SPDX-License-Identifier: Apache-2.0
#include "volsurf/appearance/texture.hpp"

#include <algorithm>
#include <string>

#include "volsurf/core/error.hpp"
#include "volsurf/fields/kernels.hpp"

namespace volsurf {
namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace

ShTexture ShTexture::zeros(int band, int width, int height) {
  if (band < 0 || band > kMaxShDegree) throw InvalidArgument("SH band must be in [0, 3]");
  if (!is_power_of_two(width) || !is_power_of_two(height)) {
    throw InvalidArgument("texture size must be a power of two");
  }
  ShTexture t;
  t.band = band;
  t.width = width;
  t.height = height;
  t.values.assign(static_cast<std::size_t>(width) * height * t.block_size(), 0.0);
  return t;
}

void TextureLayout::validate() const {
  if (degree < 0 || degree > kMaxShDegree) throw InvalidArgument("SH degree must be in [0, 3]");
  if (static_cast<int>(band_resolutions.size()) < degree + 1) {
    throw InvalidArgument("need one texture resolution per SH band");
  }
  for (int b = 0; b <= degree; ++b) {
    if (!is_power_of_two(band_resolutions[b])) {
      throw InvalidArgument("band " + std::to_string(b) + " resolution must be a power of two");
    }
    if (b > 0 && band_resolutions[b] > band_resolutions[b - 1]) {
      throw InvalidArgument("band resolutions must not increase with band index");
    }
  }
  if (!(v_max > v_min)) throw InvalidArgument("value range must satisfy v_min < v_max");
}

ShTextureSet ShTextureSet::zeros(int k, const TextureLayout& layout, bool quantize) {
  layout.validate();
  if (k < 1) throw InvalidArgument("k must be in [1,9]");
  ShTextureSet set;
  set.degree = layout.degree;
  set.v_min = layout.v_min;
  set.v_max = layout.v_max;
  set.quantize = quantize;
  set.layers.resize(k);
  for (auto& bands : set.layers) {
    for (int b = 0; b <= layout.degree; ++b) {
      const int r = layout.band_resolutions[b];
      bands.push_back(ShTexture::zeros(b, r, r));
    }
  }
  return set;
}

TextureLayout ShTextureSet::layout() const {
  TextureLayout l;
  l.degree = degree;
  l.v_min = v_min;
  l.v_max = v_max;
  l.band_resolutions.clear();
  if (!layers.empty()) {
    for (const auto& t : layers[0]) l.band_resolutions.push_back(t.width);
  }
  return l;
}

void ShTextureSet::validate() const {
  if (degree < 0 || degree > kMaxShDegree) throw InvalidArgument("SH degree must be in [0, 3]");
  if (!(v_max > v_min)) throw InvalidArgument("value range must satisfy v_min < v_max");
  for (std::size_t j = 0; j < layers.size(); ++j) {
    const auto& bands = layers[j];
    if (static_cast<int>(bands.size()) != degree + 1) {
      throw InvalidArgument("layer " + std::to_string(j) + " must have one texture per SH band");
    }
    for (int b = 0; b <= degree; ++b) {
      const ShTexture& t = bands[b];
      if (t.band != b) throw InvalidArgument("texture band index mismatch");
      if (!is_power_of_two(t.width) || !is_power_of_two(t.height)) {
        throw InvalidArgument("texture size must be a power of two");
      }
      if (b > 0 && (t.width > bands[b - 1].width || t.height > bands[b - 1].height)) {
        throw InvalidArgument("band resolutions must not increase with band index");
      }
      if (t.values.size() != static_cast<std::size_t>(t.width) * t.height * t.block_size()) {
        throw InvalidArgument("texture value count does not match its size");
      }
    }
  }
}

std::size_t ShTextureSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& bands : layers) {
    for (const auto& t : bands) n += t.values.size();
  }
  return n;
}

std::size_t ShTextureSet::parameter_offset(int layer, int band) const {
  std::size_t n = 0;
  for (int j = 0; j < k(); ++j) {
    for (int b = 0; b < static_cast<int>(layers[j].size()); ++b) {
      if (j == layer && b == band) return n;
      n += layers[j][b].values.size();
    }
  }
  throw InvalidArgument("texture index out of range");
}

double& ShTextureSet::parameter(std::size_t flat) {
  for (auto& bands : layers) {
    for (auto& t : bands) {
      if (flat < t.values.size()) return t.values[flat];
      flat -= t.values.size();
    }
  }
  throw InvalidArgument("parameter index out of range");
}

double ShTextureSet::parameter(std::size_t flat) const {
  return const_cast<ShTextureSet*>(this)->parameter(flat);
}

double texel_unit_value(double stored, TexelStorage storage, bool quantize_values) {
  if (storage == TexelStorage::unit) return stored;
  const double s = sigmoid(stored);
  return quantize_values ? quantize(s) : s;
}

BilinearTaps bilinear_taps(int width, int height, const Vec2& uv) {
  const double fx = uv.x * width - 0.5;
  const double fy = uv.y * height - 0.5;
  const double x0f = std::floor(fx);
  const double y0f = std::floor(fy);
  const double tx = fx - x0f;
  const double ty = fy - y0f;
  auto clampi = [](double v, int n) { return static_cast<int>(std::clamp(v, 0.0, static_cast<double>(n - 1))); };
  const int x0 = clampi(x0f, width), x1 = clampi(x0f + 1.0, width);
  const int y0 = clampi(y0f, height), y1 = clampi(y0f + 1.0, height);
  BilinearTaps t;
  t.x = {x0, x1, x0, x1};
  t.y = {y0, y0, y1, y1};
  t.w = {(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty};
  return t;
}

std::vector<double> sample_bilinear(const ShTexture& tex, const Vec2& uv) {
  const BilinearTaps taps = bilinear_taps(tex.width, tex.height, uv);
  const std::size_t n = tex.block_size();
  std::vector<double> out(n, 0.0);
  for (int q = 0; q < 4; ++q) {
    const std::size_t base = tex.texel_offset(taps.x[q], taps.y[q]);
    for (std::size_t i = 0; i < n; ++i) out[i] += taps.w[q] * tex.values[base + i];
  }
  return out;
}

std::vector<double> decode_coefficients(std::span<const double> raw, double v_min, double v_max,
                                        bool quantize_values) {
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = v_min + (v_max - v_min) * texel_unit_value(raw[i], TexelStorage::raw, quantize_values);
  }
  return out;
}

std::vector<double> decode_block(const ShTextureSet& texset, int layer, const Vec2& uv) {
  if (layer < 0 || layer >= texset.k()) throw InvalidArgument("layer index out of range");
  std::vector<double> block(static_cast<std::size_t>(sh_coefficient_count(texset.degree)) * 4, 0.0);
  const double range = texset.v_max - texset.v_min;
  for (int b = 0; b <= texset.degree; ++b) {
    const ShTexture& tex = texset.layers[layer][b];
    const BilinearTaps taps = bilinear_taps(tex.width, tex.height, uv);
    const std::size_t n = tex.block_size();
    const std::size_t dst = static_cast<std::size_t>(sh_band_offset(b)) * 4;
    for (std::size_t i = 0; i < n; ++i) {
      double u = 0.0;
      for (int q = 0; q < 4; ++q) {
        const double s = tex.values[tex.texel_offset(taps.x[q], taps.y[q]) + i];
        u += taps.w[q] * texel_unit_value(s, tex.storage, texset.quantize);
      }
      block[dst + i] = texset.v_min + range * u;
    }
  }
  return block;
}

Rgba decode_rgba(const ShTextureSet& texset, int layer, const Vec2& uv, const UnitVec3& v) {
  const std::vector<double> block = decode_block(texset, layer, uv);
  std::array<double, kMaxShCoefficients> basis{};
  sh_basis(texset.degree, v.vec(), basis);
  double s[4] = {0, 0, 0, 0};
  const int n = sh_coefficient_count(texset.degree);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < 4; ++c) s[c] += block[static_cast<std::size_t>(i) * 4 + c] * basis[i];
  }
  return {sigmoid(s[0]), sigmoid(s[1]), sigmoid(s[2]), sigmoid(s[3])};
}

}  // namespace volsurf
