// SPDX-License-Identifier: Apache-2.0
#include "volsurf/appearance/bake.hpp"

#include <string>

#include "volsurf/core/error.hpp"

namespace volsurf {

std::vector<BakedLayer> bake_textures(const ShTextureSet& texset) {
  texset.validate();
  std::vector<BakedLayer> out(texset.layers.size());
  for (std::size_t j = 0; j < texset.layers.size(); ++j) {
    for (const ShTexture& tex : texset.layers[j]) {
      const int c = tex.coefficients();
      for (int m = 0; m < c; ++m) {
        Image8 img;
        img.width = tex.width;
        img.height = tex.height;
        img.rgba.resize(static_cast<std::size_t>(tex.width) * tex.height * 4);
        for (int y = 0; y < tex.height; ++y) {
          for (int x = 0; x < tex.width; ++x) {
            const std::size_t src = tex.texel_offset(x, y) + static_cast<std::size_t>(m) * 4;
            const std::size_t dst = (static_cast<std::size_t>(y) * tex.width + x) * 4;
            for (int ch = 0; ch < 4; ++ch) {
              img.rgba[dst + ch] = to_unorm8(texel_unit_value(tex.values[src + ch], tex.storage, true));
            }
          }
        }
        out[j].push_back(std::move(img));
      }
    }
  }
  return out;
}

ShTextureSet load_baked_textures(const std::vector<BakedLayer>& baked, int degree, double v_min,
                                 double v_max) {
  if (degree < 0 || degree > kMaxShDegree) throw InvalidArgument("SH degree must be in [0, 3]");
  ShTextureSet set;
  set.degree = degree;
  set.v_min = v_min;
  set.v_max = v_max;
  set.quantize = true;
  const int n = sh_coefficient_count(degree);
  for (std::size_t j = 0; j < baked.size(); ++j) {
    const BakedLayer& images = baked[j];
    if (static_cast<int>(images.size()) != n) {
      throw FormatError("layer " + std::to_string(j) + ": expected " + std::to_string(n) +
                        " coefficient images, found " + std::to_string(images.size()));
    }
    std::vector<ShTexture> bands;
    for (int b = 0; b <= degree; ++b) {
      const Image8& first = images[sh_band_offset(b)];
      ShTexture tex = ShTexture::zeros(b, first.width, first.height);
      tex.storage = TexelStorage::unit;
      for (int m = 0; m < tex.coefficients(); ++m) {
        const Image8& img = images[sh_band_offset(b) + m];
        if (img.width != tex.width || img.height != tex.height) {
          throw FormatError("layer " + std::to_string(j) + " coefficient " +
                            std::to_string(sh_band_offset(b) + m) +
                            ": size differs from the rest of its band");
        }
        for (int y = 0; y < tex.height; ++y) {
          for (int x = 0; x < tex.width; ++x) {
            const std::size_t src = (static_cast<std::size_t>(y) * tex.width + x) * 4;
            const std::size_t dst = tex.texel_offset(x, y) + static_cast<std::size_t>(m) * 4;
            for (int ch = 0; ch < 4; ++ch) tex.values[dst + ch] = img.rgba[src + ch] / 255.0;
          }
        }
      }
      bands.push_back(std::move(tex));
    }
    set.layers.push_back(std::move(bands));
  }
  set.validate();
  return set;
}

}  // namespace volsurf
