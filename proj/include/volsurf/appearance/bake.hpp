// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "volsurf/appearance/texture.hpp"
#include "volsurf/core/image.hpp"

namespace volsurf {

/// Baked images of one layer: image i holds coefficient i (RGBA) at the
/// native resolution of its band, texel row y stored as image row y.
using BakedLayer = std::vector<Image8>;

/// Squeezes and quantizes every texel to 8 bits. Returns one BakedLayer of
/// (degree+1)^2 images per layer.
std::vector<BakedLayer> bake_textures(const ShTextureSet& texset);

/// Rebuilds a texture set with unit storage from baked images. Decoding the
/// result matches decoding the source set with quantization enabled exactly.
ShTextureSet load_baked_textures(const std::vector<BakedLayer>& baked, int degree, double v_min,
                                 double v_max);

}  // namespace volsurf
