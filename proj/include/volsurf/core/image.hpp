// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "volsurf/core/vec.hpp"

namespace volsurf {

/// RGBA image in float working precision, row-major, top row first.
struct FrameBuffer {
  int width = 0;
  int height = 0;
  std::vector<float> rgba;

  FrameBuffer() = default;
  FrameBuffer(int w, int h, const Rgba& fill = {});

  std::size_t index(int x, int y) const { return (static_cast<std::size_t>(y) * width + x) * 4; }
  Rgba at(int x, int y) const;
  void set(int x, int y, const Rgba& c);
  bool all_finite() const;
};

/// 8-bit RGBA image, row-major, top row first.
struct Image8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgba;
};

/// round(255 * clamp(v, 0, 1)), half away from zero.
std::uint8_t to_unorm8(double v);

Image8 to_image8(const FrameBuffer& fb);
FrameBuffer from_image8(const Image8& img);

void write_png(const std::filesystem::path& path, const Image8& img);
Image8 read_png(const std::filesystem::path& path);

/// Flat float dump: 8-byte magic "VSRAWF32", then uint32 width, height,
/// channels, then width*height*channels little-endian float32, row-major.
void write_raw_float(const std::filesystem::path& path, const FrameBuffer& fb);
FrameBuffer read_raw_float(const std::filesystem::path& path);

}  // namespace volsurf
