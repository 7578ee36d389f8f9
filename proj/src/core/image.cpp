// SPDX-License-Identifier: Apache-2.0
#include "volsurf/core/image.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "volsurf/core/error.hpp"

namespace volsurf {

FrameBuffer::FrameBuffer(int w, int h, const Rgba& fill) : width(w), height(h) {
  if (w < 0 || h < 0) throw InvalidArgument("negative image size");
  rgba.resize(static_cast<std::size_t>(w) * h * 4);
  for (std::size_t i = 0; i < rgba.size(); i += 4) {
    rgba[i + 0] = static_cast<float>(fill.r);
    rgba[i + 1] = static_cast<float>(fill.g);
    rgba[i + 2] = static_cast<float>(fill.b);
    rgba[i + 3] = static_cast<float>(fill.a);
  }
}

Rgba FrameBuffer::at(int x, int y) const {
  const std::size_t i = index(x, y);
  return {rgba[i], rgba[i + 1], rgba[i + 2], rgba[i + 3]};
}

void FrameBuffer::set(int x, int y, const Rgba& c) {
  const std::size_t i = index(x, y);
  rgba[i + 0] = static_cast<float>(c.r);
  rgba[i + 1] = static_cast<float>(c.g);
  rgba[i + 2] = static_cast<float>(c.b);
  rgba[i + 3] = static_cast<float>(c.a);
}

bool FrameBuffer::all_finite() const {
  return std::all_of(rgba.begin(), rgba.end(), [](float v) { return std::isfinite(v); });
}

std::uint8_t to_unorm8(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 1.0) return 255;
  return static_cast<std::uint8_t>(std::round(v * 255.0));
}

Image8 to_image8(const FrameBuffer& fb) {
  Image8 img{fb.width, fb.height, std::vector<std::uint8_t>(fb.rgba.size())};
  std::transform(fb.rgba.begin(), fb.rgba.end(), img.rgba.begin(),
                 [](float v) { return to_unorm8(v); });
  return img;
}

FrameBuffer from_image8(const Image8& img) {
  FrameBuffer fb(img.width, img.height);
  std::transform(img.rgba.begin(), img.rgba.end(), fb.rgba.begin(),
                 [](std::uint8_t v) { return static_cast<float>(v / 255.0); });
  return fb;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// libpng reports errors via longjmp, so these two helpers keep no objects with
// non-trivial destructors alive between setjmp and the libpng calls.
bool png_write_rows(std::FILE* file, const Image8& img) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, file);
  // Fixed settings keep the byte stream identical across runs.
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_NONE);
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGBA, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    png_write_row(png, img.rgba.data() + static_cast<std::size_t>(y) * img.width * 4);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

bool png_read_rows(std::FILE* file, Image8& img) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, file);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  const bool trns = png_get_valid(png, info, PNG_INFO_tRNS) != 0;
  if (trns) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (!(color & PNG_COLOR_MASK_ALPHA) && !trns) png_set_filler(png, 0xFF, PNG_FILLER_AFTER);
  png_read_update_info(png, info);
  if (png_get_rowbytes(png, info) != static_cast<std::size_t>(w) * 4) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }

  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.rgba.resize(static_cast<std::size_t>(w) * h * 4);
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, img.rgba.data() + static_cast<std::size_t>(y) * w * 4, nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image8& img) {
  if (img.width <= 0 || img.height <= 0) throw InvalidArgument("cannot write an empty PNG");
  if (img.rgba.size() != static_cast<std::size_t>(img.width) * img.height * 4) {
    throw InvalidArgument("image buffer does not match its size");
  }
  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw IoError("cannot open " + path.string() + " for writing");
  if (!png_write_rows(file.get(), img)) throw IoError("libpng failed writing " + path.string());
}

Image8 read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw IoError("cannot open " + path.string());
  std::array<unsigned char, 8> sig{};
  if (std::fread(sig.data(), 1, sig.size(), file.get()) != sig.size() ||
      png_sig_cmp(sig.data(), 0, sig.size()) != 0) {
    throw FormatError(path.string() + ": not a PNG file");
  }
  Image8 img;
  if (!png_read_rows(file.get(), img)) throw FormatError(path.string() + ": corrupt PNG");
  return img;
}

namespace {

constexpr char kRawMagic[8] = {'V', 'S', 'R', 'A', 'W', 'F', '3', '2'};

void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated raw float header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_raw_float(const std::filesystem::path& path, const FrameBuffer& fb) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kRawMagic, sizeof(kRawMagic));
  put_u32(os, static_cast<std::uint32_t>(fb.width));
  put_u32(os, static_cast<std::uint32_t>(fb.height));
  put_u32(os, 4);
  for (float v : fb.rgba) put_u32(os, std::bit_cast<std::uint32_t>(v));
  if (!os) throw IoError("failed writing " + path.string());
}

FrameBuffer read_raw_float(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kRawMagic, 8) != 0) {
    throw FormatError(path.string() + ": bad raw float magic");
  }
  const std::uint32_t w = get_u32(is);
  const std::uint32_t h = get_u32(is);
  const std::uint32_t c = get_u32(is);
  if (c != 4) throw FormatError("raw float dump must have 4 channels");
  FrameBuffer fb(static_cast<int>(w), static_cast<int>(h));
  for (float& v : fb.rgba) v = std::bit_cast<float>(get_u32(is));
  return fb;
}

}  // namespace volsurf
