#pragma once

// PNG raster I/O on top of libpng. Link with PNG::PNG.

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "error.hpp"
#include "tensor.hpp"

namespace pyrdepth {

/// Decoded PNG: interleaved samples, row-major, 8- or 16-bit.
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;  // width * height * channels
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) throw IoError(concat("cannot open '", path.string(), "'"));
  return f;
}

// libpng reports errors through longjmp; these helpers keep every C++ object
// outside the jump region.
inline bool png_decode(std::FILE* fp, Raster& out, std::vector<png_bytep>& rows, std::vector<std::uint8_t>& bytes,
                       std::string& err) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    err = "libpng allocation failed";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    err = "corrupt or unsupported PNG";
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.bit_depth = png_get_bit_depth(png, info);
  out.channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  bytes.resize(stride * static_cast<std::size_t>(out.height));
  rows.resize(static_cast<std::size_t>(out.height));
  for (int y = 0; y < out.height; ++y) rows[y] = bytes.data() + stride * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

inline bool png_encode(std::FILE* fp, int width, int height, int channels, int bit_depth,
                       std::vector<png_bytep>& rows, std::string& err) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    err = "libpng allocation failed";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    err = "PNG encoding failed";
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace detail

inline Raster read_png(const std::filesystem::path& path) {
  auto fp = detail::open_file(path, "rb");
  Raster r;
  std::vector<png_bytep> rows;
  std::vector<std::uint8_t> bytes;
  std::string err;
  if (!detail::png_decode(fp.get(), r, rows, bytes, err)) throw IoError(concat("'", path.string(), "': ", err));
  if (r.channels != 1 && r.channels != 3) {
    throw IoError(concat("'", path.string(), "': unsupported channel count ", r.channels));
  }
  const std::size_t n = static_cast<std::size_t>(r.width) * r.height * r.channels;
  r.samples.resize(n);
  if (r.bit_depth == 16) {
    for (std::size_t i = 0; i < n; ++i) r.samples[i] = static_cast<std::uint16_t>((bytes[2 * i] << 8) | bytes[2 * i + 1]);
  } else {
    for (std::size_t i = 0; i < n; ++i) r.samples[i] = bytes[i];
  }
  return r;
}

inline void write_png(const std::filesystem::path& path, const Raster& r) {
  if (r.channels != 1 && r.channels != 3) throw ArgumentError("write_png: channels must be 1 or 3");
  if (r.bit_depth != 8 && r.bit_depth != 16) throw ArgumentError("write_png: bit depth must be 8 or 16");
  const std::size_t n = static_cast<std::size_t>(r.width) * r.height * r.channels;
  if (r.samples.size() != n) throw ShapeError("write_png: sample count does not match dimensions");
  const int bps = r.bit_depth / 8;
  std::vector<std::uint8_t> bytes(n * bps);
  for (std::size_t i = 0; i < n; ++i) {
    if (bps == 2) {
      bytes[2 * i] = static_cast<std::uint8_t>(r.samples[i] >> 8);
      bytes[2 * i + 1] = static_cast<std::uint8_t>(r.samples[i] & 0xff);
    } else {
      bytes[i] = static_cast<std::uint8_t>(r.samples[i]);
    }
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(r.height));
  const std::size_t stride = static_cast<std::size_t>(r.width) * r.channels * bps;
  for (int y = 0; y < r.height; ++y) rows[y] = bytes.data() + stride * y;
  auto fp = detail::open_file(path, "wb");
  std::string err;
  if (!detail::png_encode(fp.get(), r.width, r.height, r.channels, r.bit_depth, rows, err)) {
    throw IoError(concat("'", path.string(), "': ", err));
  }
  if (std::fflush(fp.get()) != 0) throw IoError(concat("write failed for '", path.string(), "'"));
}

/// Any PNG as a (1, 3, H, W) tensor in [0, 1]; gray is replicated.
inline Tensor read_rgb_image(const std::filesystem::path& path) {
  const Raster r = read_png(path);
  const float scale = r.bit_depth == 16 ? 1.0f / 65535.0f : 1.0f / 255.0f;
  Tensor t({1, 3, r.height, r.width});
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const int src = r.channels == 1 ? 0 : c;
        t(0, c, y, x) = r.samples[(static_cast<std::size_t>(y) * r.width + x) * r.channels + src] * scale;
      }
  return t;
}

/// Writes an RGB tensor in [0, 1] as 8-bit PNG.
inline void write_rgb_image(const std::filesystem::path& path, const Tensor& image) {
  if (image.channels() != 3) throw ShapeError(concat("write_rgb_image: expected 3 channels, got ", image.shape()));
  Raster r{image.width(), image.height(), 3, 8, {}};
  r.samples.resize(static_cast<std::size_t>(r.width) * r.height * 3);
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(image(0, c, y, x), 0.0f, 1.0f);
        r.samples[(static_cast<std::size_t>(y) * r.width + x) * 3 + c] = static_cast<std::uint16_t>(std::lround(v * 255.0f));
      }
  write_png(path, r);
}

/// 16-bit single-channel raster storing value * 256 (saturating). Used for
/// both disparity (pixels) and depth (meters) maps; zero marks invalid.
inline void write_scaled16(const std::filesystem::path& path, const Tensor& map) {
  if (map.channels() != 1) throw ShapeError(concat("write_scaled16: expected 1 channel, got ", map.shape()));
  Raster r{map.width(), map.height(), 1, 16, {}};
  r.samples.resize(static_cast<std::size_t>(r.width) * r.height);
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    const double v = std::clamp(static_cast<double>(map.data()[i]) * 256.0, 0.0, 65535.0);
    r.samples[i] = static_cast<std::uint16_t>(std::lround(v));
  }
  write_png(path, r);
}

inline Tensor read_scaled16(const std::filesystem::path& path) {
  const Raster r = read_png(path);
  if (r.channels != 1 || r.bit_depth != 16) {
    throw IoError(concat("'", path.string(), "': expected a 16-bit single-channel PNG"));
  }
  Tensor t({1, 1, r.height, r.width});
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<float>(r.samples[i] / 256.0);
  return t;
}

}  // namespace pyrdepth
