#pragma once

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "travelgan/errors.hpp"

namespace travelgan {

// 8-bit interleaved RGB, row-major.
struct ImageU8 {
  int64_t width = 0;
  int64_t height = 0;
  std::vector<uint8_t> rgb;

  uint8_t* row(int64_t y) { return rgb.data() + y * width * 3; }
  const uint8_t* row(int64_t y) const { return rgb.data() + y * width * 3; }
};

namespace detail {
struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace detail

// Decodes an 8-bit RGB or RGBA PNG (palette/gray images are expanded,
// 16-bit depth narrowed, alpha dropped).
inline ImageU8 read_png(const std::string& path) {
  detail::FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw FormatError("read_png: cannot open '" + path + "'");

  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8)) {
    throw FormatError("read_png: '" + path + "' is not a PNG file");
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("read_png: libpng init failed for '" + path + "'");
  }
  ImageU8 out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("read_png: failed to decode '" + path + "'");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  png_set_expand(png);
  png_set_strip_16(png);
  png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  out.width = png_get_image_width(png, info);
  out.height = png_get_image_height(png, info);
  if (png_get_channels(png, info) != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("read_png: '" + path + "' did not normalize to RGB");
  }
  out.rgb.assign(static_cast<std::size_t>(out.width * out.height * 3), 0);
  rows.resize(static_cast<std::size_t>(out.height));
  for (int64_t y = 0; y < out.height; ++y) rows[static_cast<std::size_t>(y)] = out.row(y);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

inline void write_png(const std::string& path, const ImageU8& img) {
  if (img.width <= 0 || img.height <= 0 ||
      static_cast<int64_t>(img.rgb.size()) != img.width * img.height * 3) {
    throw FormatError("write_png: malformed image buffer for '" + path + "'");
  }
  detail::FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw FormatError("write_png: cannot open '" + path + "' for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("write_png: libpng init failed for '" + path + "'");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("write_png: failed to encode '" + path + "'");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int64_t y = 0; y < img.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(img.row(y)));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace travelgan
