#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "travelgan/png_io.hpp"
#include "travelgan/tensor.hpp"

namespace travelgan {

// Pixel-space conventions, shared by the data pipeline and every metric:
// training tensors live in [-1,1]; metrics and PNG quantization use [0,1].

template <typename T>
Tensor<T> normalize_to_signed(const Tensor<T>& unit) {
  Tensor<T> out = unit;
  for (T& v : out.data) v = T(2) * v - T(1);
  return out;
}

template <typename T>
Tensor<T> denormalize_to_unit(const Tensor<T>& s) {
  Tensor<T> out = s;
  for (T& v : out.data) v = std::clamp((v + T(1)) / T(2), T(0), T(1));
  return out;
}

// (3,H,W) floats in [0,1] -> rounded 8-bit RGB
template <typename T>
ImageU8 quantize_image(const Tensor<T>& unit) {
  if (unit.rank() != 3 || unit.dim(0) != 3) {
    throw ShapeError("quantize_image: expected (3,H,W), got " + shape_str(unit.shape));
  }
  ImageU8 img;
  img.height = unit.dim(1);
  img.width = unit.dim(2);
  img.rgb.resize(static_cast<std::size_t>(img.width * img.height * 3));
  const int64_t plane = img.width * img.height;
  for (int64_t y = 0; y < img.height; ++y) {
    for (int64_t x = 0; x < img.width; ++x) {
      for (int64_t c = 0; c < 3; ++c) {
        const double v = std::clamp(static_cast<double>(unit[c * plane + y * img.width + x]),
                                    0.0, 1.0);
        img.rgb[static_cast<std::size_t>((y * img.width + x) * 3 + c)] =
            static_cast<uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  return img;
}

template <typename T>
Tensor<T> dequantize_image(const ImageU8& img) {
  Tensor<T> out(Shape{3, img.height, img.width});
  const int64_t plane = img.width * img.height;
  for (int64_t y = 0; y < img.height; ++y) {
    for (int64_t x = 0; x < img.width; ++x) {
      for (int64_t c = 0; c < 3; ++c) {
        out[c * plane + y * img.width + x] =
            static_cast<T>(img.rgb[static_cast<std::size_t>((y * img.width + x) * 3 + c)] / 255.0);
      }
    }
  }
  return out;
}

// Center crop to a square (shorter side, offset floor((len-side)/2)) followed
// by bilinear resize with half-pixel centers:
//   src = (dst + 0.5) * side / d - 0.5
// sampled from the four clamped neighbors with fractional weights, all
// arithmetic in double.
template <typename T>
Tensor<T> center_crop_resize(const Tensor<T>& image, int64_t d) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("center_crop_resize: expected (3,H,W), got " + shape_str(image.shape));
  }
  const int64_t h = image.dim(1), w = image.dim(2);
  const int64_t side = std::min(h, w);
  const int64_t y0 = (h - side) / 2;
  const int64_t x0 = (w - side) / 2;

  Tensor<T> out(Shape{3, d, d});
  const double scale = static_cast<double>(side) / static_cast<double>(d);
  for (int64_t c = 0; c < 3; ++c) {
    const T* src_plane = image.data.data() + c * h * w;
    T* dst_plane = out.data.data() + c * d * d;
    for (int64_t dy = 0; dy < d; ++dy) {
      const double sy = (dy + 0.5) * scale - 0.5;
      const int64_t iy = static_cast<int64_t>(std::floor(sy));
      const double fy = sy - iy;
      const int64_t y_lo = std::clamp<int64_t>(iy, 0, side - 1) + y0;
      const int64_t y_hi = std::clamp<int64_t>(iy + 1, 0, side - 1) + y0;
      for (int64_t dx = 0; dx < d; ++dx) {
        const double sx = (dx + 0.5) * scale - 0.5;
        const int64_t ix = static_cast<int64_t>(std::floor(sx));
        const double fx = sx - ix;
        const int64_t x_lo = std::clamp<int64_t>(ix, 0, side - 1) + x0;
        const int64_t x_hi = std::clamp<int64_t>(ix + 1, 0, side - 1) + x0;
        const double v00 = src_plane[y_lo * w + x_lo];
        const double v01 = src_plane[y_lo * w + x_hi];
        const double v10 = src_plane[y_hi * w + x_lo];
        const double v11 = src_plane[y_hi * w + x_hi];
        dst_plane[dy * d + dx] = static_cast<T>((1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) +
                                                fy * ((1.0 - fx) * v10 + fx * v11));
      }
    }
  }
  return out;
}

}  // namespace travelgan
