#pragma once

// Shared helpers for the unit suites. The *_reference functions are
// independent direct-summation oracles: they share no code with the
// production kernels and stay deliberately naive.

#include <cstdint>
#include <random>

#include "travelgan/tensor.hpp"

namespace testutil {

using travelgan::Shape;
using travelgan::Tensor;

template <typename T>
Tensor<T> random_tensor(Shape shape, uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (T& v : t.data) v = static_cast<T>(dist(rng));
  return t;
}

// Stride-2 convolution, kernel 4, padding 1, by per-output-element summation.
template <typename T>
Tensor<T> conv2d_s2_reference(const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>& b) {
  const int64_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t co = k.dim(0);
  Tensor<T> out(Shape{n, co, h / 2, w / 2});
  for (int64_t in = 0; in < n; ++in) {
    for (int64_t oc = 0; oc < co; ++oc) {
      for (int64_t oh = 0; oh < h / 2; ++oh) {
        for (int64_t ow = 0; ow < w / 2; ++ow) {
          T acc = b[oc];
          for (int64_t ic = 0; ic < ci; ++ic) {
            for (int64_t kh = 0; kh < 4; ++kh) {
              for (int64_t kw = 0; kw < 4; ++kw) {
                const int64_t ih = 2 * oh + kh - 1;
                const int64_t iw = 2 * ow + kw - 1;
                if (ih < 0 || ih >= h || iw < 0 || iw >= w) continue;
                acc += x[((in * ci + ic) * h + ih) * w + iw] *
                       k[((oc * ci + ic) * 4 + kh) * 4 + kw];
              }
            }
          }
          out[((in * co + oc) * (h / 2) + oh) * (w / 2) + ow] = acc;
        }
      }
    }
  }
  return out;
}

// Adjoint of the above for the same kernel, again element by element: each
// output pixel collects every (input pixel, tap) pair that maps onto it.
template <typename T>
Tensor<T> conv_transpose2d_s2_reference(const Tensor<T>& y, const Tensor<T>& k,
                                        const Tensor<T>& b) {
  const int64_t n = y.dim(0), co = y.dim(1), h = y.dim(2), w = y.dim(3);
  const int64_t ci = k.dim(1);
  const int64_t oh_dim = 2 * h, ow_dim = 2 * w;
  Tensor<T> out(Shape{n, ci, oh_dim, ow_dim});
  for (int64_t in = 0; in < n; ++in) {
    for (int64_t ic = 0; ic < ci; ++ic) {
      for (int64_t p = 0; p < oh_dim; ++p) {
        for (int64_t q = 0; q < ow_dim; ++q) {
          T acc = b[ic];
          for (int64_t oc = 0; oc < co; ++oc) {
            for (int64_t sh = 0; sh < h; ++sh) {
              for (int64_t sw = 0; sw < w; ++sw) {
                for (int64_t kh = 0; kh < 4; ++kh) {
                  for (int64_t kw = 0; kw < 4; ++kw) {
                    if (2 * sh + kh - 1 != p || 2 * sw + kw - 1 != q) continue;
                    acc += y[((in * co + oc) * h + sh) * w + sw] *
                           k[((oc * ci + ic) * 4 + kh) * 4 + kw];
                  }
                }
              }
            }
          }
          out[((in * ci + ic) * oh_dim + p) * ow_dim + q] = acc;
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> dense_reference(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  const int64_t rows = x.dim(0), in = x.dim(1), out_n = w.dim(1);
  Tensor<T> out(Shape{rows, out_n});
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t o = 0; o < out_n; ++o) {
      T acc = b[o];
      for (int64_t i = 0; i < in; ++i) acc += x[r * in + i] * w[i * out_n + o];
      out[r * out_n + o] = acc;
    }
  }
  return out;
}

template <typename T>
double dot(const Tensor<T>& a, const Tensor<T>& b) {
  double acc = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
  return acc;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  double m = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

}  // namespace testutil
