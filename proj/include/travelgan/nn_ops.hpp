#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "travelgan/autodiff.hpp"
#include "travelgan/tensor.hpp"

namespace travelgan {

enum class ForwardMode { Train, Eval };

namespace detail {

// Shared inner kernels for the stride-2 convolution family. Kernel 4x4,
// stride 2, padding 1, so a "full" plane of extent H pairs with a "half"
// plane of extent H/2. The strided patch access happens once, in a pack
// step, after which every hot loop is a unit-stride FMA or dot product:
//
//   gather:      out[n,co,:] += K(co, q) . col(q, :)       (conv forward / transpose input grad)
//   scatter:     col = K^T g, unpacked back onto the full plane
//   kernel_grad: dK(co, q) += <g[n,co,:], col(q, :)>
//
// where q runs over (ci, kh, kw) and col holds zero-padded input patches.

constexpr int64_t kConvKernel = 4;
constexpr int64_t kConvTaps = kConvKernel * kConvKernel;

inline std::pair<int64_t, int64_t> tap_range(int64_t k, int64_t full, int64_t half) {
  // valid o such that 0 <= 2o + k - 1 < full, clipped to [0, half)
  int64_t lo = (k == 0) ? 1 : 0;
  int64_t hi = std::min(half - 1, (full - k) / 2);
  return {lo, hi};
}

template <typename T>
T* conv_scratch(int64_t elems) {
  thread_local std::vector<T> buf;
  if (static_cast<int64_t>(buf.size()) < elems) buf.resize(static_cast<std::size_t>(elems));
  return buf.data();
}

// col(ci*16 + kh*4 + kw, oh*half_w + ow) = x(ci, 2oh+kh-1, 2ow+kw-1), 0 outside
template <typename T>
void pack_patches(const T* x_image, T* col, int64_t ci_dim, int64_t full_h, int64_t full_w) {
  const int64_t half_h = full_h / 2, half_w = full_w / 2;
  const int64_t ohw = half_h * half_w;
  for (int64_t ci = 0; ci < ci_dim; ++ci) {
    const T* x_plane = x_image + ci * full_h * full_w;
    for (int64_t kh = 0; kh < kConvKernel; ++kh) {
      const auto [oh_lo, oh_hi] = tap_range(kh, full_h, half_h);
      for (int64_t kw = 0; kw < kConvKernel; ++kw) {
        T* dst = col + ((ci * kConvKernel + kh) * kConvKernel + kw) * ohw;
        const auto [ow_lo, ow_hi] = tap_range(kw, full_w, half_w);
        std::fill_n(dst, ohw, T(0));
        for (int64_t oh = oh_lo; oh <= oh_hi; ++oh) {
          const T* src = x_plane + (2 * oh + kh - 1) * full_w + (kw - 1);
          T* d = dst + oh * half_w;
          for (int64_t ow = ow_lo; ow <= ow_hi; ++ow) d[ow] = src[2 * ow];
        }
      }
    }
  }
}

// inverse of pack_patches, accumulating instead of assigning
template <typename T>
void unpack_patches_add(const T* col, T* x_image, int64_t ci_dim, int64_t full_h, int64_t full_w) {
  const int64_t half_h = full_h / 2, half_w = full_w / 2;
  const int64_t ohw = half_h * half_w;
  for (int64_t ci = 0; ci < ci_dim; ++ci) {
    T* x_plane = x_image + ci * full_h * full_w;
    for (int64_t kh = 0; kh < kConvKernel; ++kh) {
      const auto [oh_lo, oh_hi] = tap_range(kh, full_h, half_h);
      for (int64_t kw = 0; kw < kConvKernel; ++kw) {
        const T* src = col + ((ci * kConvKernel + kh) * kConvKernel + kw) * ohw;
        const auto [ow_lo, ow_hi] = tap_range(kw, full_w, half_w);
        for (int64_t oh = oh_lo; oh <= oh_hi; ++oh) {
          T* dst = x_plane + (2 * oh + kh - 1) * full_w + (kw - 1);
          const T* s = src + oh * half_w;
          for (int64_t ow = ow_lo; ow <= ow_hi; ++ow) dst[2 * ow] += s[ow];
        }
      }
    }
  }
}

template <typename T>
void conv_gather(const T* x, const T* k, T* out, int64_t n_batch, int64_t ci_dim, int64_t co_dim,
                 int64_t full_h, int64_t full_w) {
  const int64_t ohw = (full_h / 2) * (full_w / 2);
  const int64_t rows = ci_dim * kConvTaps;
  T* col = conv_scratch<T>(rows * ohw);
  for (int64_t n = 0; n < n_batch; ++n) {
    pack_patches(x + n * ci_dim * full_h * full_w, col, ci_dim, full_h, full_w);
    for (int64_t co = 0; co < co_dim; ++co) {
      T* o_row = out + (n * co_dim + co) * ohw;
      const T* k_row = k + co * rows;
      for (int64_t q = 0; q < rows; ++q) {
        const T w = k_row[q];
        const T* c_row = col + q * ohw;
        for (int64_t i = 0; i < ohw; ++i) o_row[i] += w * c_row[i];
      }
    }
  }
}

template <typename T>
void conv_scatter(const T* g, const T* k, T* out, int64_t n_batch, int64_t ci_dim, int64_t co_dim,
                  int64_t full_h, int64_t full_w) {
  const int64_t ohw = (full_h / 2) * (full_w / 2);
  const int64_t rows = ci_dim * kConvTaps;
  T* col = conv_scratch<T>(rows * ohw);
  for (int64_t n = 0; n < n_batch; ++n) {
    std::fill_n(col, rows * ohw, T(0));
    for (int64_t co = 0; co < co_dim; ++co) {
      const T* g_row = g + (n * co_dim + co) * ohw;
      const T* k_row = k + co * rows;
      for (int64_t q = 0; q < rows; ++q) {
        const T w = k_row[q];
        T* c_row = col + q * ohw;
        for (int64_t i = 0; i < ohw; ++i) c_row[i] += w * g_row[i];
      }
    }
    unpack_patches_add(col, out + n * ci_dim * full_h * full_w, ci_dim, full_h, full_w);
  }
}

template <typename T>
void conv_kernel_grad(const T* x, const T* g, T* dk, int64_t n_batch, int64_t ci_dim,
                      int64_t co_dim, int64_t full_h, int64_t full_w) {
  const int64_t ohw = (full_h / 2) * (full_w / 2);
  const int64_t rows = ci_dim * kConvTaps;
  T* col = conv_scratch<T>(rows * ohw);
  for (int64_t n = 0; n < n_batch; ++n) {
    pack_patches(x + n * ci_dim * full_h * full_w, col, ci_dim, full_h, full_w);
    for (int64_t co = 0; co < co_dim; ++co) {
      const T* g_row = g + (n * co_dim + co) * ohw;
      T* dk_row = dk + co * rows;
      for (int64_t q = 0; q < rows; ++q) {
        const T* c_row = col + q * ohw;
        T acc = T(0);
        for (int64_t i = 0; i < ohw; ++i) acc += g_row[i] * c_row[i];
        dk_row[q] += acc;
      }
    }
  }
}

}  // namespace detail

// Stride-2 convolution with 4x4 kernel and padding 1: (N,Ci,H,W) -> (N,Co,H/2,W/2).
// kernel shape (Co,Ci,4,4), bias shape (Co).
template <typename T>
Var<T> conv2d_s2(const Var<T>& x, const Var<T>& kernel, const Var<T>& bias) {
  const Tensor<T>& vx = x->value;
  const Tensor<T>& vk = kernel->value;
  const Tensor<T>& vb = bias->value;
  if (vx.rank() != 4) throw ShapeError("conv2d_s2: input must be NCHW, got " + shape_str(vx.shape));
  if (vk.rank() != 4 || vk.dim(2) != 4 || vk.dim(3) != 4) {
    throw ShapeError("conv2d_s2: kernel must be (Co,Ci,4,4), got " + shape_str(vk.shape));
  }
  if (vx.dim(1) != vk.dim(1)) {
    throw ShapeError("conv2d_s2: input channels " + shape_str(vx.shape) +
                     " do not match kernel input channels " + shape_str(vk.shape));
  }
  const int64_t n = vx.dim(0), ci = vx.dim(1), h = vx.dim(2), w = vx.dim(3);
  const int64_t co = vk.dim(0);
  if (h < 4 || w < 4 || h % 2 || w % 2) {
    throw ShapeError("conv2d_s2: spatial extents must be even and >= 4, got " +
                     shape_str(vx.shape));
  }
  if (vb.rank() != 1 || vb.dim(0) != co) {
    throw ShapeError("conv2d_s2: bias must be (Co), got " + shape_str(vb.shape));
  }

  Tensor<T> out(Shape{n, co, h / 2, w / 2});
  const int64_t plane = (h / 2) * (w / 2);
  for (int64_t in = 0; in < n; ++in) {
    for (int64_t c = 0; c < co; ++c) {
      std::fill_n(out.data.data() + (in * co + c) * plane, plane, vb[c]);
    }
  }
  detail::conv_gather(vx.data.data(), vk.data.data(), out.data.data(), n, ci, co, h, w);

  return make_op<T>(std::move(out), {x, kernel, bias}, [n, ci, co, h, w](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& pk = *self.parents[1];
    auto& pb = *self.parents[2];
    const T* g = self.grad.data.data();
    if (px.requires_grad) {
      px.ensure_grad();
      detail::conv_scatter(g, pk.value.data.data(), px.grad.data.data(), n, ci, co, h, w);
    }
    if (pk.requires_grad) {
      pk.ensure_grad();
      detail::conv_kernel_grad(px.value.data.data(), g, pk.grad.data.data(), n, ci, co, h, w);
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      const int64_t plane = (h / 2) * (w / 2);
      for (int64_t in = 0; in < n; ++in) {
        for (int64_t c = 0; c < co; ++c) {
          const T* g_plane = g + (in * co + c) * plane;
          T acc = T(0);
          for (int64_t i = 0; i < plane; ++i) acc += g_plane[i];
          pb.grad[c] += acc;
        }
      }
    }
  });
}

// Stride-2 transposed convolution, the exact adjoint of conv2d_s2 for the
// same kernel: (N,Co,h,w) -> (N,Ci,2h,2w). kernel shape (Co,Ci,4,4) as in
// conv2d_s2 (so <conv(x,k), y> == <x, conv_transpose(y,k)>), bias shape (Ci).
template <typename T>
Var<T> conv_transpose2d_s2(const Var<T>& x, const Var<T>& kernel, const Var<T>& bias) {
  const Tensor<T>& vx = x->value;
  const Tensor<T>& vk = kernel->value;
  const Tensor<T>& vb = bias->value;
  if (vx.rank() != 4) {
    throw ShapeError("conv_transpose2d_s2: input must be NCHW, got " + shape_str(vx.shape));
  }
  if (vk.rank() != 4 || vk.dim(2) != 4 || vk.dim(3) != 4) {
    throw ShapeError("conv_transpose2d_s2: kernel must be (Co,Ci,4,4), got " + shape_str(vk.shape));
  }
  if (vx.dim(1) != vk.dim(0)) {
    throw ShapeError("conv_transpose2d_s2: input channels " + shape_str(vx.shape) +
                     " do not match kernel output channels " + shape_str(vk.shape));
  }
  const int64_t n = vx.dim(0), co = vx.dim(1), h = vx.dim(2), w = vx.dim(3);
  const int64_t ci = vk.dim(1);
  if (h < 2 || w < 2) {
    throw ShapeError("conv_transpose2d_s2: spatial extents must be >= 2, got " +
                     shape_str(vx.shape));
  }
  if (vb.rank() != 1 || vb.dim(0) != ci) {
    throw ShapeError("conv_transpose2d_s2: bias must be (Ci), got " + shape_str(vb.shape));
  }

  Tensor<T> out(Shape{n, ci, 2 * h, 2 * w});
  const int64_t plane = 4 * h * w;
  for (int64_t in = 0; in < n; ++in) {
    for (int64_t c = 0; c < ci; ++c) {
      std::fill_n(out.data.data() + (in * ci + c) * plane, plane, vb[c]);
    }
  }
  detail::conv_scatter(vx.data.data(), vk.data.data(), out.data.data(), n, ci, co, 2 * h, 2 * w);

  return make_op<T>(std::move(out), {x, kernel, bias}, [n, ci, co, h, w](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& pk = *self.parents[1];
    auto& pb = *self.parents[2];
    const T* g = self.grad.data.data();
    if (px.requires_grad) {
      px.ensure_grad();
      detail::conv_gather(g, pk.value.data.data(), px.grad.data.data(), n, ci, co, 2 * h, 2 * w);
    }
    if (pk.requires_grad) {
      pk.ensure_grad();
      detail::conv_kernel_grad(g, px.value.data.data(), pk.grad.data.data(), n, ci, co, 2 * h,
                               2 * w);
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      const int64_t plane = 4 * h * w;
      for (int64_t in = 0; in < n; ++in) {
        for (int64_t c = 0; c < ci; ++c) {
          const T* g_plane = g + (in * ci + c) * plane;
          T acc = T(0);
          for (int64_t i = 0; i < plane; ++i) acc += g_plane[i];
          pb.grad[c] += acc;
        }
      }
    }
  });
}

// Affine map per batch row: (B,In) x (In,Out) + (Out) -> (B,Out).
template <typename T>
Var<T> dense(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  const Tensor<T>& vx = x->value;
  const Tensor<T>& vw = weight->value;
  const Tensor<T>& vb = bias->value;
  if (vx.rank() != 2) throw ShapeError("dense: input must be (B,In), got " + shape_str(vx.shape));
  if (vw.rank() != 2 || vx.dim(1) != vw.dim(0)) {
    throw ShapeError("dense: input " + shape_str(vx.shape) + " incompatible with weight " +
                     shape_str(vw.shape));
  }
  const int64_t b = vx.dim(0), in = vx.dim(1), out_n = vw.dim(1);
  if (vb.rank() != 1 || vb.dim(0) != out_n) {
    throw ShapeError("dense: bias must be (Out), got " + shape_str(vb.shape));
  }

  Tensor<T> out(Shape{b, out_n});
  for (int64_t r = 0; r < b; ++r) {
    T* o_row = out.data.data() + r * out_n;
    std::copy_n(vb.data.data(), out_n, o_row);
    const T* x_row = vx.data.data() + r * in;
    for (int64_t i = 0; i < in; ++i) {
      const T xv = x_row[i];
      if (xv == T(0)) continue;
      const T* w_row = vw.data.data() + i * out_n;
      for (int64_t o = 0; o < out_n; ++o) o_row[o] += xv * w_row[o];
    }
  }

  return make_op<T>(std::move(out), {x, weight, bias}, [b, in, out_n](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    auto& pb = *self.parents[2];
    const T* g = self.grad.data.data();
    if (px.requires_grad) {
      px.ensure_grad();
      for (int64_t r = 0; r < b; ++r) {
        const T* g_row = g + r * out_n;
        T* gx_row = px.grad.data.data() + r * in;
        for (int64_t i = 0; i < in; ++i) {
          const T* w_row = pw.value.data.data() + i * out_n;
          T acc = T(0);
          for (int64_t o = 0; o < out_n; ++o) acc += g_row[o] * w_row[o];
          gx_row[i] += acc;
        }
      }
    }
    if (pw.requires_grad) {
      pw.ensure_grad();
      for (int64_t r = 0; r < b; ++r) {
        const T* g_row = g + r * out_n;
        const T* x_row = px.value.data.data() + r * in;
        for (int64_t i = 0; i < in; ++i) {
          const T xv = x_row[i];
          if (xv == T(0)) continue;
          T* gw_row = pw.grad.data.data() + i * out_n;
          for (int64_t o = 0; o < out_n; ++o) gw_row[o] += xv * g_row[o];
        }
      }
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (int64_t r = 0; r < b; ++r) {
        const T* g_row = g + r * out_n;
        for (int64_t o = 0; o < out_n; ++o) pb.grad[o] += g_row[o];
      }
    }
  });
}

// Exponential-moving-average statistics a batch-norm layer carries between
// batches. Variances are stored biased (1/M), matching the train-time
// normalizer.
template <typename T>
struct BatchNormState {
  Tensor<T> running_mean;
  Tensor<T> running_var;

  BatchNormState() = default;
  explicit BatchNormState(int64_t channels)
      : running_mean(Shape{channels}, T(0)), running_var(Shape{channels}, T(1)) {}
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

// Per-channel normalization over (N,H,W). Train mode uses batch moments and
// optionally folds them into the running stats; eval mode uses running stats
// and is batch-size independent.
template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& shift,
                  BatchNormState<T>& state, ForwardMode mode, bool update_running = true) {
  const Tensor<T>& vx = x->value;
  if (vx.rank() != 4) throw ShapeError("batch_norm: input must be NCHW, got " + shape_str(vx.shape));
  const int64_t n = vx.dim(0), c = vx.dim(1), h = vx.dim(2), w = vx.dim(3);
  if (gain->value.size() != c || shift->value.size() != c || state.running_mean.size() != c) {
    throw ShapeError("batch_norm: gain/shift/state channel mismatch for input " +
                     shape_str(vx.shape));
  }
  if (mode == ForwardMode::Train && n < 2) {
    throw ShapeError("batch_norm: train mode requires batch size >= 2, got " +
                     shape_str(vx.shape));
  }

  const int64_t plane = h * w;
  const int64_t m = n * plane;  // reduction count per channel
  const T eps = static_cast<T>(kBatchNormEps);

  Tensor<T> mean(Shape{c}, T(0));
  Tensor<T> inv_std(Shape{c}, T(0));
  if (mode == ForwardMode::Train) {
    for (int64_t ch = 0; ch < c; ++ch) {
      T acc = T(0);
      for (int64_t in = 0; in < n; ++in) {
        const T* row = vx.data.data() + (in * c + ch) * plane;
        for (int64_t i = 0; i < plane; ++i) acc += row[i];
      }
      const T mu = acc / static_cast<T>(m);
      T var_acc = T(0);
      for (int64_t in = 0; in < n; ++in) {
        const T* row = vx.data.data() + (in * c + ch) * plane;
        for (int64_t i = 0; i < plane; ++i) {
          const T d = row[i] - mu;
          var_acc += d * d;
        }
      }
      const T var = var_acc / static_cast<T>(m);
      mean[ch] = mu;
      inv_std[ch] = T(1) / std::sqrt(var + eps);
      if (update_running) {
        const T mom = static_cast<T>(kBatchNormMomentum);
        state.running_mean[ch] = mom * state.running_mean[ch] + (T(1) - mom) * mu;
        state.running_var[ch] = mom * state.running_var[ch] + (T(1) - mom) * var;
      }
    }
  } else {
    for (int64_t ch = 0; ch < c; ++ch) {
      mean[ch] = state.running_mean[ch];
      inv_std[ch] = T(1) / std::sqrt(state.running_var[ch] + eps);
    }
  }

  Tensor<T> normalized(vx.shape);
  Tensor<T> out(vx.shape);
  for (int64_t in = 0; in < n; ++in) {
    for (int64_t ch = 0; ch < c; ++ch) {
      const T mu = mean[ch], is = inv_std[ch];
      const T g = gain->value[ch], s = shift->value[ch];
      const T* row = vx.data.data() + (in * c + ch) * plane;
      T* nrow = normalized.data.data() + (in * c + ch) * plane;
      T* orow = out.data.data() + (in * c + ch) * plane;
      for (int64_t i = 0; i < plane; ++i) {
        const T xn = (row[i] - mu) * is;
        nrow[i] = xn;
        orow[i] = g * xn + s;
      }
    }
  }

  const bool train = mode == ForwardMode::Train;
  return make_op<T>(
      std::move(out), {x, gain, shift},
      [n, c, plane, m, train, normalized = std::move(normalized),
       inv_std = std::move(inv_std)](Node<T>& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& ps = *self.parents[2];
        const T* g = self.grad.data.data();
        if (pg.requires_grad) pg.ensure_grad();
        if (ps.requires_grad) ps.ensure_grad();
        if (px.requires_grad) px.ensure_grad();
        for (int64_t ch = 0; ch < c; ++ch) {
          T sum_g = T(0), sum_gx = T(0);
          for (int64_t in = 0; in < n; ++in) {
            const T* g_row = g + (in * c + ch) * plane;
            const T* n_row = normalized.data.data() + (in * c + ch) * plane;
            for (int64_t i = 0; i < plane; ++i) {
              sum_g += g_row[i];
              sum_gx += g_row[i] * n_row[i];
            }
          }
          if (pg.requires_grad) pg.grad[ch] += sum_gx;
          if (ps.requires_grad) ps.grad[ch] += sum_g;
          if (px.requires_grad) {
            const T gamma = pg.value[ch];
            const T is = inv_std[ch];
            if (train) {
              const T inv_m = T(1) / static_cast<T>(m);
              for (int64_t in = 0; in < n; ++in) {
                const T* g_row = g + (in * c + ch) * plane;
                const T* n_row = normalized.data.data() + (in * c + ch) * plane;
                T* gx_row = px.grad.data.data() + (in * c + ch) * plane;
                for (int64_t i = 0; i < plane; ++i) {
                  gx_row[i] += gamma * is * inv_m *
                               (static_cast<T>(m) * g_row[i] - sum_g - n_row[i] * sum_gx);
                }
              }
            } else {
              for (int64_t in = 0; in < n; ++in) {
                const T* g_row = g + (in * c + ch) * plane;
                T* gx_row = px.grad.data.data() + (in * c + ch) * plane;
                for (int64_t i = 0; i < plane; ++i) gx_row[i] += gamma * is * g_row[i];
              }
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T leak = T(0.2)) {
  Tensor<T> out = x->value;
  for (T& v : out.data) {
    if (v < T(0)) v *= leak;
  }
  return make_op<T>(std::move(out), {x}, [leak](Node<T>& self) {
    auto& px = *self.parents[0];
    px.ensure_grad();
    for (int64_t i = 0; i < self.grad.size(); ++i) {
      px.grad[i] += self.grad[i] * (px.value[i] >= T(0) ? T(1) : leak);
    }
  });
}

template <typename T>
Var<T> tanh_act(const Var<T>& x) {
  Tensor<T> out = x->value;
  for (T& v : out.data) v = std::tanh(v);
  Tensor<T> saved = out;
  return make_op<T>(std::move(out), {x}, [saved](Node<T>& self) {
    auto& px = *self.parents[0];
    px.ensure_grad();
    for (int64_t i = 0; i < self.grad.size(); ++i) {
      px.grad[i] += self.grad[i] * (T(1) - saved[i] * saved[i]);
    }
  });
}

template <typename T>
Var<T> sigmoid_act(const Var<T>& x) {
  Tensor<T> out = x->value;
  for (T& v : out.data) {
    if (v >= T(0)) {
      v = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      v = e / (T(1) + e);
    }
  }
  Tensor<T> saved = out;
  return make_op<T>(std::move(out), {x}, [saved](Node<T>& self) {
    auto& px = *self.parents[0];
    px.ensure_grad();
    for (int64_t i = 0; i < self.grad.size(); ++i) {
      px.grad[i] += self.grad[i] * saved[i] * (T(1) - saved[i]);
    }
  });
}

template <typename T>
Var<T> identity_act(const Var<T>& x) {
  return x;
}

}  // namespace travelgan
