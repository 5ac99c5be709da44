#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "travelgan/errors.hpp"

namespace travelgan {

using Shape = std::vector<int64_t>;

inline int64_t shape_size(const Shape& s) {
  int64_t n = 1;
  for (int64_t e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << ")";
  return os.str();
}

// Dense row-major tensor. The single value carrier for images, activations,
// parameters and gradients. Scalar quantities use shape (1).
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;

  explicit Tensor(Shape s, T fill = T(0)) : shape(std::move(s)) {
    for (int64_t e : shape) {
      if (e <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
    }
    data.assign(static_cast<std::size_t>(shape_size(shape)), fill);
  }

  Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
    if (static_cast<int64_t>(data.size()) != shape_size(shape)) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
    }
  }

  static Tensor scalar(T v) { return Tensor(Shape{1}, std::vector<T>{v}); }

  int64_t size() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int64_t dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  T& operator[](int64_t i) { return data[static_cast<std::size_t>(i)]; }
  const T& operator[](int64_t i) const { return data[static_cast<std::size_t>(i)]; }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  bool all_finite() const {
    for (const T& v : data) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  T* begin() { return data.data(); }
  T* end() { return data.data() + data.size(); }
  const T* begin() const { return data.data(); }
  const T* end() const { return data.data() + data.size(); }
};

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
  Tensor<To> out;
  out.shape = t.shape;
  out.data.reserve(t.data.size());
  for (const From& v : t.data) out.data.push_back(static_cast<To>(v));
  return out;
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                     shape_str(b.shape));
  }
}

// Offset helpers for NCHW tensors; hot loops inline these by hand.
inline int64_t offset4(int64_t c_dim, int64_t h_dim, int64_t w_dim, int64_t n, int64_t c,
                       int64_t h, int64_t w) {
  return ((n * c_dim + c) * h_dim + h) * w_dim + w;
}

}  // namespace travelgan
