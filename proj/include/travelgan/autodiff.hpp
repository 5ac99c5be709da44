#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "travelgan/tensor.hpp"

namespace travelgan {

// Reverse-mode tape. Every operation allocates a Node that remembers its
// parents and a closure that scatters the node's gradient into theirs.
// backward() walks the reachable subgraph in reverse creation order, which
// is a valid topological order for a tape built by forward execution.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // allocated lazily by backward()
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;
  uint64_t seq = 0;
  bool requires_grad = false;
  std::string tag;

  void ensure_grad() {
    if (grad.data.empty()) grad = Tensor<T>(value.shape, T(0));
  }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

namespace detail {
inline uint64_t next_seq() {
  thread_local uint64_t counter = 0;
  return ++counter;
}
}  // namespace detail

template <typename T>
Var<T> make_leaf(Tensor<T> value, bool requires_grad = true, std::string tag = {}) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  n->seq = detail::next_seq();
  n->tag = std::move(tag);
  return n;
}

template <typename T>
Var<T> make_constant(Tensor<T> value) {
  return make_leaf(std::move(value), false);
}

template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents,
               std::function<void(Node<T>&)> backprop) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents) {
    if (p->requires_grad) {
      n->requires_grad = true;
      break;
    }
  }
  if (n->requires_grad) n->backprop = std::move(backprop);
  n->seq = detail::next_seq();
  return n;
}

// Cuts the tape: the result carries the same values but no history, so no
// gradient flows through it. Used for fake batches in the D and S updates.
template <typename T>
Var<T> detach(const Var<T>& x) {
  return make_constant(x->value);
}

template <typename T>
std::vector<Node<T>*> reachable_nodes(const Var<T>& root) {
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<Node<T>*> stack{root.get()};
  seen.insert(root.get());
  while (!stack.empty()) {
    Node<T>* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  std::sort(order.begin(), order.end(),
            [](const Node<T>* a, const Node<T>* b) { return a->seq > b->seq; });
  return order;
}

// Gradient of a scalar loss with respect to everything reachable from it.
// Grads of the reachable set are reset first, so repeated calls on one tape
// (e.g. per-output-pixel salience probes) stay independent.
template <typename T>
void backward(const Var<T>& loss) {
  if (loss->value.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss->value.shape));
  }
  auto order = reachable_nodes(loss);
  for (Node<T>* n : order) {
    n->ensure_grad();
    std::fill(n->grad.data.begin(), n->grad.data.end(), T(0));
  }
  loss->grad[0] = T(1);
  for (Node<T>* n : order) {
    if (n->requires_grad && n->backprop) n->backprop(*n);
  }
}

// For parameters that do not participate in a given loss: an untouched leaf
// reports a zero gradient of the right shape.
template <typename T>
Tensor<T> grad_or_zeros(const Var<T>& leaf) {
  if (leaf->grad.data.empty()) return Tensor<T>(leaf->value.shape, T(0));
  return leaf->grad;
}

// ---------------------------------------------------------------------------
// Elementwise and reduction primitives
// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a->value, b->value, "add");
  Tensor<T> out = a->value;
  for (int64_t i = 0; i < out.size(); ++i) out[i] += b->value[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (int64_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (int64_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i];
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a->value, b->value, "sub");
  Tensor<T> out = a->value;
  for (int64_t i = 0; i < out.size(); ++i) out[i] -= b->value[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (int64_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (int64_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a->value, b->value, "mul");
  Tensor<T> out = a->value;
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= b->value[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (int64_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (int64_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.value[i];
    }
  });
}

template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a->value, b->value, "div");
  Tensor<T> out = a->value;
  for (int64_t i = 0; i < out.size(); ++i) out[i] /= b->value[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (int64_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] / pb.value[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (int64_t i = 0; i < self.grad.size(); ++i) {
        pb.grad[i] -= self.grad[i] * self.value[i] / pb.value[i];
      }
    }
  });
}

template <typename T>
Var<T> mul_const(const Var<T>& a, T c) {
  Tensor<T> out = a->value;
  for (T& v : out.data) v *= c;
  return make_op<T>(std::move(out), {a}, [c](Node<T>& self) {
    auto& pa = *self.parents[0];
    pa.ensure_grad();
    for (int64_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * c;
  });
}

template <typename T>
Var<T> add_const(const Var<T>& a, T c) {
  Tensor<T> out = a->value;
  for (T& v : out.data) v += c;
  return make_op<T>(std::move(out), {a}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    pa.ensure_grad();
    for (int64_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
  });
}

// max(0, x) with subgradient 0 at the kink.
template <typename T>
Var<T> positive_part(const Var<T>& a) {
  Tensor<T> out = a->value;
  for (T& v : out.data) v = v > T(0) ? v : T(0);
  return make_op<T>(std::move(out), {a}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    pa.ensure_grad();
    for (int64_t i = 0; i < self.grad.size(); ++i) {
      if (pa.value[i] > T(0)) pa.grad[i] += self.grad[i];
    }
  });
}

// sqrt with subgradient 0 at x == 0 (the diagonal of a pairwise-norm field is
// exactly zero; its upstream gradient is masked out, so this only guards
// against 0 * inf producing NaN).
template <typename T>
Var<T> sqrt_nz(const Var<T>& a) {
  Tensor<T> out = a->value;
  for (T& v : out.data) v = std::sqrt(v);
  Tensor<T> saved = out;
  return make_op<T>(std::move(out), {a}, [saved](Node<T>& self) {
    auto& pa = *self.parents[0];
    pa.ensure_grad();
    for (int64_t i = 0; i < self.grad.size(); ++i) {
      if (saved[i] > T(0)) pa.grad[i] += self.grad[i] * T(0.5) / saved[i];
    }
  });
}

template <typename T>
Var<T> log_op(const Var<T>& a) {
  Tensor<T> out = a->value;
  for (T& v : out.data) v = std::log(v);
  return make_op<T>(std::move(out), {a}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    pa.ensure_grad();
    for (int64_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] / pa.value[i];
  });
}

// max(x, lo); gradient is zero where the floor is active.
template <typename T>
Var<T> clamp_min(const Var<T>& a, T lo) {
  Tensor<T> out = a->value;
  for (T& v : out.data) v = std::max(lo, v);
  return make_op<T>(std::move(out), {a}, [lo](Node<T>& self) {
    auto& pa = *self.parents[0];
    pa.ensure_grad();
    for (int64_t i = 0; i < self.grad.size(); ++i) {
      if (pa.value[i] > lo) pa.grad[i] += self.grad[i];
    }
  });
}

// Clamp to [lo, hi]; gradient is zero where the clamp is active.
template <typename T>
Var<T> clamp(const Var<T>& a, T lo, T hi) {
  Tensor<T> out = a->value;
  for (T& v : out.data) v = std::min(hi, std::max(lo, v));
  return make_op<T>(std::move(out), {a}, [lo, hi](Node<T>& self) {
    auto& pa = *self.parents[0];
    pa.ensure_grad();
    for (int64_t i = 0; i < self.grad.size(); ++i) {
      if (pa.value[i] > lo && pa.value[i] < hi) pa.grad[i] += self.grad[i];
    }
  });
}

template <typename T>
Var<T> sum_all(const Var<T>& a) {
  T s = T(0);
  for (const T& v : a->value.data) s += v;
  return make_op<T>(Tensor<T>::scalar(s), {a}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    pa.ensure_grad();
    const T g = self.grad[0];
    for (int64_t i = 0; i < pa.grad.size(); ++i) pa.grad[i] += g;
  });
}

template <typename T>
Var<T> mean_all(const Var<T>& a) {
  const T inv = T(1) / static_cast<T>(a->value.size());
  T s = T(0);
  for (const T& v : a->value.data) s += v;
  return make_op<T>(Tensor<T>::scalar(s * inv), {a}, [inv](Node<T>& self) {
    auto& pa = *self.parents[0];
    pa.ensure_grad();
    const T g = self.grad[0] * inv;
    for (int64_t i = 0; i < pa.grad.size(); ++i) pa.grad[i] += g;
  });
}

// Sum over the innermost axis: (..., L) -> (...).
template <typename T>
Var<T> sum_last(const Var<T>& a) {
  if (a->value.rank() < 2) throw ShapeError("sum_last: needs rank >= 2");
  const int64_t last = a->value.shape.back();
  Shape out_shape(a->value.shape.begin(), a->value.shape.end() - 1);
  Tensor<T> out(out_shape, T(0));
  for (int64_t i = 0; i < out.size(); ++i) {
    T s = T(0);
    const T* row = a->value.data.data() + i * last;
    for (int64_t l = 0; l < last; ++l) s += row[l];
    out[i] = s;
  }
  return make_op<T>(std::move(out), {a}, [last](Node<T>& self) {
    auto& pa = *self.parents[0];
    pa.ensure_grad();
    for (int64_t i = 0; i < self.grad.size(); ++i) {
      const T g = self.grad[i];
      T* row = pa.grad.data.data() + i * last;
      for (int64_t l = 0; l < last; ++l) row[l] += g;
    }
  });
}

// (B, L) -> (B, B, L) with out[i][j] = z[j] - z[i]. Antisymmetric by
// construction; the diagonal is exactly zero.
template <typename T>
Var<T> pairwise_diff(const Var<T>& z) {
  if (z->value.rank() != 2) throw ShapeError("pairwise_diff: expected (B, L) input");
  const int64_t b = z->value.dim(0);
  const int64_t l = z->value.dim(1);
  Tensor<T> out(Shape{b, b, l});
  for (int64_t i = 0; i < b; ++i) {
    const T* zi = z->value.data.data() + i * l;
    for (int64_t j = 0; j < b; ++j) {
      const T* zj = z->value.data.data() + j * l;
      T* o = out.data.data() + (i * b + j) * l;
      for (int64_t k = 0; k < l; ++k) o[k] = zj[k] - zi[k];
    }
  }
  return make_op<T>(std::move(out), {z}, [b, l](Node<T>& self) {
    auto& pz = *self.parents[0];
    pz.ensure_grad();
    for (int64_t i = 0; i < b; ++i) {
      T* gi = pz.grad.data.data() + i * l;
      for (int64_t j = 0; j < b; ++j) {
        T* gj = pz.grad.data.data() + j * l;
        const T* g = self.grad.data.data() + (i * b + j) * l;
        for (int64_t k = 0; k < l; ++k) {
          gj[k] += g[k];
          gi[k] -= g[k];
        }
      }
    }
  });
}

// Mean over the off-diagonal entries of a (B, B) matrix; B >= 2.
template <typename T>
Var<T> offdiag_mean(const Var<T>& m) {
  if (m->value.rank() != 2 || m->value.dim(0) != m->value.dim(1)) {
    throw ShapeError("offdiag_mean: expected square (B, B) input, got " +
                     shape_str(m->value.shape));
  }
  const int64_t b = m->value.dim(0);
  if (b < 2) throw ShapeError("offdiag_mean: needs B >= 2");
  const T inv = T(1) / static_cast<T>(b * (b - 1));
  T s = T(0);
  for (int64_t i = 0; i < b; ++i) {
    for (int64_t j = 0; j < b; ++j) {
      if (i != j) s += m->value[i * b + j];
    }
  }
  return make_op<T>(Tensor<T>::scalar(s * inv), {m}, [b, inv](Node<T>& self) {
    auto& pm = *self.parents[0];
    pm.ensure_grad();
    const T g = self.grad[0] * inv;
    for (int64_t i = 0; i < b; ++i) {
      for (int64_t j = 0; j < b; ++j) {
        if (i != j) pm.grad[i * b + j] += g;
      }
    }
  });
}

// Concatenate two NCHW tensors along the channel axis (U-Net skips).
template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  const Tensor<T>& va = a->value;
  const Tensor<T>& vb = b->value;
  if (va.rank() != 4 || vb.rank() != 4) throw ShapeError("concat_channels: expected NCHW inputs");
  if (va.dim(0) != vb.dim(0) || va.dim(2) != vb.dim(2) || va.dim(3) != vb.dim(3)) {
    throw ShapeError("concat_channels: incompatible shapes " + shape_str(va.shape) + " vs " +
                     shape_str(vb.shape));
  }
  const int64_t n = va.dim(0), ca = va.dim(1), cb = vb.dim(1);
  const int64_t hw = va.dim(2) * va.dim(3);
  Tensor<T> out(Shape{n, ca + cb, va.dim(2), va.dim(3)});
  for (int64_t i = 0; i < n; ++i) {
    std::copy_n(va.data.data() + i * ca * hw, ca * hw, out.data.data() + i * (ca + cb) * hw);
    std::copy_n(vb.data.data() + i * cb * hw, cb * hw,
                out.data.data() + (i * (ca + cb) + ca) * hw);
  }
  return make_op<T>(std::move(out), {a, b}, [n, ca, cb, hw](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    for (int64_t i = 0; i < n; ++i) {
      const T* g = self.grad.data.data() + i * (ca + cb) * hw;
      if (pa.requires_grad) {
        pa.ensure_grad();
        T* ga = pa.grad.data.data() + i * ca * hw;
        for (int64_t k = 0; k < ca * hw; ++k) ga[k] += g[k];
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        T* gb = pb.grad.data.data() + i * cb * hw;
        for (int64_t k = 0; k < cb * hw; ++k) gb[k] += g[k + ca * hw];
      }
    }
  });
}

template <typename T>
Var<T> reshape(const Var<T>& a, Shape new_shape) {
  if (shape_size(new_shape) != a->value.size()) {
    throw ShapeError("reshape: size mismatch " + shape_str(a->value.shape) + " -> " +
                     shape_str(new_shape));
  }
  Tensor<T> out(std::move(new_shape), a->value.data);
  return make_op<T>(std::move(out), {a}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    pa.ensure_grad();
    for (int64_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
  });
}

// Single element as a scalar node; used to probe one output coordinate at a
// time when assembling Jacobian norms.
template <typename T>
Var<T> select_scalar(const Var<T>& a, int64_t flat_index) {
  if (flat_index < 0 || flat_index >= a->value.size()) {
    throw ShapeError("select_scalar: index out of range");
  }
  return make_op<T>(Tensor<T>::scalar(a->value[flat_index]), {a}, [flat_index](Node<T>& self) {
    auto& pa = *self.parents[0];
    pa.ensure_grad();
    pa.grad[flat_index] += self.grad[0];
  });
}

}  // namespace travelgan
