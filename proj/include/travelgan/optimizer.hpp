#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "travelgan/params.hpp"
#include "travelgan/tensor.hpp"

namespace travelgan {

// Adam with bias correction. Hyperparameter defaults are the training values
// used throughout: lr 0.0002, beta1 0.5, beta2 0.9.
template <typename T>
struct AdamState {
  int64_t step = 0;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double epsilon = 1e-8;
  ParameterSet<T> m;
  ParameterSet<T> v;

  AdamState() = default;

  explicit AdamState(const ParameterSet<T>& params, double lr_ = 2e-4, double beta1_ = 0.5,
                     double beta2_ = 0.9, double epsilon_ = 1e-8)
      : lr(lr_), beta1(beta1_), beta2(beta2_), epsilon(epsilon_) {
    for (const auto& [name, t] : params) {
      m.emplace(name, Tensor<T>(t.shape, T(0)));
      v.emplace(name, Tensor<T>(t.shape, T(0)));
    }
  }
};

// One Adam update over every parameter. Parameters missing from `grads`
// receive a zero gradient (their moments still decay). Shapes must mirror
// the state exactly.
template <typename T>
void adam_step(ParameterSet<T>& params, const GradientSet<T>& grads, AdamState<T>& state) {
  state.step += 1;
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);
  const T corr1 = static_cast<T>(1.0 / (1.0 - std::pow(state.beta1, state.step)));
  const T corr2 = static_cast<T>(1.0 / (1.0 - std::pow(state.beta2, state.step)));
  const T lr = static_cast<T>(state.lr);
  const T eps = static_cast<T>(state.epsilon);

  for (auto& [name, p] : params) {
    auto mi = state.m.find(name);
    auto vi = state.v.find(name);
    if (mi == state.m.end() || vi == state.v.end()) {
      throw ShapeError("adam_step: no moment state for parameter '" + name + "'");
    }
    Tensor<T>& m = mi->second;
    Tensor<T>& v = vi->second;
    if (!m.same_shape(p) || !v.same_shape(p)) {
      throw ShapeError("adam_step: moment shape mismatch for '" + name + "': param " +
                       shape_str(p.shape) + " vs moment " + shape_str(m.shape));
    }
    const Tensor<T>* g = nullptr;
    auto gi = grads.find(name);
    if (gi != grads.end()) {
      if (!gi->second.same_shape(p)) {
        throw ShapeError("adam_step: gradient shape mismatch for '" + name + "': param " +
                         shape_str(p.shape) + " vs grad " + shape_str(gi->second.shape));
      }
      g = &gi->second;
    }
    for (int64_t i = 0; i < p.size(); ++i) {
      const T gi_v = g ? (*g)[i] : T(0);
      m[i] = b1 * m[i] + (T(1) - b1) * gi_v;
      v[i] = b2 * v[i] + (T(1) - b2) * gi_v * gi_v;
      const T m_hat = m[i] * corr1;
      const T v_hat = v[i] * corr2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

}  // namespace travelgan
