#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "travelgan/architecture.hpp"
#include "travelgan/autodiff.hpp"
#include "travelgan/nn_ops.hpp"
#include "travelgan/params.hpp"
#include "travelgan/random.hpp"

namespace travelgan {

inline constexpr double kWeightInitStdDev = 0.02;

// A built network: its static plan, the parameter tensors, and the running
// batch-norm statistics. Parameters change only through explicit updates
// (adam_step on the owner's ParameterSet or checkpoint load).
template <typename T>
struct Network {
  NetworkRole role = NetworkRole::Generator;
  ArchitectureSpec arch;
  std::vector<LayerPlan> plan;
  ParameterSet<T> params;
  std::map<std::string, BatchNormState<T>> bn;
};

namespace detail {

template <typename T>
Network<T> build_network(const ArchitectureSpec& arch, NetworkRole role, uint64_t seed) {
  Network<T> net;
  net.role = role;
  net.arch = arch;
  net.plan = layer_shape_plan(arch, role);

  Rng rng(seed);
  for (const LayerPlan& layer : net.plan) {
    for (const auto& [name, shape] : layer.parameter_shapes()) {
      Tensor<T> t(shape);
      if (name.ends_with("/kernel") || name.ends_with("/weight")) {
        rng.fill_normal(t, 0.0, kWeightInitStdDev);
      } else if (name.ends_with("/gain")) {
        for (T& v : t.data) v = T(1);
      }  // bias and shift stay zero
      net.params.emplace(name, std::move(t));
    }
    if (layer.batch_norm) net.bn.emplace(layer.name, BatchNormState<T>(layer.out_channels));
  }

  // realized shapes must equal the plan, exhaustively
  const auto planned = planned_parameter_shapes(net.plan);
  if (planned.size() != net.params.size()) {
    throw ShapeError("build_network: parameter count differs from plan");
  }
  for (const auto& [name, shape] : planned) {
    const auto it = net.params.find(name);
    if (it == net.params.end() || it->second.shape != shape) {
      throw ShapeError("build_network: parameter '" + name + "' does not match plan shape " +
                       shape_str(shape));
    }
  }
  return net;
}

}  // namespace detail

template <typename T>
Network<T> build_generator(const ArchitectureSpec& arch, uint64_t seed) {
  return detail::build_network<T>(arch, NetworkRole::Generator, seed);
}

template <typename T>
Network<T> build_discriminator(const ArchitectureSpec& arch, uint64_t seed) {
  return detail::build_network<T>(arch, NetworkRole::Discriminator, seed);
}

template <typename T>
Network<T> build_siamese(const ArchitectureSpec& arch, uint64_t seed) {
  return detail::build_network<T>(arch, NetworkRole::Siamese, seed);
}

// Tape leaves for one optimization pass. Binding once and forwarding several
// batches through the same leaves accumulates their gradients, which is
// exactly what the paired real/generated branches need.
template <typename T>
struct NetworkBinding {
  std::map<std::string, Var<T>> leaves;

  const Var<T>& at(const std::string& name) const { return leaves.at(name); }
};

template <typename T>
NetworkBinding<T> bind(const Network<T>& net, bool requires_grad = true) {
  NetworkBinding<T> binding;
  for (const auto& [name, t] : net.params) {
    binding.leaves.emplace(name, make_leaf(t, requires_grad, name));
  }
  return binding;
}

// Collect d(loss)/d(param) for every parameter of a binding after backward().
template <typename T>
GradientSet<T> collect_gradients(const NetworkBinding<T>& binding) {
  GradientSet<T> grads;
  for (const auto& [name, leaf] : binding.leaves) grads.emplace(name, grad_or_zeros(leaf));
  return grads;
}

namespace detail {

template <typename T>
Var<T> apply_activation(const Var<T>& x, Activation act) {
  switch (act) {
    case Activation::LeakyRelu: return leaky_relu(x, T(0.2));
    case Activation::Tanh: return tanh_act(x);
    case Activation::Sigmoid: return sigmoid_act(x);
    case Activation::Linear: return identity_act(x);
  }
  return x;
}

}  // namespace detail

// Forward pass. Train mode normalizes with batch statistics (and folds them
// into the running stats only when update_running_stats is set, i.e. during
// the owning network's own optimization pass); eval mode uses running stats
// and is batch-size independent.
template <typename T>
Var<T> forward(Network<T>& net, const NetworkBinding<T>& binding, const Var<T>& input,
               ForwardMode mode, bool update_running_stats = false) {
  const Tensor<T>& in = input->value;
  if (in.rank() != 4 || in.dim(1) != net.arch.channels || in.dim(2) != net.arch.image_size ||
      in.dim(3) != net.arch.image_size) {
    throw ShapeError(std::string("forward(") + role_name(net.role) + "): expected (N," +
                     std::to_string(net.arch.channels) + "," + std::to_string(net.arch.image_size) +
                     "," + std::to_string(net.arch.image_size) + "), got " + shape_str(in.shape));
  }

  std::vector<Var<T>> encoder_acts;
  Var<T> cur = input;
  for (const LayerPlan& layer : net.plan) {
    const Var<T> bias = layer.has_bias
                            ? binding.at(layer.name + "/bias")
                            : make_constant(Tensor<T>(Shape{layer.out_channels}, T(0)));
    switch (layer.kind) {
      case LayerKind::ConvS2:
        cur = conv2d_s2(cur, binding.at(layer.name + "/kernel"), bias);
        break;
      case LayerKind::ConvTransposeS2:
        if (layer.skip_source >= 0) {
          cur = concat_channels(cur, encoder_acts[static_cast<std::size_t>(layer.skip_source)]);
        }
        cur = conv_transpose2d_s2(cur, binding.at(layer.name + "/kernel"), bias);
        break;
      case LayerKind::Dense: {
        const int64_t n = cur->value.dim(0);
        cur = reshape(cur, Shape{n, cur->value.size() / n});
        cur = dense(cur, binding.at(layer.name + "/weight"), bias);
        break;
      }
    }
    if (layer.batch_norm) {
      cur = batch_norm(cur, binding.at(layer.name + "/gain"), binding.at(layer.name + "/shift"),
                       net.bn.at(layer.name), mode, update_running_stats);
    }
    cur = detail::apply_activation(cur, layer.activation);
    if (layer.kind == LayerKind::ConvS2 && net.role == NetworkRole::Generator) {
      encoder_acts.push_back(cur);
    }
  }
  return cur;
}

// Convenience: forward without gradient bookkeeping.
template <typename T>
Tensor<T> forward_eval(Network<T>& net, const Tensor<T>& batch) {
  auto binding = bind(net, false);
  auto out = forward(net, binding, make_constant(batch), ForwardMode::Eval, false);
  return out->value;
}

}  // namespace travelgan
