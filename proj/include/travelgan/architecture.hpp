#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "travelgan/errors.hpp"
#include "travelgan/tensor.hpp"

namespace travelgan {

enum class NetworkRole { Generator, Discriminator, Siamese };
enum class LayerKind { ConvS2, ConvTransposeS2, Dense };
enum class Activation { LeakyRelu, Tanh, Sigmoid, Linear };

inline const char* role_name(NetworkRole role) {
  switch (role) {
    case NetworkRole::Generator: return "generator";
    case NetworkRole::Discriminator: return "discriminator";
    case NetworkRole::Siamese: return "siamese";
  }
  return "?";
}

// Image geometry and widths that pin every layer shape. disc_depth is the
// number of stride-2 halvings that brings image_size down to 4.
struct ArchitectureSpec {
  int64_t image_size = 32;
  int64_t channels = 3;
  int64_t base_filters = 64;
  int64_t filter_cap_multiple = 8;
  int64_t latent_dim = 1000;

  int disc_depth() const {
    int depth = 0;
    for (int64_t s = image_size; s > 4; s /= 2) ++depth;
    return depth;
  }

  void validate() const {
    if (image_size < 16 || (image_size & (image_size - 1)) != 0) {
      throw ConfigError("image_size must be a power of two >= 16, got " +
                        std::to_string(image_size));
    }
    if (channels != 3) throw ConfigError("channels must be 3");
    if (base_filters < 1) throw ConfigError("base_filters must be positive");
    if (filter_cap_multiple < 1) throw ConfigError("filter_cap_multiple must be positive");
    if (latent_dim < 1) throw ConfigError("latent_dim must be positive");
  }
};

// One layer of the static shape trace. For conv kinds in/out are channel
// counts and out_h/out_w the spatial extents; for dense they are unit counts.
struct LayerPlan {
  std::string name;
  LayerKind kind = LayerKind::ConvS2;
  int64_t in_channels = 0;
  int64_t out_channels = 0;
  int64_t out_h = 0;
  int64_t out_w = 0;
  Activation activation = Activation::LeakyRelu;
  bool batch_norm = false;
  bool has_bias = true;
  int skip_source = -1;  // encoder layer index concatenated into this layer's input

  std::map<std::string, Shape> parameter_shapes() const {
    std::map<std::string, Shape> shapes;
    switch (kind) {
      case LayerKind::ConvS2:
        shapes[name + "/kernel"] = Shape{out_channels, in_channels, 4, 4};
        break;
      case LayerKind::ConvTransposeS2:
        shapes[name + "/kernel"] = Shape{in_channels, out_channels, 4, 4};
        break;
      case LayerKind::Dense:
        shapes[name + "/weight"] = Shape{in_channels, out_channels};
        break;
    }
    if (has_bias) shapes[name + "/bias"] = Shape{out_channels};
    if (batch_norm) {
      shapes[name + "/gain"] = Shape{out_channels};
      shapes[name + "/shift"] = Shape{out_channels};
    }
    return shapes;
  }
};

namespace detail {

// Discriminator/siamese trunk: filters double each layer, capped at
// cap_multiple * n.
inline int64_t trunk_filters(const ArchitectureSpec& arch, int layer) {
  int64_t f = arch.base_filters;
  for (int i = 0; i < layer; ++i) f *= 2;
  return std::min<int64_t>(f, arch.base_filters * arch.filter_cap_multiple);
}

// Generator encoder: n, 2n, 4n, 4n, 4n, ... truncated to the first `depth`.
inline int64_t encoder_filters(const ArchitectureSpec& arch, int layer) {
  const int64_t mult = layer >= 2 ? 4 : (int64_t(1) << layer);
  return arch.base_filters * mult;
}

}  // namespace detail

// The complete static shape trace for one network. The discriminator ends in
// a single sigmoid unit, the siamese encoder in latent_dim linear units, the
// generator in a 3-channel tanh image the size of its input.
inline std::vector<LayerPlan> layer_shape_plan(const ArchitectureSpec& arch, NetworkRole role) {
  arch.validate();
  const int depth = arch.disc_depth();
  std::vector<LayerPlan> plan;

  if (role == NetworkRole::Discriminator || role == NetworkRole::Siamese) {
    int64_t in_c = arch.channels;
    int64_t hw = arch.image_size;
    for (int k = 0; k < depth; ++k) {
      LayerPlan layer;
      layer.name = "conv" + std::to_string(k + 1);
      layer.kind = LayerKind::ConvS2;
      layer.in_channels = in_c;
      layer.out_channels = detail::trunk_filters(arch, k);
      hw /= 2;
      layer.out_h = layer.out_w = hw;
      layer.activation = Activation::LeakyRelu;
      layer.batch_norm = k > 0;  // no batch norm on the first discriminator layer
      layer.has_bias = !layer.batch_norm;  // the batch-norm shift subsumes a conv bias
      plan.push_back(layer);
      in_c = layer.out_channels;
    }
    LayerPlan final_layer;
    final_layer.name = "final";
    final_layer.kind = LayerKind::Dense;
    final_layer.in_channels = in_c * hw * hw;  // hw == 4 by construction
    final_layer.out_channels = role == NetworkRole::Discriminator ? 1 : arch.latent_dim;
    final_layer.activation =
        role == NetworkRole::Discriminator ? Activation::Sigmoid : Activation::Linear;
    final_layer.batch_norm = false;
    // every objective touching the siamese output sees only pairwise
    // differences, so a head bias could never receive gradient
    final_layer.has_bias = role == NetworkRole::Discriminator;
    plan.push_back(final_layer);
    return plan;
  }

  // Generator: U-Net with disc_depth halvings, a mirror-image decoder, and
  // skip concatenations from each encoder activation at the same resolution.
  std::vector<int64_t> enc_out(static_cast<std::size_t>(depth));
  int64_t in_c = arch.channels;
  int64_t hw = arch.image_size;
  for (int k = 0; k < depth; ++k) {
    LayerPlan layer;
    layer.name = "enc" + std::to_string(k + 1);
    layer.kind = LayerKind::ConvS2;
    layer.in_channels = in_c;
    layer.out_channels = detail::encoder_filters(arch, k);
    hw /= 2;
    layer.out_h = layer.out_w = hw;
    layer.activation = Activation::LeakyRelu;
    layer.batch_norm = true;
    layer.has_bias = false;
    plan.push_back(layer);
    enc_out[static_cast<std::size_t>(k)] = layer.out_channels;
    in_c = layer.out_channels;
  }
  for (int j = 1; j <= depth; ++j) {
    LayerPlan layer;
    const bool is_output = j == depth;
    layer.name = is_output ? "out" : "dec" + std::to_string(j);
    layer.kind = LayerKind::ConvTransposeS2;
    layer.skip_source = j >= 2 ? depth - j : -1;
    layer.in_channels =
        in_c + (layer.skip_source >= 0 ? enc_out[static_cast<std::size_t>(layer.skip_source)] : 0);
    layer.out_channels =
        is_output ? arch.channels : enc_out[static_cast<std::size_t>(depth - 1 - j)];
    hw *= 2;
    layer.out_h = layer.out_w = hw;
    layer.activation = is_output ? Activation::Tanh : Activation::LeakyRelu;
    layer.batch_norm = !is_output;
    layer.has_bias = is_output;
    plan.push_back(layer);
    in_c = layer.out_channels;
  }
  return plan;
}

inline std::map<std::string, Shape> planned_parameter_shapes(const std::vector<LayerPlan>& plan) {
  std::map<std::string, Shape> shapes;
  for (const LayerPlan& layer : plan) {
    for (auto& [name, shape] : layer.parameter_shapes()) shapes[name] = shape;
  }
  return shapes;
}

}  // namespace travelgan
