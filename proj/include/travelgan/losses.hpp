#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <string>

#include "travelgan/autodiff.hpp"
#include "travelgan/tensor.hpp"

namespace travelgan {

inline constexpr double kCosineEps = 1e-8;
inline constexpr double kProbClamp = 1e-7;

enum class DistMetric { Cosine, CosinePlusL2 };

// Every loss-equation constant in one place. travel_weight scales the
// transformation-vector term inside both composite objectives.
struct LossConfig {
  double margin = 1.0;
  DistMetric dist_metric = DistMetric::Cosine;
  double l2_weight = 0.0;
  double adv_weight = 1.0;
  double travel_weight = 1.0;

  void validate() const {
    if (!(margin > 0.0)) throw ConfigError("loss margin must be positive");
    if (!std::isfinite(l2_weight) || l2_weight < 0.0) {
      throw ConfigError("l2_weight must be finite and non-negative");
    }
    if (!std::isfinite(adv_weight) || adv_weight < 0.0 || !std::isfinite(travel_weight) ||
        travel_weight < 0.0) {
      throw ConfigError("loss weights must be finite and non-negative");
    }
  }
};

struct LossBreakdown {
  double l_adv_g = 0.0;
  double l_travel = 0.0;
  double l_sc = 0.0;
  double l_d = 0.0;
  double l_g_total = 0.0;
  double l_s_total = 0.0;
};

// The full field of transformation vectors over a batch of embeddings:
// v[i][j] = z[j] - z[i]. Antisymmetric with a zero diagonal.
template <typename T>
struct PairwiseVectors {
  int64_t batch = 0;
  int64_t latent_dim = 0;
  Tensor<T> vectors;  // (B, B, L)

  static PairwiseVectors from_latents(const Tensor<T>& latents) {
    if (latents.rank() != 2) {
      throw ShapeError("PairwiseVectors: latents must be (B, L), got " + shape_str(latents.shape));
    }
    auto v = pairwise_diff(make_constant(latents));
    return PairwiseVectors{latents.dim(0), latents.dim(1), v->value};
  }

  bool antisymmetric() const {
    for (int64_t i = 0; i < batch; ++i) {
      for (int64_t j = 0; j < batch; ++j) {
        for (int64_t k = 0; k < latent_dim; ++k) {
          if (vectors[(i * batch + j) * latent_dim + k] !=
              -vectors[(j * batch + i) * latent_dim + k]) {
            return false;
          }
        }
      }
    }
    return true;
  }
};

// Graph version used in training: (B, L) latents -> (B, B, L) vector field.
template <typename T>
Var<T> transformation_vectors(const Var<T>& latents) {
  return pairwise_diff(latents);
}

namespace detail {

template <typename T>
void check_pair_field(const Var<T>& nu, const char* op) {
  if (nu->value.rank() != 3 || nu->value.dim(0) != nu->value.dim(1)) {
    throw ShapeError(std::string(op) + ": expected (B, B, L) vector field, got " +
                     shape_str(nu->value.shape));
  }
}

template <typename T>
Var<T> zero_scalar_with_warning(const char* op) {
  std::cerr << "[travelgan] " << op << ": fewer than two samples, no pairs exist; loss = 0\n";
  return make_constant(Tensor<T>::scalar(T(0)));
}

// Pairwise Euclidean norms of a (B, B, L) field -> (B, B).
template <typename T>
Var<T> pair_norms(const Var<T>& nu) {
  return sqrt_nz(sum_last(mul(nu, nu)));
}

}  // namespace detail

// Mean over ordered pairs i != j of the distance between real and generated
// transformation vectors. Cosine distance guards its denominator with
// max(|a||b|, eps) so that identical or exactly proportional fields score 0.
template <typename T>
Var<T> travel_loss(const Var<T>& nu_real, const Var<T>& nu_gen, const LossConfig& cfg) {
  detail::check_pair_field(nu_real, "travel_loss");
  detail::check_pair_field(nu_gen, "travel_loss");
  require_same_shape(nu_real->value, nu_gen->value, "travel_loss");
  const int64_t b = nu_real->value.dim(0);
  if (b < 2) return detail::zero_scalar_with_warning<T>("travel_loss");
  const int64_t latent = nu_real->value.dim(2);

  auto dot_rg = sum_last(mul(nu_real, nu_gen));
  auto norm_prod = mul(detail::pair_norms(nu_real), detail::pair_norms(nu_gen));
  auto denom = clamp_min(norm_prod, static_cast<T>(kCosineEps));
  auto cosine_dist = add_const(mul_const(div(dot_rg, denom), T(-1)), T(1));

  Var<T> per_pair = cosine_dist;
  if (cfg.dist_metric == DistMetric::CosinePlusL2 && cfg.l2_weight > 0.0) {
    auto diff = sub(nu_real, nu_gen);
    auto l2 = mul_const(sum_last(mul(diff, diff)),
                        static_cast<T>(cfg.l2_weight / static_cast<double>(latent)));
    per_pair = add(per_pair, l2);
  }
  return offdiag_mean(per_pair);
}

// Margin contrastive term: mean over ordered pairs of max(0, margin - |v|).
// Subgradient 0 at the kink.
template <typename T>
Var<T> margin_loss(const Var<T>& nu_real, const LossConfig& cfg) {
  detail::check_pair_field(nu_real, "margin_loss");
  if (nu_real->value.dim(0) < 2) return detail::zero_scalar_with_warning<T>("margin_loss");
  auto norms = detail::pair_norms(nu_real);
  auto hinge = positive_part(add_const(mul_const(norms, T(-1)), static_cast<T>(cfg.margin)));
  return offdiag_mean(hinge);
}

// Binary cross-entropy for the discriminator over two distinct batches.
// Probabilities are clamped to [1e-7, 1 - 1e-7] before the logs.
template <typename T>
Var<T> adversarial_d_loss(const Var<T>& d_real, const Var<T>& d_fake) {
  const T lo = static_cast<T>(kProbClamp);
  const T hi = T(1) - lo;
  auto real_term = mean_all(log_op(clamp(d_real, lo, hi)));
  auto one_minus_fake = add_const(mul_const(d_fake, T(-1)), T(1));
  auto fake_term = mean_all(log_op(clamp(one_minus_fake, lo, hi)));
  return mul_const(add(real_term, fake_term), T(-1));
}

// Non-saturating generator objective: -mean log D(G(x)).
template <typename T>
Var<T> adversarial_g_loss(const Var<T>& d_fake) {
  const T lo = static_cast<T>(kProbClamp);
  const T hi = T(1) - lo;
  return mul_const(mean_all(log_op(clamp(d_fake, lo, hi))), T(-1));
}

// Composite objectives. The generator sees adversarial plus travel terms;
// the siamese network sees margin plus travel.
template <typename T>
Var<T> generator_objective(const Var<T>& l_adv_g, const Var<T>& l_travel, const LossConfig& cfg) {
  return add(mul_const(l_adv_g, static_cast<T>(cfg.adv_weight)),
             mul_const(l_travel, static_cast<T>(cfg.travel_weight)));
}

template <typename T>
Var<T> siamese_objective(const Var<T>& l_sc, const Var<T>& l_travel, const LossConfig& cfg) {
  return add(l_sc, mul_const(l_travel, static_cast<T>(cfg.travel_weight)));
}

inline LossBreakdown compose_losses(double l_adv_g, double l_travel, double l_sc, double l_d,
                                    const LossConfig& cfg) {
  LossBreakdown b;
  b.l_adv_g = l_adv_g;
  b.l_travel = l_travel;
  b.l_sc = l_sc;
  b.l_d = l_d;
  b.l_g_total = cfg.adv_weight * l_adv_g + cfg.travel_weight * l_travel;
  b.l_s_total = l_sc + cfg.travel_weight * l_travel;
  return b;
}

}  // namespace travelgan
