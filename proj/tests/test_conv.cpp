#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"
#include "travelgan/autodiff.hpp"
#include "travelgan/nn_ops.hpp"

using namespace travelgan;
using testutil::conv2d_s2_reference;
using testutil::conv_transpose2d_s2_reference;
using testutil::dot;
using testutil::max_abs_diff;
using testutil::random_tensor;

TEST(Conv2dS2, ZeroInputGivesZeroOutput) {
  auto x = make_constant(Tensor<double>(Shape{1, 2, 8, 8}, 0.0));
  auto k = make_constant(random_tensor<double>({3, 2, 4, 4}, 1));
  auto b = make_constant(Tensor<double>(Shape{3}, 0.0));
  auto y = conv2d_s2(x, k, b);
  EXPECT_EQ(y->value.shape, (Shape{1, 3, 4, 4}));
  for (double v : y->value.data) EXPECT_EQ(v, 0.0);
}

TEST(Conv2dS2, OnesInputCountsInBoundsTaps) {
  auto x = make_constant(Tensor<double>(Shape{1, 1, 4, 4}, 1.0));
  auto k = make_constant(Tensor<double>(Shape{1, 1, 4, 4}, 1.0));
  auto b = make_constant(Tensor<double>(Shape{1}, 0.0));
  auto y = conv2d_s2(x, k, b);
  // independently recompute the per-window tap counts
  Tensor<double> expected = conv2d_s2_reference(x->value, k->value, b->value);
  for (int64_t i = 0; i < y->value.size(); ++i) {
    EXPECT_DOUBLE_EQ(y->value[i], expected[i]);
  }
  // every 2x2 window of a 4x4 input with pad 1 sees exactly 9 in-bounds taps
  for (double v : y->value.data) EXPECT_DOUBLE_EQ(v, 9.0);
}

TEST(Conv2dS2, BiasPassthroughOnZeroInput) {
  auto x = make_constant(Tensor<double>(Shape{2, 1, 6, 6}, 0.0));
  auto k = make_constant(random_tensor<double>({2, 1, 4, 4}, 2));
  auto b = make_constant(Tensor<double>(Shape{2}, {0.7, -1.2}));
  auto y = conv2d_s2(x, k, b);
  for (int64_t n = 0; n < 2; ++n) {
    for (int64_t c = 0; c < 2; ++c) {
      for (int64_t i = 0; i < 9; ++i) {
        EXPECT_DOUBLE_EQ(y->value[(n * 2 + c) * 9 + i], b->value[c]);
      }
    }
  }
}

TEST(Conv2dS2, MatchesReferenceOnRandomInputs) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const int64_t n = 1 + static_cast<int64_t>(rng() % 3);
    const int64_t ci = 1 + static_cast<int64_t>(rng() % 4);
    const int64_t co = 1 + static_cast<int64_t>(rng() % 4);
    const int64_t h = 4 + 2 * static_cast<int64_t>(rng() % 5);
    const int64_t w = 4 + 2 * static_cast<int64_t>(rng() % 5);
    auto x = make_constant(random_tensor<double>({n, ci, h, w}, rng()));
    auto k = make_constant(random_tensor<double>({co, ci, 4, 4}, rng()));
    auto b = make_constant(random_tensor<double>({co}, rng()));
    auto y = conv2d_s2(x, k, b);
    Tensor<double> expected = conv2d_s2_reference(x->value, k->value, b->value);
    EXPECT_LT(max_abs_diff(y->value, expected), 1e-12);
  }
}

TEST(Conv2dS2, ChannelMismatchNamesBothShapes) {
  auto x = make_constant(Tensor<double>(Shape{1, 3, 8, 8}, 0.0));
  auto k = make_constant(Tensor<double>(Shape{4, 2, 4, 4}, 0.0));
  auto b = make_constant(Tensor<double>(Shape{4}, 0.0));
  try {
    conv2d_s2(x, k, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(1,3,8,8)"), std::string::npos);
    EXPECT_NE(msg.find("(4,2,4,4)"), std::string::npos);
  }
}

TEST(Conv2dS2, RejectsOddOrTinySpatialExtents) {
  auto k = make_constant(Tensor<double>(Shape{1, 1, 4, 4}, 0.0));
  auto b = make_constant(Tensor<double>(Shape{1}, 0.0));
  EXPECT_THROW(conv2d_s2(make_constant(Tensor<double>(Shape{1, 1, 5, 8}, 0.0)), k, b), ShapeError);
  EXPECT_THROW(conv2d_s2(make_constant(Tensor<double>(Shape{1, 1, 2, 2}, 0.0)), k, b), ShapeError);
}

TEST(ConvTranspose2dS2, ZeroInputGivesConstantBias) {
  auto x = make_constant(Tensor<double>(Shape{1, 3, 4, 4}, 0.0));
  auto k = make_constant(random_tensor<double>({3, 2, 4, 4}, 5));
  auto b = make_constant(Tensor<double>(Shape{2}, {0.25, -0.5}));
  auto y = conv_transpose2d_s2(x, k, b);
  EXPECT_EQ(y->value.shape, (Shape{1, 2, 8, 8}));
  for (int64_t c = 0; c < 2; ++c) {
    for (int64_t i = 0; i < 64; ++i) EXPECT_DOUBLE_EQ(y->value[c * 64 + i], b->value[c]);
  }
}

TEST(ConvTranspose2dS2, DoublesSpatialShape) {
  auto x = make_constant(random_tensor<double>({2, 4, 8, 8}, 3));
  auto k = make_constant(random_tensor<double>({4, 3, 4, 4}, 4));
  auto b = make_constant(Tensor<double>(Shape{3}, 0.0));
  auto y = conv_transpose2d_s2(x, k, b);
  EXPECT_EQ(y->value.shape, (Shape{2, 3, 16, 16}));
}

TEST(ConvTranspose2dS2, MatchesReferenceOnRandomInputs) {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 10; ++trial) {
    const int64_t n = 1 + static_cast<int64_t>(rng() % 2);
    const int64_t co = 1 + static_cast<int64_t>(rng() % 3);
    const int64_t ci = 1 + static_cast<int64_t>(rng() % 3);
    const int64_t h = 2 + static_cast<int64_t>(rng() % 4);
    const int64_t w = 2 + static_cast<int64_t>(rng() % 4);
    auto x = make_constant(random_tensor<double>({n, co, h, w}, rng()));
    auto k = make_constant(random_tensor<double>({co, ci, 4, 4}, rng()));
    auto b = make_constant(random_tensor<double>({ci}, rng()));
    auto y = conv_transpose2d_s2(x, k, b);
    Tensor<double> expected = conv_transpose2d_s2_reference(x->value, k->value, b->value);
    EXPECT_LT(max_abs_diff(y->value, expected), 1e-12);
  }
}

TEST(ConvTranspose2dS2, AdjointIdentityOnSmallPair) {
  // <conv(x), y> == <x, convT(y)> for the same kernel, both sides also
  // recomputed with the direct-summation references.
  auto x = make_constant(random_tensor<double>({1, 1, 4, 4}, 71));
  auto y = make_constant(random_tensor<double>({1, 1, 2, 2}, 72));
  auto k = make_constant(random_tensor<double>({1, 1, 4, 4}, 73));
  auto zero_b1 = make_constant(Tensor<double>(Shape{1}, 0.0));

  auto ax = conv2d_s2(x, k, zero_b1);
  auto aty = conv_transpose2d_s2(y, k, zero_b1);
  const double lhs = dot(ax->value, y->value);
  const double rhs = dot(x->value, aty->value);
  EXPECT_NEAR(lhs, rhs, 1e-10);

  const double lhs_ref = dot(conv2d_s2_reference(x->value, k->value, zero_b1->value), y->value);
  const double rhs_ref =
      dot(x->value, conv_transpose2d_s2_reference(y->value, k->value, zero_b1->value));
  EXPECT_NEAR(lhs_ref, rhs_ref, 1e-10);
  EXPECT_NEAR(lhs, lhs_ref, 1e-10);
}

TEST(ConvTranspose2dS2, AdjointIdentityOverRandomShapes) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const int64_t n = 1 + static_cast<int64_t>(rng() % 3);
    const int64_t ci = 1 + static_cast<int64_t>(rng() % 4);
    const int64_t co = 1 + static_cast<int64_t>(rng() % 4);
    const int64_t h = 4 + 2 * static_cast<int64_t>(rng() % 7);
    const int64_t w = 4 + 2 * static_cast<int64_t>(rng() % 7);
    auto x = make_constant(random_tensor<double>({n, ci, h, w}, rng()));
    auto y = make_constant(random_tensor<double>({n, co, h / 2, w / 2}, rng()));
    auto k = make_constant(random_tensor<double>({co, ci, 4, 4}, rng()));
    auto zb_co = make_constant(Tensor<double>(Shape{co}, 0.0));
    auto zb_ci = make_constant(Tensor<double>(Shape{ci}, 0.0));

    const double lhs = dot(conv2d_s2(x, k, zb_co)->value, y->value);
    const double rhs = dot(x->value, conv_transpose2d_s2(y, k, zb_ci)->value);
    const double scale = std::max({std::fabs(lhs), std::fabs(rhs), 1.0});
    EXPECT_LT(std::fabs(lhs - rhs) / scale, 1e-8);
  }
}

TEST(ConvTranspose2dS2, ChannelMismatchRejected) {
  auto x = make_constant(Tensor<double>(Shape{1, 3, 4, 4}, 0.0));
  auto k = make_constant(Tensor<double>(Shape{2, 2, 4, 4}, 0.0));
  auto b = make_constant(Tensor<double>(Shape{2}, 0.0));
  EXPECT_THROW(conv_transpose2d_s2(x, k, b), ShapeError);
}

TEST(ConvGradients, MatchReferenceByPerturbation) {
  // spot-check conv input/kernel/bias gradients against the reference
  // forward, perturbing one coordinate at a time
  auto x = make_leaf(random_tensor<double>({1, 2, 4, 4}, 301));
  auto k = make_leaf(random_tensor<double>({2, 2, 4, 4}, 302));
  auto b = make_leaf(random_tensor<double>({2}, 303));
  auto w = make_constant(random_tensor<double>({1, 2, 2, 2}, 304));

  auto y = conv2d_s2(x, k, b);
  auto loss = sum_all(mul(y, w));  // weighted sum so gradients are non-trivial
  backward(loss);

  const double eps = 1e-6;
  auto loss_at = [&](const Tensor<double>& xv, const Tensor<double>& kv,
                     const Tensor<double>& bv) {
    Tensor<double> out = conv2d_s2_reference(xv, kv, bv);
    double acc = 0.0;
    for (int64_t i = 0; i < out.size(); ++i) acc += out[i] * w->value[i];
    return acc;
  };

  std::mt19937_64 rng(777);
  for (int probe = 0; probe < 10; ++probe) {
    const int64_t ix = static_cast<int64_t>(rng() % x->value.size());
    Tensor<double> xp = x->value, xm = x->value;
    xp[ix] += eps;
    xm[ix] -= eps;
    const double fd = (loss_at(xp, k->value, b->value) - loss_at(xm, k->value, b->value)) /
                      (2 * eps);
    EXPECT_NEAR(x->grad[ix], fd, 1e-7);

    const int64_t ik = static_cast<int64_t>(rng() % k->value.size());
    Tensor<double> kp = k->value, km = k->value;
    kp[ik] += eps;
    km[ik] -= eps;
    const double fdk = (loss_at(x->value, kp, b->value) - loss_at(x->value, km, b->value)) /
                       (2 * eps);
    EXPECT_NEAR(k->grad[ik], fdk, 1e-7);
  }
  Tensor<double> bp = b->value, bm = b->value;
  bp[0] += eps;
  bm[0] -= eps;
  const double fdb = (loss_at(x->value, k->value, bp) - loss_at(x->value, k->value, bm)) /
                     (2 * eps);
  EXPECT_NEAR(b->grad[0], fdb, 1e-7);
}

TEST(ConvTransposeGradients, MatchReferenceByPerturbation) {
  auto x = make_leaf(random_tensor<double>({1, 2, 2, 2}, 401));
  auto k = make_leaf(random_tensor<double>({2, 1, 4, 4}, 402));
  auto b = make_leaf(random_tensor<double>({1}, 403));
  auto w = make_constant(random_tensor<double>({1, 1, 4, 4}, 404));

  auto y = conv_transpose2d_s2(x, k, b);
  auto loss = sum_all(mul(y, w));
  backward(loss);

  const double eps = 1e-6;
  auto loss_at = [&](const Tensor<double>& xv, const Tensor<double>& kv,
                     const Tensor<double>& bv) {
    Tensor<double> out = conv_transpose2d_s2_reference(xv, kv, bv);
    double acc = 0.0;
    for (int64_t i = 0; i < out.size(); ++i) acc += out[i] * w->value[i];
    return acc;
  };

  for (int64_t ix = 0; ix < x->value.size(); ++ix) {
    Tensor<double> xp = x->value, xm = x->value;
    xp[ix] += eps;
    xm[ix] -= eps;
    const double fd = (loss_at(xp, k->value, b->value) - loss_at(xm, k->value, b->value)) /
                      (2 * eps);
    EXPECT_NEAR(x->grad[ix], fd, 1e-7);
  }
  for (int64_t ik = 0; ik < k->value.size(); ik += 5) {
    Tensor<double> kp = k->value, km = k->value;
    kp[ik] += eps;
    km[ik] -= eps;
    const double fd = (loss_at(x->value, kp, b->value) - loss_at(x->value, km, b->value)) /
                      (2 * eps);
    EXPECT_NEAR(k->grad[ik], fd, 1e-7);
  }
}
