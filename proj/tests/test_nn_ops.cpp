#include <gtest/gtest.h>

#include "test_util.hpp"
#include "travelgan/autodiff.hpp"
#include "travelgan/nn_ops.hpp"

using namespace travelgan;
using testutil::dense_reference;
using testutil::max_abs_diff;
using testutil::random_tensor;

TEST(Activations, LeakyReluValues) {
  auto x = make_leaf(Tensor<double>(Shape{3}, {-1.0, 0.0, 2.0}));
  auto y = leaky_relu(x, 0.2);
  EXPECT_DOUBLE_EQ(y->value[0], -0.2);
  EXPECT_DOUBLE_EQ(y->value[1], 0.0);
  EXPECT_DOUBLE_EQ(y->value[2], 2.0);
  backward(sum_all(y));
  EXPECT_DOUBLE_EQ(x->grad[0], 0.2);
  EXPECT_DOUBLE_EQ(x->grad[2], 1.0);
}

TEST(Activations, TanhAndSigmoidAtZero) {
  auto x = make_constant(Tensor<double>(Shape{1}, 0.0));
  EXPECT_DOUBLE_EQ(tanh_act(x)->value[0], 0.0);
  EXPECT_DOUBLE_EQ(sigmoid_act(x)->value[0], 0.5);
}

TEST(Activations, SigmoidIsStableForLargeInputs) {
  auto x = make_constant(Tensor<double>(Shape{2}, {60.0, -60.0}));
  auto y = sigmoid_act(x);
  EXPECT_NEAR(y->value[0], 1.0, 1e-15);
  EXPECT_NEAR(y->value[1], 0.0, 1e-15);
  EXPECT_TRUE(y->value.all_finite());
}

TEST(Activations, IdentityReturnsInput) {
  auto x = make_leaf(random_tensor<double>({7}, 12));
  auto y = identity_act(x);
  for (int64_t i = 0; i < 7; ++i) EXPECT_EQ(y->value[i], x->value[i]);
}

TEST(Activations, TanhGradient) {
  auto x = make_leaf(Tensor<double>(Shape{1}, {0.3}));
  backward(sum_all(tanh_act(x)));
  const double t = std::tanh(0.3);
  EXPECT_NEAR(x->grad[0], 1.0 - t * t, 1e-14);
}

TEST(Dense, IdentityWeightPassesInputThrough) {
  Tensor<double> w(Shape{3, 3}, 0.0);
  for (int i = 0; i < 3; ++i) w[i * 3 + i] = 1.0;
  auto x = make_constant(random_tensor<double>({2, 3}, 31));
  auto y = dense(x, make_constant(w), make_constant(Tensor<double>(Shape{3}, 0.0)));
  EXPECT_LT(max_abs_diff(y->value, x->value), 1e-15);
}

TEST(Dense, ZeroWeightGivesConstantBias) {
  auto x = make_constant(random_tensor<double>({2, 4}, 32));
  auto y = dense(x, make_constant(Tensor<double>(Shape{4, 2}, 0.0)),
                 make_constant(Tensor<double>(Shape{2}, {0.3, -0.9})));
  for (int64_t r = 0; r < 2; ++r) {
    EXPECT_DOUBLE_EQ(y->value[r * 2 + 0], 0.3);
    EXPECT_DOUBLE_EQ(y->value[r * 2 + 1], -0.9);
  }
}

TEST(Dense, MatchesReferenceExactly) {
  auto x = make_constant(random_tensor<double>({2, 3}, 41));
  auto w = make_constant(random_tensor<double>({3, 4}, 42));
  auto b = make_constant(random_tensor<double>({4}, 43));
  auto y = dense(x, w, b);
  Tensor<double> expected = dense_reference(x->value, w->value, b->value);
  for (int64_t i = 0; i < y->value.size(); ++i) EXPECT_DOUBLE_EQ(y->value[i], expected[i]);
}

TEST(Dense, ShapeMismatchRejected) {
  auto x = make_constant(Tensor<double>(Shape{2, 3}, 0.0));
  auto w = make_constant(Tensor<double>(Shape{4, 2}, 0.0));
  auto b = make_constant(Tensor<double>(Shape{2}, 0.0));
  EXPECT_THROW(dense(x, w, b), ShapeError);
}

TEST(BatchNorm, AlreadyNormalizedInputPassesThrough) {
  // one channel whose batch statistics are exactly mean 0, var 1
  Tensor<double> x(Shape{2, 1, 1, 2});
  x.data = {1.0, -1.0, 1.0, -1.0};
  auto xv = make_constant(x);
  auto gain = make_constant(Tensor<double>(Shape{1}, 1.0));
  auto shift = make_constant(Tensor<double>(Shape{1}, 0.0));
  BatchNormState<double> state(1);
  auto y = batch_norm(xv, gain, shift, state, ForwardMode::Train);
  for (int64_t i = 0; i < 4; ++i) EXPECT_NEAR(y->value[i], x[i], 1e-5);
}

TEST(BatchNorm, ConstantChannelCollapsesToShift) {
  auto x = make_constant(Tensor<double>(Shape{3, 2, 2, 2}, 5.0));
  auto gain = make_constant(Tensor<double>(Shape{2}, 1.7));
  auto shift = make_constant(Tensor<double>(Shape{2}, {0.4, -0.2}));
  BatchNormState<double> state(2);
  auto y = batch_norm(x, gain, shift, state, ForwardMode::Train);
  for (int64_t n = 0; n < 3; ++n) {
    for (int64_t c = 0; c < 2; ++c) {
      for (int64_t i = 0; i < 4; ++i) {
        EXPECT_NEAR(y->value[(n * 2 + c) * 4 + i], shift->value[c], 1e-12);
      }
    }
  }
}

TEST(BatchNorm, TrainModeMomentsAreNormalized) {
  // stddev 2 keeps the epsilon bias on the recomputed variance well under
  // the 1e-5 budget
  Tensor<double> x = random_tensor<double>({4, 2, 4, 4}, 55, -4.0, 4.0);
  auto xv = make_constant(x);
  auto gain = make_constant(Tensor<double>(Shape{2}, 1.0));
  auto shift = make_constant(Tensor<double>(Shape{2}, 0.0));
  BatchNormState<double> state(2);
  auto y = batch_norm(xv, gain, shift, state, ForwardMode::Train);

  const int64_t m = 4 * 16;
  for (int64_t c = 0; c < 2; ++c) {
    double mean = 0.0, var = 0.0;
    for (int64_t n = 0; n < 4; ++n) {
      for (int64_t i = 0; i < 16; ++i) mean += y->value[(n * 2 + c) * 16 + i];
    }
    mean /= m;
    for (int64_t n = 0; n < 4; ++n) {
      for (int64_t i = 0; i < 16; ++i) {
        const double d = y->value[(n * 2 + c) * 16 + i] - mean;
        var += d * d;
      }
    }
    var /= m;
    EXPECT_LT(std::fabs(mean), 1e-6);
    EXPECT_LT(std::fabs(var - 1.0), 1e-5);
  }
}

TEST(BatchNorm, BatchOfOneRejectedInTrainMode) {
  auto x = make_constant(Tensor<double>(Shape{1, 2, 4, 4}, 0.0));
  auto gain = make_constant(Tensor<double>(Shape{2}, 1.0));
  auto shift = make_constant(Tensor<double>(Shape{2}, 0.0));
  BatchNormState<double> state(2);
  EXPECT_THROW(batch_norm(x, gain, shift, state, ForwardMode::Train), ShapeError);
  // eval mode is fine with a single image
  EXPECT_NO_THROW(batch_norm(x, gain, shift, state, ForwardMode::Eval));
}

TEST(BatchNorm, EvalModeUsesRunningStats) {
  auto gain = make_constant(Tensor<double>(Shape{1}, 1.0));
  auto shift = make_constant(Tensor<double>(Shape{1}, 0.0));
  BatchNormState<double> state(1);
  state.running_mean[0] = 2.0;
  state.running_var[0] = 4.0;
  auto x = make_constant(Tensor<double>(Shape{1, 1, 1, 2}, {4.0, 0.0}));
  auto y = batch_norm(x, gain, shift, state, ForwardMode::Eval);
  EXPECT_NEAR(y->value[0], 2.0 / std::sqrt(4.0 + 1e-5), 1e-9);
  EXPECT_NEAR(y->value[1], -2.0 / std::sqrt(4.0 + 1e-5), 1e-9);
}

TEST(BatchNorm, RunningStatsFollowEma) {
  auto gain = make_constant(Tensor<double>(Shape{1}, 1.0));
  auto shift = make_constant(Tensor<double>(Shape{1}, 0.0));
  BatchNormState<double> state(1);
  Tensor<double> x(Shape{2, 1, 1, 2});
  x.data = {1.0, 3.0, 5.0, 7.0};  // mean 4, biased var 5
  batch_norm(make_constant(x), gain, shift, state, ForwardMode::Train);
  EXPECT_NEAR(state.running_mean[0], 0.9 * 0.0 + 0.1 * 4.0, 1e-12);
  EXPECT_NEAR(state.running_var[0], 0.9 * 1.0 + 0.1 * 5.0, 1e-12);

  // with updates disabled the stats stay put
  BatchNormState<double> frozen(1);
  batch_norm(make_constant(x), gain, shift, frozen, ForwardMode::Train, false);
  EXPECT_EQ(frozen.running_mean[0], 0.0);
  EXPECT_EQ(frozen.running_var[0], 1.0);
}

TEST(BatchNorm, GainShiftGradients) {
  auto x = make_constant(random_tensor<double>({3, 2, 2, 2}, 77));
  auto gain = make_leaf(Tensor<double>(Shape{2}, {1.5, 0.5}));
  auto shift = make_leaf(Tensor<double>(Shape{2}, {0.1, -0.1}));
  BatchNormState<double> state(2);
  auto y = batch_norm(x, gain, shift, state, ForwardMode::Train);
  backward(mean_all(mul(y, y)));

  // finite differences on the same forward
  const double eps = 1e-6;
  auto eval = [&](double g0, double s0) {
    auto g = make_constant(Tensor<double>(Shape{2}, {g0, 0.5}));
    auto s = make_constant(Tensor<double>(Shape{2}, {s0, -0.1}));
    BatchNormState<double> st(2);
    auto out = batch_norm(x, g, s, st, ForwardMode::Train);
    double acc = 0.0;
    for (double v : out->value.data) acc += v * v;
    return acc / out->value.size();
  };
  const double fd_gain = (eval(1.5 + eps, 0.1) - eval(1.5 - eps, 0.1)) / (2 * eps);
  const double fd_shift = (eval(1.5, 0.1 + eps) - eval(1.5, 0.1 - eps)) / (2 * eps);
  EXPECT_NEAR(gain->grad[0], fd_gain, 1e-6);
  EXPECT_NEAR(shift->grad[0], fd_shift, 1e-6);
}
