#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "travelgan/optimizer.hpp"

using namespace travelgan;

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterSet<double> params;
  params.emplace("p", Tensor<double>::scalar(1.0));
  AdamState<double> state(params);
  GradientSet<double> grads;
  grads.emplace("p", Tensor<double>::scalar(1.0));
  adam_step(params, grads, state);
  // bias-corrected first step is lr * g / (|g| + eps) ~= lr
  EXPECT_NEAR(params.at("p")[0], 1.0 - 2e-4, 1e-8);
  EXPECT_EQ(state.step, 1);
}

TEST(Adam, ZeroGradientLeavesParametersUntouched) {
  ParameterSet<double> params;
  params.emplace("w", Tensor<double>(Shape{3}, {0.5, -0.25, 2.0}));
  AdamState<double> state(params);
  const Tensor<double> before = params.at("w");
  adam_step(params, {}, state);
  adam_step(params, {}, state);
  for (int64_t i = 0; i < 3; ++i) EXPECT_EQ(params.at("w")[i], before[i]);
  EXPECT_EQ(state.step, 2);
}

TEST(Adam, ThreeStepsMatchHandSimulation) {
  // f(p) = p^2, grad = 2p, starting at p0 = 1; simulate the exact same
  // update rule with scalars
  ParameterSet<double> params;
  params.emplace("p", Tensor<double>::scalar(1.0));
  AdamState<double> state(params);

  double p = 1.0, m = 0.0, v = 0.0;
  const double lr = 2e-4, b1 = 0.5, b2 = 0.9, eps = 1e-8;
  for (int t = 1; t <= 3; ++t) {
    const double g_sim = 2.0 * p;

    GradientSet<double> grads;
    grads.emplace("p", Tensor<double>::scalar(2.0 * params.at("p")[0]));
    adam_step(params, grads, state);

    m = b1 * m + (1 - b1) * g_sim;
    v = b2 * v + (1 - b2) * g_sim * g_sim;
    const double m_hat = m / (1 - std::pow(b1, t));
    const double v_hat = v / (1 - std::pow(b2, t));
    p -= lr * m_hat / (std::sqrt(v_hat) + eps);

    EXPECT_DOUBLE_EQ(params.at("p")[0], p);
  }
}

TEST(Adam, DefaultsArePinned) {
  ParameterSet<float> params;
  params.emplace("p", Tensor<float>::scalar(0.0f));
  AdamState<float> state(params);
  EXPECT_DOUBLE_EQ(state.lr, 2e-4);
  EXPECT_DOUBLE_EQ(state.beta1, 0.5);
  EXPECT_DOUBLE_EQ(state.beta2, 0.9);
}

TEST(Adam, ShapeMismatchRejected) {
  ParameterSet<double> params;
  params.emplace("p", Tensor<double>(Shape{3}, 0.0));
  AdamState<double> state(params);
  GradientSet<double> grads;
  grads.emplace("p", Tensor<double>(Shape{4}, 0.0));
  EXPECT_THROW(adam_step(params, grads, state), ShapeError);

  ParameterSet<double> extra = params;
  extra.emplace("q", Tensor<double>(Shape{2}, 0.0));
  EXPECT_THROW(adam_step(extra, {}, state), ShapeError);
}

TEST(Adam, DeterministicAcrossRuns) {
  auto run = [] {
    ParameterSet<float> params;
    params.emplace("w", testutil::random_tensor<float>({8}, 5));
    AdamState<float> state(params);
    for (int t = 0; t < 10; ++t) {
      GradientSet<float> grads;
      Tensor<float> g(Shape{8});
      for (int64_t i = 0; i < 8; ++i) g[i] = 0.1f * params.at("w")[i] + 0.01f * i;
      grads.emplace("w", g);
      adam_step(params, grads, state);
    }
    return params.at("w");
  };
  const Tensor<float> a = run();
  const Tensor<float> b = run();
  for (int64_t i = 0; i < 8; ++i) EXPECT_EQ(a[i], b[i]);
}
