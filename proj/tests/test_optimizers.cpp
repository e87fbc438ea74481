#include <cmath>

#include <gtest/gtest.h>

#include "ddg/error.hpp"
#include "ddg/optimizers.hpp"
#include "ddg/random.hpp"

using namespace ddg;

namespace {

std::vector<LayerState> vec_state(std::initializer_list<Scalar> w) { return {LayerState{Tensor::vector(w), {}}}; }

}  // namespace

TEST(Stepsize, DiminishingValues) {
  const auto s = StepsizeSchedule::diminishing(1.0);
  EXPECT_EQ(stepsize(s, 0), 1.0);
  EXPECT_EQ(stepsize(s, 1), 0.5);
  EXPECT_EQ(stepsize(s, 9), 0.1);
  for (std::int64_t t = 0; t < 100; ++t) ASSERT_LT(s.at(t + 1), s.at(t));
}

TEST(Stepsize, FixedIsConstant) {
  const auto s = StepsizeSchedule::fixed(0.01);
  for (std::int64_t t : {0, 1, 7, 1000000}) EXPECT_EQ(s.at(t), 0.01);
  EXPECT_EQ(s.partial_sum(0), 0.0);
}

TEST(Stepsize, PartialSumsMatchDirectSummation) {
  const auto s = StepsizeSchedule::diminishing(1.0);
  double sum = 0, sq = 0;
  for (std::int64_t t = 0; t < 1000; ++t) {
    sum += 1.0 / double(1 + t);
    sq += (1.0 / double(1 + t)) * (1.0 / double(1 + t));
  }
  EXPECT_EQ(s.partial_sum(1000), sum);
  EXPECT_EQ(s.partial_sum_sq(1000), sq);
}

TEST(Stepsize, InvalidParameters) {
  EXPECT_THROW(StepsizeSchedule::fixed(0.0), ConfigError);
  EXPECT_THROW(StepsizeSchedule::diminishing(-1.0), ConfigError);
  EXPECT_THROW(StepsizeSchedule::fixed(0.1).at(-1), DomainError);
}

TEST(Sgd, OneStep) {
  auto w = vec_state({1, 1});
  const auto g = vec_state({1, 2});
  auto st = make_sgd_state({StepsizeSchedule::fixed(0.1)}, w);
  sgd_step(st, w, g, 0);
  EXPECT_EQ(w[0].weights, Tensor::vector({0.9, 0.8}));
}

TEST(Sgd, ZeroGradientIsNoOp) {
  auto w = vec_state({1.5, -2});
  const auto before = w;
  SgdConfig c{StepsizeSchedule::fixed(0.1), 0.9, 0.01};
  auto st = make_sgd_state(c, w);
  for (std::int64_t t = 0; t < 3; ++t) sgd_step(st, w, vec_state({0, 0}), t, /*warmup=*/true);
  EXPECT_EQ(w, before);
}

TEST(Sgd, QuadraticContraction) {
  // f(w) = 0.5 ||w||^2, gradient w: w^t = 0.9^t w^0.
  auto w = vec_state({1, -2, 0.5});
  std::vector<double> direct = {1, -2, 0.5};
  auto st = make_sgd_state({StepsizeSchedule::fixed(0.1)}, w);
  for (std::int64_t t = 0; t < 50; ++t) {
    const auto g = w;
    sgd_step(st, w, g, t);
    for (double& v : direct) v = v - 0.1 * v;
    for (std::size_t i = 0; i < 3; ++i) {
      ASSERT_EQ(w[0].weights[i], direct[i]);
      const double closed = std::pow(0.9, double(t + 1)) * (i == 0 ? 1 : i == 1 ? -2 : 0.5);
      ASSERT_NEAR(w[0].weights[i], closed, 1e-13 * std::abs(closed));
    }
  }
}

TEST(Sgd, MomentumAndWeightDecay) {
  auto w = vec_state({1});
  auto st = make_sgd_state({StepsizeSchedule::fixed(0.1), 0.5, 0.2}, w);
  double wv = 1, v = 0;
  for (std::int64_t t = 0; t < 5; ++t) {
    sgd_step(st, w, vec_state({0.3}), t);
    v = 0.5 * v + (0.3 + 0.2 * wv);
    wv = wv - 0.1 * v;
    ASSERT_EQ(w[0].weights[0], wv);
  }
}

TEST(Sgd, ShapeMismatch) {
  auto w = vec_state({1, 2});
  auto st = make_sgd_state({}, w);
  EXPECT_THROW(sgd_step(st, w, vec_state({1, 2, 3}), 0), ContractError);
  EXPECT_THROW(sgd_step(st, w, {}, 0), ContractError);
}

TEST(Adam, FirstStepBiasCorrectionIsExact) {
  RandomSource src(1);
  std::vector<LayerState> w{{draw(src, Distribution::gaussian(0, 1), {3, 4}), draw(src, Distribution::gaussian(0, 1), {4})}};
  const std::vector<LayerState> g{{draw(src, Distribution::gaussian(0, 3), {3, 4}), draw(src, Distribution::gaussian(0, 3), {4})}};
  AdamConfig c;
  const auto k = AdamCorrection::at(c, 0);
  EXPECT_EQ(k.take1, 1.0);
  EXPECT_EQ(k.keep1 * 0.0, 0.0);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(k.m_hat(0.0, g[0].weights[i]), g[0].weights[i]);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(k.m_hat(0.0, g[0].bias[i]), g[0].bias[i]);
  // So the first step is gamma * g / (|g| + eps) exactly.
  const auto before = w;
  auto st = make_adam_state(c, w);
  adam_step(st, w, g, 0);
  for (std::size_t i = 0; i < 12; ++i) {
    const double gi = g[0].weights[i];
    EXPECT_EQ(w[0].weights[i], before[0].weights[i] - c.gamma * gi / (std::abs(gi) + c.epsilon));
  }
}

TEST(Adam, ZeroGradientAtStartLeavesEverythingZero) {
  auto w = vec_state({1, 2});
  const auto before = w;
  auto st = make_adam_state({}, w);
  adam_step(st, w, vec_state({0, 0}), 0);
  EXPECT_EQ(w, before);
  EXPECT_EQ(st.m[0].weights, Tensor::vector({0, 0}));
  EXPECT_EQ(st.v[0].weights, Tensor::vector({0, 0}));
}

TEST(Adam, ConstantGradientMatchesScalarOracle) {
  const double c = 0.37, gamma = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  auto w = vec_state({0.5});
  auto st = make_adam_state({gamma, b1, b2, eps}, w);
  double wo = 0.5, m = 0, v = 0;
  for (std::int64_t t = 0; t < 10; ++t) {
    adam_step(st, w, vec_state({c}), t);
    m = b1 * m + (1 - b1) * c;
    v = b2 * v + (1 - b2) * c * c;
    const double mh = m / (1 - std::pow(b1, double(t + 1)));
    const double vh = v / (1 - std::pow(b2, double(t + 1)));
    wo = wo - gamma * mh / (std::sqrt(vh) + eps);
    ASSERT_NEAR(w[0].weights[0], wo, 1e-15);
  }
}

TEST(Adam, SecondMomentStaysNonNegative) {
  RandomSource src(6);
  std::vector<LayerState> w{{draw(src, Distribution::gaussian(0, 1), {20}), {}}};
  auto st = make_adam_state({}, w);
  for (std::int64_t t = 0; t < 200; ++t) {
    const double scale_t = t % 17 == 0 ? 0.0 : (t % 5 == 0 ? 1e3 : 1e-3);
    const std::vector<LayerState> g{{draw(src, Distribution::gaussian(0, scale_t), {20}), {}}};
    adam_step(st, w, g, t);
    for (double v : st.v[0].weights.data()) ASSERT_GE(v, 0.0);
  }
}

TEST(Adam, ShapeMismatch) {
  auto w = vec_state({1, 2});
  auto st = make_adam_state({}, w);
  EXPECT_THROW(adam_step(st, w, vec_state({1}), 0), ContractError);
}

TEST(ModuleOptimizer, DispatchesOnConfig) {
  auto w = vec_state({1, 1});
  ModuleOptimizer sgd(SgdConfig{StepsizeSchedule::fixed(0.1)}, w);
  sgd.step(w, vec_state({1, 2}), 0, false);
  EXPECT_EQ(w[0].weights, Tensor::vector({0.9, 0.8}));
  ModuleOptimizer adam(AdamConfig{}, w);
  EXPECT_TRUE(std::holds_alternative<AdamState>(adam.state()));
}
