#include <cmath>

#include <gtest/gtest.h>

#include "ddg/convergence.hpp"
#include "ddg/error.hpp"
#include "ddg/verify.hpp"

using namespace ddg;

namespace {

Tensor diag(std::initializer_list<double> d) {
  Tensor A({d.size(), d.size()});
  std::size_t i = 0;
  for (double v : d) {
    A.at(i, i) = v;
    ++i;
  }
  return A;
}

QuadraticObjective quadratic(Tensor A, double noise, std::uint64_t seed = 1) {
  const std::size_t d = A.rows();
  return QuadraticObjective(std::move(A), synth_quadratic_stream(d, noise, seed, 100).features);
}

}  // namespace

TEST(Objective, QuadraticGradientNorm) {
  const auto I = quadratic(diag({1, 1}), 0.0);
  EXPECT_EQ(full_gradient_norm_sq(I, {0, 0}), 0.0);
  EXPECT_EQ(full_gradient_norm_sq(I, {3, 4}), 25.0);
  EXPECT_EQ(I.value({3, 4}), 12.5);
}

TEST(Objective, QuadraticRequiresSpd) {
  EXPECT_THROW(quadratic(diag({1, -1}), 0.0), ConfigError);
  Tensor A = diag({1, 1});
  A.at(0, 1) = 0.5;
  EXPECT_THROW(quadratic(A, 0.0), ConfigError);
}

TEST(Objective, LipschitzByPowerIteration) {
  EXPECT_NEAR(quadratic(diag({1, 2, 3}), 0.0).lipschitz(), 3.0, 1e-9);
  const auto r = power_iteration(2, [](const Vector& x) { return Vector{2 * x[0] + x[1], x[0] + 2 * x[1]}; });
  EXPECT_NEAR(r.eigenvalue, 3.0, 1e-9);
  // With zero tolerance the Rayleigh quotient never repeats exactly.
  EXPECT_THROW(power_iteration(2, [](const Vector& x) { return Vector{x[0], 0.5 * x[1]}; }, 0.0, 5), NumericError);
}

TEST(Objective, LogisticGradientMatchesFiniteDifferences) {
  const auto data = synth_blobs({2, 4, 2.0}, 3, 200);
  for (double lambda : {0.0, 0.1}) {
    const LogisticObjective obj(data, lambda);
    Vector w = {0.3, -0.2, 0.5, 0.1, -0.4};
    const Vector g = obj.full_gradient(w);
    std::vector<double> fd(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) {
      Vector up = w, down = w;
      up[j] += 1e-5;
      down[j] -= 1e-5;
      fd[j] = (obj.value(up) - obj.value(down)) / 2e-5;
    }
    EXPECT_LT(fd_relative_error(g, fd), 1e-6);
    const auto [f, g2] = obj.value_and_gradient(w);
    EXPECT_EQ(f, obj.value(w));
    EXPECT_EQ(g2, g);
  }
}

TEST(Objective, LogisticConstants) {
  const auto data = synth_blobs({2, 3, 2.0}, 4, 300);
  const LogisticObjective obj(data, 0.05);
  EXPECT_LE(obj.lipschitz(), obj.radius_lipschitz() + 1e-12);
  EXPECT_GT(obj.lipschitz(), 0.05);
  EXPECT_EQ(obj.analytic_gradient_bound(), 0.0);
  const LogisticObjective plain(data, 0.0);
  EXPECT_EQ(plain.analytic_gradient_bound(), plain.feature_radius_sq());
  double max_sq = 0;
  std::vector<std::size_t> all(300);
  for (std::size_t i = 0; i < 300; ++i) all[i] = i;
  plain.sample_gradient(Vector(4, 1.0), all, &max_sq);
  EXPECT_LE(max_sq, plain.analytic_gradient_bound());
}

TEST(Bounds, DelayNoiseConstant) {
  EXPECT_EQ(delay_noise_constant(1, 7.0, 1.0), 14.0);
  EXPECT_EQ(delay_noise_constant(3, 1.0, 1.0), 84.0);
  for (std::size_t K = 1; K <= 8; ++K) {
    const double k = double(K);
    EXPECT_EQ(delay_noise_constant(K, 1.0, 1.0), k + k * k * k * k);
    EXPECT_EQ(delay_noise_constant(K, 1.0, k), k + k * k * k * k * k);
  }
}

TEST(Bounds, MeasuredSigma) {
  EXPECT_EQ(measured_sigma(StepsizeSchedule::fixed(0.1), 4, 100), 1.0);
  for (std::size_t K : {1, 2, 4}) {
    const double s = measured_sigma(StepsizeSchedule::diminishing(1.0), K, 1000);
    EXPECT_LE(s, double(K));
    EXPECT_DOUBLE_EQ(s, double(K));
  }
}

TEST(Bounds, Theorem1Quadratic) {
  const auto obj = quadratic(diag({0.5, 1, 2, 4}), 0.2, 7);
  DelayedSgdConfig c;
  c.schedule = StepsizeSchedule::fixed(1.0 / (2 * obj.lipschitz()));
  c.iterations = 10000;
  const Vector w0 = {1, -1, 2, 0.5};
  const auto tr = run_delayed_sgd(obj, w0, c);
  ASSERT_EQ(tr.values.size(), 10001u);
  const auto p = estimate_constants(obj, tr, 0.0);
  EXPECT_EQ(p.sigma, 1.0);
  EXPECT_EQ(p.M_K, 2 * p.M);
  const auto r = check_theorem1(tr, p);
  EXPECT_TRUE(r.satisfied) << r.measured << " vs " << r.bound_value;
  EXPECT_EQ(r.bound_value, theorem1_bound(p.f0, p.f_star, p.gamma, r.T, p.L, p.M_K));
  EXPECT_EQ(r.series.back().T, 10000);
}

TEST(Bounds, Theorem1SingleStepIsHuge) {
  const auto obj = quadratic(diag({1, 2}), 0.1);
  DelayedSgdConfig c;
  c.schedule = StepsizeSchedule::fixed(0.25);
  c.iterations = 1;
  const auto tr = run_delayed_sgd(obj, {3, 3}, c);
  const auto p = estimate_constants(obj, tr, 0.0);
  const auto r = check_theorem1(tr, p);
  EXPECT_GE(r.bound_value, 2 * (p.f0 - p.f_star) / 0.25);
  EXPECT_TRUE(r.satisfied);
}

TEST(Bounds, PreconditionsAreEnforced) {
  const auto obj = quadratic(diag({1, 2}), 0.1);
  DelayedSgdConfig c;
  c.schedule = StepsizeSchedule::fixed(0.6);
  c.iterations = 10;
  const auto tr = run_delayed_sgd(obj, {1, 1}, c);
  EXPECT_THROW(check_theorem1(tr, estimate_constants(obj, tr, 0.0)), ConfigError);
  EXPECT_THROW(check_theorem2(tr, estimate_constants(obj, tr, 0.0)), ConfigError);
  c.schedule = StepsizeSchedule::diminishing(0.6);
  const auto tr2 = run_delayed_sgd(obj, {1, 1}, c);
  EXPECT_THROW(check_theorem2(tr2, estimate_constants(obj, tr2, 0.0)), ConfigError);
}

TEST(Bounds, Theorem2QuadraticAndDecay) {
  const auto obj = quadratic(diag({1, 2, 3}), 0.2, 9);
  DelayedSgdConfig c;
  c.schedule = StepsizeSchedule::diminishing(1.0 / obj.lipschitz());
  c.iterations = 10000;
  const auto tr = run_delayed_sgd(obj, {1, 2, 3}, c);
  const auto p = estimate_constants(obj, tr, 0.0);
  const auto r = check_theorem2(tr, p);
  EXPECT_TRUE(r.satisfied);
  EXPECT_EQ(r.bound_value, theorem2_bound(p.f0, p.f_star, c.schedule.partial_sum(10000),
                                          c.schedule.partial_sum_sq(10000), p.L, p.M_K));
  for (std::int64_t T : {100, 1000}) {
    const double b1 = theorem2_bound(p.f0, p.f_star, c.schedule.partial_sum(T), c.schedule.partial_sum_sq(T), p.L, p.M_K);
    const double b10 = theorem2_bound(p.f0, p.f_star, c.schedule.partial_sum(10 * T),
                                      c.schedule.partial_sum_sq(10 * T), p.L, p.M_K);
    EXPECT_LT(b10, b1);
  }
  for (std::size_t i = 1; i < r.series.size(); ++i) EXPECT_LT(r.series[i].bound, r.series[i - 1].bound);
}

TEST(Delayed, FullBatchQuadraticDescends) {
  const auto obj = quadratic(diag({0.5, 1, 3}), 0.0);
  DelayedSgdConfig c;
  c.schedule = StepsizeSchedule::fixed(1.0 / obj.lipschitz());
  c.iterations = 200;
  const auto tr = run_delayed_sgd(obj, {2, -1, 1}, c);
  for (std::size_t t = 0; t + 1 < tr.values.size(); ++t) ASSERT_LE(tr.values[t + 1], tr.values[t]);
}

TEST(Delayed, BlocksUseStaleGradients) {
  // K=2 on f = 0.5 ||w||^2 without noise: block 2 is fresh, block 1 lags one step.
  const auto obj = quadratic(diag({1, 1}), 0.0);
  DelayedSgdConfig c;
  c.modules = 2;
  c.schedule = StepsizeSchedule::fixed(0.5);
  c.iterations = 5;
  const auto tr = run_delayed_sgd(obj, {1, 1}, c);
  std::vector<double> a = {1}, b = {1};
  double w1 = 1, w2 = 1;
  for (int t = 0; t < 5; ++t) {
    const double s1 = t >= 1 ? a[std::size_t(t - 1)] : 0.0;
    w1 -= 0.5 * s1;
    w2 -= 0.5 * w2;
    a.push_back(w1);
    b.push_back(w2);
  }
  EXPECT_EQ(tr.final_w, (Vector{w1, w2}));
  EXPECT_THROW(coordinate_blocks(2, 3), ConfigError);
}

TEST(Delayed, MinSoFar) {
  const auto m = min_so_far({3, 1, 2, 0.5}, 1);
  EXPECT_TRUE(std::isnan(m[0]));
  EXPECT_EQ(m[1], 1);
  EXPECT_EQ(m[2], 1);
  EXPECT_EQ(m[3], 0.5);
}

TEST(Delayed, SeedsAreReproducible) {
  ConvergenceSettings s;
  s.n = 200;
  s.dim = 5;
  s.iterations = 300;
  s.reference_iterations = 200;
  s.seeds = 2;
  const std::vector<std::size_t> K = {1, 2};
  const auto a = run_theorem(1, s, K, 4);
  const auto b = run_theorem(1, s, K, 4);
  ASSERT_EQ(a.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t r = 0; r < 2; ++r) EXPECT_EQ(a[i].runs[r].report.measured, b[i].runs[r].report.measured);
  s.gamma = 10.0;
  EXPECT_THROW(run_theorem(1, s, K, 4), ConfigError);
}
