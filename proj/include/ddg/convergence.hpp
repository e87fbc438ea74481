#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "ddg/data.hpp"
#include "ddg/error.hpp"
#include "ddg/optimizers.hpp"

namespace ddg {

using Vector = std::vector<double>;

/// Objective f(w) = (1/N) sum_i f_i(w) with analytic per-sample gradients.
class AnalyticObjective {
 public:
  virtual ~AnalyticObjective() = default;
  virtual std::size_t dim() const = 0;
  virtual std::size_t num_samples() const = 0;
  virtual double value(const Vector& w) const = 0;
  virtual Vector full_gradient(const Vector& w) const = 0;
  /// f(w) and ∇f(w) together; objectives may share the pass over the data.
  virtual std::pair<double, Vector> value_and_gradient(const Vector& w) const { return {value(w), full_gradient(w)}; }
  /// Mean of per-sample gradients over `indices`; also reports the largest
  /// per-sample squared norm seen.
  virtual Vector sample_gradient(const Vector& w, const std::vector<std::size_t>& indices,
                                 double* max_sample_sq_norm = nullptr) const = 0;
  /// Global Lipschitz constant of the full gradient.
  virtual double lipschitz() const = 0;
  /// Global bound on per-sample ||∇f_i(w)||², or 0 when none is known.
  virtual double analytic_gradient_bound() const { return 0.0; }
  /// Optimal value is known to be 0 (at w = 0).
  virtual bool has_known_minimum() const { return false; }
};

/// f(w) = 0.5 wᵀAw with stochastic gradient Aw + xi_i; xi_i are the
/// zero-mean rows of a noise stream. f* = 0 at w* = 0.
class QuadraticObjective final : public AnalyticObjective {
 public:
  /// A is [d x d] symmetric positive definite; noise is [N x d].
  QuadraticObjective(Tensor A, Tensor noise);

  std::size_t dim() const override { return dim_; }
  std::size_t num_samples() const override { return noise_.rows(); }
  double value(const Vector& w) const override;
  Vector full_gradient(const Vector& w) const override;
  Vector sample_gradient(const Vector& w, const std::vector<std::size_t>& indices,
                         double* max_sample_sq_norm) const override;
  double lipschitz() const override { return lipschitz_; }
  bool has_known_minimum() const override { return true; }

 private:
  Vector apply(const Vector& w) const;
  std::size_t dim_;
  Tensor A_;
  Tensor noise_;
  double lipschitz_;
};

/// Binary logistic regression, f_i(w) = log(1 + exp(-y_i wᵀx_i)) + lambda/2 ||w||²,
/// labels in {-1, +1}. A constant 1 feature is appended for the bias.
class LogisticObjective final : public AnalyticObjective {
 public:
  /// `data` is a two-class dataset (class 0 -> y = -1, class 1 -> y = +1).
  LogisticObjective(const Dataset& data, double lambda);

  std::size_t dim() const override { return dim_; }
  std::size_t num_samples() const override { return labels_.size(); }
  double value(const Vector& w) const override;
  Vector full_gradient(const Vector& w) const override;
  std::pair<double, Vector> value_and_gradient(const Vector& w) const override;
  Vector sample_gradient(const Vector& w, const std::vector<std::size_t>& indices,
                         double* max_sample_sq_norm) const override;
  /// lambda_max(XᵀX / N) / 4 + lambda.
  double lipschitz() const override { return lipschitz_; }
  /// max_i ||x_i||² / 4 + lambda, the cruder feature-radius bound.
  double radius_lipschitz() const { return radius_lipschitz_; }
  double lambda() const noexcept { return lambda_; }
  double feature_radius_sq() const noexcept { return radius_sq_; }
  /// max_i ||x_i||² when lambda = 0.
  double analytic_gradient_bound() const override { return lambda_ == 0 ? radius_sq_ : 0.0; }

 private:
  void accumulate_sample(const Vector& w, std::size_t i, Vector& out, double weight, double* max_sq) const;
  std::size_t dim_;
  std::vector<double> x_;  // N x dim, row-major, bias column last
  std::vector<double> labels_;
  double lambda_;
  double lipschitz_;
  double radius_lipschitz_;
  double radius_sq_;
};

double full_gradient_norm_sq(const AnalyticObjective& objective, const Vector& w);

struct PowerIterationResult {
  double eigenvalue = 0.0;
  std::size_t iterations = 0;
};

/// Largest eigenvalue of a symmetric PSD operator given as y = op(x).
/// Stops when successive estimates agree to `tolerance` (relative); throws
/// NumericError after max_iterations.
template <typename Op>
PowerIterationResult power_iteration(std::size_t dim, Op op, double tolerance = 1e-10,
                                     std::size_t max_iterations = 100000);

/// Delayed-gradient SGD directly on an analytic objective: w is cut into K
/// contiguous coordinate blocks and block k at iteration t is updated with
/// [∇f_{i(t-K+k)}(w^{t-K+k})]_{G(k)}, zero while t-K+k < 0.
struct DelayedSgdConfig {
  std::size_t modules = 1;
  StepsizeSchedule schedule = StepsizeSchedule::fixed(0.01);
  std::int64_t iterations = 1000;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  SamplingMode sampling = SamplingMode::replacement;
};

struct Trajectory {
  std::size_t modules = 1;
  StepsizeSchedule schedule = StepsizeSchedule::fixed(0.01);
  std::vector<double> grad_sq;  // ||∇f(w^t)||², t = 0..T-1
  std::vector<double> values;   // f(w^t), t = 0..T (one more than grad_sq)
  double max_sample_grad_sq = 0.0;
  Vector final_w;

  std::int64_t length() const noexcept { return std::int64_t(grad_sq.size()); }
};

Trajectory run_delayed_sgd(const AnalyticObjective& objective, const Vector& w0, const DelayedSgdConfig& config);

/// Coordinate blocks used by run_delayed_sgd: K nearly equal contiguous
/// ranges, as 0-based [begin, end).
std::vector<std::pair<std::size_t, std::size_t>> coordinate_blocks(std::size_t dim, std::size_t modules);

/// Best objective value found by full-batch gradient descent with step 1/L.
double reference_minimum(const AnalyticObjective& objective, const Vector& w0, std::int64_t iterations);

struct BoundParams {
  double L = 0.0;
  double M = 0.0;           // empirical max per-sample ||∇f_i||² on the trajectory
  double M_analytic = 0.0;  // global analytic bound when known, else 0
  std::size_t K = 1;
  double sigma = 1.0;           // the value the theorem prescribes (1 or K)
  double sigma_measured = 1.0;  // max_t gamma_{max(0,t-K+1)} / gamma_t on the run
  double M_K = 0.0;
  double f0 = 0.0;
  double f_star = 0.0;
  StepsizeSchedule::Kind schedule = StepsizeSchedule::Kind::fixed;
  double gamma = 0.0;  // gamma or gamma0
};

double delay_noise_constant(std::size_t K, double M, double sigma);  // K M + sigma K^4 M
double measured_sigma(const StepsizeSchedule& schedule, std::size_t K, std::int64_t T);

/// L from the objective (power iteration), M as the trajectory maximum,
/// sigma and M_K as prescribed for the schedule kind.
BoundParams estimate_constants(const AnalyticObjective& objective, const Trajectory& trajectory, double f_star);

double theorem1_bound(double f0, double f_star, double gamma, std::int64_t T, double L, double M_K);
double theorem2_bound(double f0, double f_star, double gamma_sum, double gamma_sq_sum, double L, double M_K);

struct BoundPoint {
  std::int64_t T = 0;
  double measured = 0.0;
  double bound = 0.0;
};

struct BoundReport {
  const char* theorem = "";
  double measured = 0.0;
  double bound_value = 0.0;
  bool satisfied = false;
  std::int64_t T = 0;
  std::vector<BoundPoint> series;
  BoundParams params;
};

/// Requires gamma * L <= 1 (ConfigError otherwise).
BoundReport check_theorem1(const Trajectory& run, const BoundParams& params);
/// Requires gamma0 * L <= 1 (ConfigError otherwise).
BoundReport check_theorem2(const Trajectory& run, const BoundParams& params);

/// min over t' in [first, t] of grad_sq[t'], per t.
std::vector<double> min_so_far(const std::vector<double>& values, std::size_t first = 0);

template <typename Op>
PowerIterationResult power_iteration(std::size_t dim, Op op, double tolerance, std::size_t max_iterations) {
  Vector x(dim);
  // Deterministic, generic start vector.
  for (std::size_t i = 0; i < dim; ++i) x[i] = 1.0 + 0.01 * double(i % 7);
  double prev = 0.0;
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    double norm = 0;
    for (double v : x) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0) return {0.0, it};
    for (double& v : x) v /= norm;
    Vector y = op(x);
    double rayleigh = 0;
    for (std::size_t i = 0; i < dim; ++i) rayleigh += x[i] * y[i];
    if (it > 1 && std::abs(rayleigh - prev) <= tolerance * std::max(1.0, std::abs(rayleigh))) {
      return {rayleigh, it};
    }
    prev = rayleigh;
    x = std::move(y);
  }
  throw NumericError("power iteration did not converge in " + std::to_string(max_iterations) + " iterations");
}

}  // namespace ddg
