#include "ddg/convergence.hpp"

#include <algorithm>
#include <deque>
#include <limits>

#include "ddg/partition.hpp"

namespace ddg {

namespace {

double dot(const Vector& a, const Vector& b) {
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

// ---- quadratic -------------------------------------------------------------

QuadraticObjective::QuadraticObjective(Tensor A, Tensor noise) : A_(std::move(A)), noise_(std::move(noise)) {
  if (A_.rank() != 2 || A_.rows() != A_.cols()) throw ConfigError("quadratic: A must be square");
  dim_ = A_.rows();
  if (noise_.rank() != 2 || noise_.cols() != dim_) throw ConfigError("quadratic: noise rows must match dim(A)");
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (A_.at(i, j) != A_.at(j, i)) throw ConfigError("quadratic: A must be symmetric");
  // Cholesky as the positive-definiteness test.
  std::vector<double> l(dim_ * dim_, 0.0);
  for (std::size_t j = 0; j < dim_; ++j) {
    double d = A_.at(j, j);
    for (std::size_t p = 0; p < j; ++p) d -= l[j * dim_ + p] * l[j * dim_ + p];
    if (!(d > 0)) throw ConfigError("quadratic: A must be positive definite");
    l[j * dim_ + j] = std::sqrt(d);
    for (std::size_t i = j + 1; i < dim_; ++i) {
      double s = A_.at(i, j);
      for (std::size_t p = 0; p < j; ++p) s -= l[i * dim_ + p] * l[j * dim_ + p];
      l[i * dim_ + j] = s / l[j * dim_ + j];
    }
  }
  lipschitz_ = power_iteration(dim_, [this](const Vector& x) { return apply(x); }).eigenvalue;
}

Vector QuadraticObjective::apply(const Vector& w) const {
  Vector y(dim_, 0.0);
  for (std::size_t i = 0; i < dim_; ++i) {
    double acc = 0;
    for (std::size_t j = 0; j < dim_; ++j) acc += A_.at(i, j) * w[j];
    y[i] = acc;
  }
  return y;
}

double QuadraticObjective::value(const Vector& w) const { return 0.5 * dot(w, apply(w)); }

Vector QuadraticObjective::full_gradient(const Vector& w) const { return apply(w); }

Vector QuadraticObjective::sample_gradient(const Vector& w, const std::vector<std::size_t>& indices,
                                           double* max_sample_sq_norm) const {
  const Vector aw = apply(w);
  Vector g(dim_, 0.0);
  const double inv = 1.0 / double(indices.size());
  for (std::size_t i : indices) {
    double sq = 0;
    for (std::size_t j = 0; j < dim_; ++j) {
      const double gi = aw[j] + noise_.at(i, j);
      g[j] += inv * gi;
      sq += gi * gi;
    }
    if (max_sample_sq_norm) *max_sample_sq_norm = std::max(*max_sample_sq_norm, sq);
  }
  return g;
}

// ---- logistic --------------------------------------------------------------

LogisticObjective::LogisticObjective(const Dataset& data, double lambda) : lambda_(lambda) {
  if (data.num_classes != 2) throw ConfigError("logistic: needs a two-class dataset");
  if (!(lambda >= 0)) throw ConfigError("logistic: lambda must be nonnegative");
  const std::size_t n = data.size(), d = data.feature_dim();
  dim_ = d + 1;
  x_.resize(n * dim_);
  labels_.resize(n);
  radius_sq_ = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      x_[i * dim_ + j] = data.features.at(i, j);
      sq += x_[i * dim_ + j] * x_[i * dim_ + j];
    }
    x_[i * dim_ + d] = 1.0;
    labels_[i] = data.targets[i] > 0.5 ? 1.0 : -1.0;
    radius_sq_ = std::max(radius_sq_, sq);
  }
  radius_lipschitz_ = radius_sq_ / 4.0 + lambda_;
  const auto gram = [this, n](const Vector& v) {
    Vector y(dim_, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* xi = &x_[i * dim_];
      double z = 0;
      for (std::size_t j = 0; j < dim_; ++j) z += xi[j] * v[j];
      for (std::size_t j = 0; j < dim_; ++j) y[j] += xi[j] * z;
    }
    for (double& v2 : y) v2 /= double(n);
    return y;
  };
  lipschitz_ = power_iteration(dim_, gram).eigenvalue / 4.0 + lambda_;
}

double LogisticObjective::value(const Vector& w) const {
  const std::size_t n = labels_.size();
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = &x_[i * dim_];
    double z = 0;
    for (std::size_t j = 0; j < dim_; ++j) z += xi[j] * w[j];
    acc += softplus(-labels_[i] * z);
  }
  return acc / double(n) + 0.5 * lambda_ * dot(w, w);
}

void LogisticObjective::accumulate_sample(const Vector& w, std::size_t i, Vector& out, double weight,
                                          double* max_sq) const {
  const double* xi = &x_[i * dim_];
  double z = 0;
  for (std::size_t j = 0; j < dim_; ++j) z += xi[j] * w[j];
  const double c = -labels_[i] * sigmoid(-labels_[i] * z);
  double sq = 0;
  for (std::size_t j = 0; j < dim_; ++j) {
    const double gj = c * xi[j] + lambda_ * w[j];
    out[j] += weight * gj;
    sq += gj * gj;
  }
  if (max_sq) *max_sq = std::max(*max_sq, sq);
}

Vector LogisticObjective::full_gradient(const Vector& w) const { return value_and_gradient(w).second; }

std::pair<double, Vector> LogisticObjective::value_and_gradient(const Vector& w) const {
  const std::size_t n = labels_.size();
  Vector g(dim_, 0.0);
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = &x_[i * dim_];
    double z = 0;
    for (std::size_t j = 0; j < dim_; ++j) z += xi[j] * w[j];
    const double m = -labels_[i] * z;
    acc += softplus(m);
    const double c = -labels_[i] * sigmoid(m);
    for (std::size_t j = 0; j < dim_; ++j) g[j] += c * xi[j];
  }
  const double inv = 1.0 / double(n);
  for (std::size_t j = 0; j < dim_; ++j) g[j] = g[j] * inv + lambda_ * w[j];
  return {acc * inv + 0.5 * lambda_ * dot(w, w), std::move(g)};
}

Vector LogisticObjective::sample_gradient(const Vector& w, const std::vector<std::size_t>& indices,
                                          double* max_sample_sq_norm) const {
  Vector g(dim_, 0.0);
  const double inv = 1.0 / double(indices.size());
  for (std::size_t i : indices) accumulate_sample(w, i, g, inv, max_sample_sq_norm);
  return g;
}

double full_gradient_norm_sq(const AnalyticObjective& objective, const Vector& w) {
  const Vector g = objective.full_gradient(w);
  return dot(g, g);
}

// ---- delayed SGD -----------------------------------------------------------

std::vector<std::pair<std::size_t, std::size_t>> coordinate_blocks(std::size_t dim, std::size_t modules) {
  if (modules < 1 || modules > dim) {
    throw ConfigError("cannot cut " + std::to_string(dim) + " coordinates into " + std::to_string(modules) +
                      " blocks");
  }
  std::vector<std::size_t> splits;
  for (std::size_t k = 1; k < modules; ++k) splits.push_back(k * dim / modules);
  const Partition p = make_partition(dim, splits);
  std::vector<std::pair<std::size_t, std::size_t>> blocks;
  for (const auto& r : p.ranges()) blocks.emplace_back(r.first - 1, r.last);
  return blocks;
}

Trajectory run_delayed_sgd(const AnalyticObjective& objective, const Vector& w0, const DelayedSgdConfig& config) {
  if (w0.size() != objective.dim()) throw ConfigError("delayed sgd: w0 has the wrong dimension");
  if (config.iterations < 0) throw ConfigError("delayed sgd: negative iteration count");
  const std::size_t K = config.modules;
  const auto blocks = coordinate_blocks(objective.dim(), K);
  const BatchSampler sampler(config.seed, config.batch_size, objective.num_samples(), config.sampling);

  Trajectory tr;
  tr.modules = K;
  tr.schedule = config.schedule;
  tr.grad_sq.reserve(std::size_t(config.iterations));
  tr.values.reserve(std::size_t(config.iterations) + 1);
  Vector w = w0;
  // Stochastic gradients at (w^s, i(s)) for the last K iterations s.
  std::deque<Vector> pending;
  for (std::int64_t t = 0; t < config.iterations; ++t) {
    const auto [f, grad] = objective.value_and_gradient(w);
    tr.grad_sq.push_back(dot(grad, grad));
    tr.values.push_back(f);
    pending.push_back(objective.sample_gradient(w, sampler.indices(t), &tr.max_sample_grad_sq));
    const double gamma = config.schedule.at(t);
    const std::int64_t oldest = t - std::int64_t(pending.size()) + 1;
    for (std::size_t k = 1; k <= K; ++k) {
      const std::int64_t s = source_iteration(t, k, K);
      if (s < 0) continue;
      const Vector& g = pending[std::size_t(s - oldest)];
      for (std::size_t j = blocks[k - 1].first; j < blocks[k - 1].second; ++j) w[j] -= gamma * g[j];
    }
    if (pending.size() == K) pending.pop_front();
    if (!std::isfinite(tr.grad_sq.back())) throw DivergenceError("delayed sgd diverged", t);
  }
  tr.values.push_back(objective.value(w));
  tr.final_w = std::move(w);
  return tr;
}

double reference_minimum(const AnalyticObjective& objective, const Vector& w0, std::int64_t iterations) {
  Vector w = w0;
  const double step = 1.0 / objective.lipschitz();
  double best = objective.value(w);
  for (std::int64_t t = 0; t < iterations; ++t) {
    const auto [f, g] = objective.value_and_gradient(w);
    best = std::min(best, f);
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= step * g[j];
  }
  return std::min(best, objective.value(w));
}

// ---- bounds ----------------------------------------------------------------

double delay_noise_constant(std::size_t K, double M, double sigma) {
  const double k = double(K);
  return k * M + sigma * k * k * k * k * M;
}

double measured_sigma(const StepsizeSchedule& schedule, std::size_t K, std::int64_t T) {
  double s = 0;
  for (std::int64_t t = 0; t < T; ++t) {
    const std::int64_t lagged = std::max<std::int64_t>(0, t - std::int64_t(K) + 1);
    s = std::max(s, schedule.at(lagged) / schedule.at(t));
  }
  return T > 0 ? s : 1.0;
}

BoundParams estimate_constants(const AnalyticObjective& objective, const Trajectory& trajectory, double f_star) {
  if (trajectory.grad_sq.empty()) throw ConfigError("estimate_constants: empty trajectory");
  BoundParams p;
  p.L = objective.lipschitz();
  p.M = trajectory.max_sample_grad_sq;
  p.M_analytic = objective.analytic_gradient_bound();
  p.K = trajectory.modules;
  p.schedule = trajectory.schedule.kind();
  p.gamma = trajectory.schedule.base();
  p.sigma = p.schedule == StepsizeSchedule::Kind::fixed ? 1.0 : double(p.K);
  p.sigma_measured = measured_sigma(trajectory.schedule, p.K, trajectory.length());
  p.M_K = delay_noise_constant(p.K, p.M, p.sigma);
  p.f0 = trajectory.values.front();
  p.f_star = f_star;
  return p;
}

double theorem1_bound(double f0, double f_star, double gamma, std::int64_t T, double L, double M_K) {
  return 2.0 * (f0 - f_star) / (gamma * double(T)) + 2.0 * gamma * L * M_K;
}

double theorem2_bound(double f0, double f_star, double gamma_sum, double gamma_sq_sum, double L, double M_K) {
  return 2.0 * (f0 - f_star) / gamma_sum + 2.0 * gamma_sq_sum * L * M_K / gamma_sum;
}

namespace {

std::vector<std::int64_t> checkpoints(std::int64_t T) {
  std::vector<std::int64_t> out;
  for (std::int64_t c = 10; c < T; c *= 10) out.push_back(c);
  out.push_back(T);
  return out;
}

}  // namespace

BoundReport check_theorem1(const Trajectory& run, const BoundParams& params) {
  if (params.schedule != StepsizeSchedule::Kind::fixed) throw ConfigError("theorem1 needs a fixed stepsize");
  if (params.gamma * params.L > 1.0) {
    throw ConfigError("fixed-stepsize bound requires gamma * L <= 1, got " + std::to_string(params.gamma * params.L));
  }
  const std::int64_t T = run.length();
  if (T < 1) throw ConfigError("theorem1: empty trajectory");
  BoundReport r;
  r.theorem = "theorem1";
  r.T = T;
  r.params = params;
  std::size_t next = 0;
  const auto cps = checkpoints(T);
  double acc = 0;
  for (std::int64_t t = 0; t < T; ++t) {
    acc += run.grad_sq[std::size_t(t)];
    if (t + 1 == cps[next]) {
      r.series.push_back({t + 1, acc / double(t + 1),
                          theorem1_bound(params.f0, params.f_star, params.gamma, t + 1, params.L, params.M_K)});
      ++next;
    }
  }
  r.measured = acc / double(T);
  r.bound_value = theorem1_bound(params.f0, params.f_star, params.gamma, T, params.L, params.M_K);
  r.satisfied = r.measured <= r.bound_value;
  return r;
}

BoundReport check_theorem2(const Trajectory& run, const BoundParams& params) {
  if (params.schedule != StepsizeSchedule::Kind::diminishing) {
    throw ConfigError("theorem2 needs a diminishing stepsize");
  }
  if (params.gamma * params.L > 1.0) {
    throw ConfigError("diminishing-stepsize bound requires gamma0 * L <= 1, got " +
                      std::to_string(params.gamma * params.L));
  }
  const std::int64_t T = run.length();
  if (T < 1) throw ConfigError("theorem2: empty trajectory");
  BoundReport r;
  r.theorem = "theorem2";
  r.T = T;
  r.params = params;
  const auto cps = checkpoints(T);
  std::size_t next = 0;
  double weighted = 0, gsum = 0, gsq = 0;
  for (std::int64_t t = 0; t < T; ++t) {
    const double g = run.schedule.at(t);
    weighted += g * run.grad_sq[std::size_t(t)];
    gsum += g;
    gsq += g * g;
    if (t + 1 == cps[next]) {
      r.series.push_back({t + 1, weighted / gsum, theorem2_bound(params.f0, params.f_star, gsum, gsq, params.L, params.M_K)});
      ++next;
    }
  }
  r.measured = weighted / gsum;
  r.bound_value = theorem2_bound(params.f0, params.f_star, run.schedule.partial_sum(T), run.schedule.partial_sum_sq(T),
                                 params.L, params.M_K);
  r.satisfied = r.measured <= r.bound_value;
  return r;
}

std::vector<double> min_so_far(const std::vector<double>& values, std::size_t first) {
  std::vector<double> out(values.size(), std::numeric_limits<double>::quiet_NaN());
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = first; i < values.size(); ++i) {
    m = std::min(m, values[i]);
    out[i] = m;
  }
  return out;
}

}  // namespace ddg
