#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "ddg/layers.hpp"

namespace ddg {

class StepsizeSchedule {
 public:
  enum class Kind { fixed, diminishing };

  static StepsizeSchedule fixed(double gamma) { return {Kind::fixed, gamma}; }
  /// gamma_t = gamma0 / (1 + t)
  static StepsizeSchedule diminishing(double gamma0) { return {Kind::diminishing, gamma0}; }

  Kind kind() const noexcept { return kind_; }
  /// gamma for fixed, gamma0 for diminishing.
  double base() const noexcept { return base_; }
  double at(std::int64_t t) const;
  /// Sum of gamma_t over t < T (Gamma_T).
  double partial_sum(std::int64_t T) const;
  /// Sum of gamma_t^2 over t < T.
  double partial_sum_sq(std::int64_t T) const;

 private:
  StepsizeSchedule(Kind kind, double base);
  Kind kind_;
  double base_;
};

double stepsize(const StepsizeSchedule& schedule, std::int64_t t);

struct SgdConfig {
  StepsizeSchedule schedule = StepsizeSchedule::fixed(0.01);
  double momentum = 0.0;      // 0 reproduces the plain delayed-gradient update
  double weight_decay = 0.0;  // adds weight_decay * w to non-warmup gradients
};

struct AdamConfig {
  double gamma = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

using OptimizerConfig = std::variant<SgdConfig, AdamConfig>;

struct SgdState {
  SgdConfig config;
  std::vector<LayerState> velocity;  // populated iff momentum > 0
};

struct AdamState {
  AdamConfig config;
  std::vector<LayerState> m;
  std::vector<LayerState> v;
};

SgdState make_sgd_state(const SgdConfig& config, std::span<const LayerState> weights);
AdamState make_adam_state(const AdamConfig& config, std::span<const LayerState> weights);

/// w <- w - gamma_t * g, or with momentum mu: v <- mu*v + g, w <- w - gamma_t*v.
/// `warmup` suppresses weight decay so a zero gradient leaves w unchanged.
void sgd_step(SgdState& state, std::span<LayerState> weights, std::span<const LayerGradient> grads,
              std::int64_t t, bool warmup = false);

/// Coefficients for the bias-corrected moments at iteration t, written as
///   m_hat = keep1 * m_prev + take1 * g,  v_hat = keep2 * v_prev + take2 * g².
/// take = (1 - beta) / (1 - beta^(t+1)) is exactly 1 at t = 0, so the first
/// m_hat is g bit for bit.
struct AdamCorrection {
  Scalar keep1, take1, keep2, take2;
  static AdamCorrection at(const AdamConfig& config, std::int64_t t);
  Scalar m_hat(Scalar m_prev, Scalar g) const { return keep1 * m_prev + take1 * g; }
  Scalar v_hat(Scalar v_prev, Scalar g) const { return keep2 * v_prev + take2 * (g * g); }
};

/// Adam with bias correction by the global iteration t (1 - beta^(t+1)).
/// Moments absorb zero gradients during warmup like any other step.
void adam_step(AdamState& state, std::span<LayerState> weights, std::span<const LayerGradient> grads,
               std::int64_t t);

/// Per-module optimizer owned by one pipeline worker.
class ModuleOptimizer {
 public:
  ModuleOptimizer(const OptimizerConfig& config, std::span<const LayerState> weights);

  void step(std::span<LayerState> weights, std::span<const LayerGradient> grads, std::int64_t t, bool warmup);
  const std::variant<SgdState, AdamState>& state() const noexcept { return state_; }

 private:
  std::variant<SgdState, AdamState> state_;
};

}  // namespace ddg
