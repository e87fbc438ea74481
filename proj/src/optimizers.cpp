#include "ddg/optimizers.hpp"

#include <cmath>

#include "ddg/error.hpp"

namespace ddg {

namespace {

void require_matching(std::span<LayerState> weights, std::span<const LayerGradient> grads) {
  if (weights.size() != grads.size()) throw ContractError("optimizer: gradient / weight layer count mismatch");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i].weights.shape() != grads[i].weights.shape() ||
        weights[i].bias.shape() != grads[i].bias.shape()) {
      throw ContractError("optimizer: gradient shape does not match weights of layer " + std::to_string(i));
    }
  }
}

template <typename F>
void for_each_tensor(LayerState& s, F f) {
  f(s.weights, 0);
  f(s.bias, 1);
}

const Tensor& part(const LayerState& s, int which) { return which == 0 ? s.weights : s.bias; }
Tensor& part(LayerState& s, int which) { return which == 0 ? s.weights : s.bias; }

}  // namespace

StepsizeSchedule::StepsizeSchedule(Kind kind, double base) : kind_(kind), base_(base) {
  if (!(base > 0) || !std::isfinite(base)) throw ConfigError("stepsize must be positive and finite");
}

double StepsizeSchedule::at(std::int64_t t) const {
  if (t < 0) throw DomainError("stepsize: negative iteration");
  return kind_ == Kind::fixed ? base_ : base_ / (1.0 + double(t));
}

double StepsizeSchedule::partial_sum(std::int64_t T) const {
  double acc = 0;
  for (std::int64_t t = 0; t < T; ++t) acc += at(t);
  return acc;
}

double StepsizeSchedule::partial_sum_sq(std::int64_t T) const {
  double acc = 0;
  for (std::int64_t t = 0; t < T; ++t) {
    const double g = at(t);
    acc += g * g;
  }
  return acc;
}

double stepsize(const StepsizeSchedule& schedule, std::int64_t t) { return schedule.at(t); }

SgdState make_sgd_state(const SgdConfig& config, std::span<const LayerState> weights) {
  if (!(config.momentum >= 0 && config.momentum < 1)) throw ConfigError("sgd: momentum must lie in [0, 1)");
  if (!(config.weight_decay >= 0)) throw ConfigError("sgd: weight_decay must be nonnegative");
  SgdState s{config, {}};
  if (config.momentum > 0)
    for (const auto& w : weights) s.velocity.push_back(zero_gradient_like(w));
  return s;
}

AdamState make_adam_state(const AdamConfig& config, std::span<const LayerState> weights) {
  if (!(config.gamma > 0)) throw ConfigError("adam: stepsize must be positive");
  if (!(config.beta1 >= 0 && config.beta1 < 1) || !(config.beta2 >= 0 && config.beta2 < 1)) {
    throw ConfigError("adam: decay rates must lie in [0, 1)");
  }
  if (!(config.epsilon > 0)) throw ConfigError("adam: epsilon must be positive");
  AdamState s{config, {}, {}};
  for (const auto& w : weights) {
    s.m.push_back(zero_gradient_like(w));
    s.v.push_back(zero_gradient_like(w));
  }
  return s;
}

void sgd_step(SgdState& state, std::span<LayerState> weights, std::span<const LayerGradient> grads,
              std::int64_t t, bool warmup) {
  require_matching(weights, grads);
  const Scalar gamma = Scalar(state.config.schedule.at(t));
  const Scalar mu = Scalar(state.config.momentum);
  const Scalar decay = warmup ? Scalar(0) : Scalar(state.config.weight_decay);
  const bool use_momentum = state.config.momentum > 0;
  if (use_momentum && state.velocity.size() != weights.size()) {
    throw ContractError("sgd: velocity buffers do not match the module");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for_each_tensor(weights[l], [&](Tensor& w, int which) {
      const Tensor& g = part(grads[l], which);
      auto wd = w.data();
      const auto gd = g.data();
      if (use_momentum) {
        auto vd = part(state.velocity[l], which).data();
        for (std::size_t i = 0; i < wd.size(); ++i) {
          const Scalar gi = decay > 0 ? gd[i] + decay * wd[i] : gd[i];
          vd[i] = mu * vd[i] + gi;
          wd[i] -= gamma * vd[i];
        }
      } else {
        for (std::size_t i = 0; i < wd.size(); ++i) {
          const Scalar gi = decay > 0 ? gd[i] + decay * wd[i] : gd[i];
          wd[i] -= gamma * gi;
        }
      }
    });
  }
}

AdamCorrection AdamCorrection::at(const AdamConfig& c, std::int64_t t) {
  if (t < 0) throw DomainError("adam: negative iteration");
  const double c1 = 1.0 - std::pow(c.beta1, double(t + 1));
  const double c2 = 1.0 - std::pow(c.beta2, double(t + 1));
  return {Scalar(c.beta1 / c1), Scalar((1.0 - c.beta1) / c1), Scalar(c.beta2 / c2), Scalar((1.0 - c.beta2) / c2)};
}

void adam_step(AdamState& state, std::span<LayerState> weights, std::span<const LayerGradient> grads,
               std::int64_t t) {
  require_matching(weights, grads);
  if (state.m.size() != weights.size()) throw ContractError("adam: moment buffers do not match the module");
  const auto& c = state.config;
  const AdamCorrection k = AdamCorrection::at(c, t);
  const Scalar b1 = Scalar(c.beta1), b2 = Scalar(c.beta2);
  const Scalar gamma = Scalar(c.gamma), eps = Scalar(c.epsilon);
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for_each_tensor(weights[l], [&](Tensor& w, int which) {
      auto wd = w.data();
      const auto gd = part(grads[l], which).data();
      auto md = part(state.m[l], which).data();
      auto vd = part(state.v[l], which).data();
      for (std::size_t i = 0; i < wd.size(); ++i) {
        const Scalar m_hat = k.m_hat(md[i], gd[i]);
        const Scalar v_hat = k.v_hat(vd[i], gd[i]);
        md[i] = b1 * md[i] + (Scalar(1) - b1) * gd[i];
        vd[i] = b2 * vd[i] + (Scalar(1) - b2) * gd[i] * gd[i];
        wd[i] -= gamma * m_hat / (std::sqrt(v_hat) + eps);
      }
    });
  }
}

ModuleOptimizer::ModuleOptimizer(const OptimizerConfig& config, std::span<const LayerState> weights)
    : state_(std::visit(
          [&](const auto& c) -> std::variant<SgdState, AdamState> {
            if constexpr (std::is_same_v<std::decay_t<decltype(c)>, SgdConfig>)
              return make_sgd_state(c, weights);
            else
              return make_adam_state(c, weights);
          },
          config)) {}

void ModuleOptimizer::step(std::span<LayerState> weights, std::span<const LayerGradient> grads, std::int64_t t,
                           bool warmup) {
  if (auto* sgd = std::get_if<SgdState>(&state_))
    sgd_step(*sgd, weights, grads, t, warmup);
  else
    adam_step(std::get<AdamState>(state_), weights, grads, t);
}

}  // namespace ddg
