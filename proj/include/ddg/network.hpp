#pragma once

#include <cstddef>
#include <vector>

#include "ddg/layers.hpp"
#include "ddg/random.hpp"

namespace ddg {

struct NetworkSpec {
  std::vector<LayerSpec> layers;

  /// Throws ConfigError unless dims are positive and chain, and exactly one
  /// head sits in the last position.
  void validate() const;
  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;
  const LayerSpec& head() const { return layers.back(); }
  std::size_t size() const noexcept { return layers.size(); }
};

struct NetworkState {
  std::vector<LayerState> layers;

  std::size_t parameter_count() const;
  friend bool operator==(const NetworkState&, const NetworkState&) = default;
};

enum class InitScheme { xavier_uniform, he_gaussian, zeros };

/// Deterministic in (spec, seed, scheme). Biases start at zero; weights are
/// drawn layer by layer in order, row-major.
NetworkState init_network(const NetworkSpec& spec, RandomSource& src, InitScheme scheme);

struct BackpropResult {
  double loss = 0.0;
  std::size_t correct = 0;
  std::vector<LayerGradient> gradients;  // one per layer
};

/// Plain backpropagation through the whole network: forward with `state`,
/// loss at the head, chain rule back to layer 1.
BackpropResult backprop(const NetworkSpec& spec, const NetworkState& state, const Tensor& features,
                        const Tensor& targets);

/// Head input (logits / predictions) for `features`.
Tensor predict(const NetworkSpec& spec, const NetworkState& state, const Tensor& features);

LossResult evaluate(const NetworkSpec& spec, const NetworkState& state, const Tensor& features,
                    const Tensor& targets);

double gradient_sq_norm(const std::vector<LayerGradient>& grads);

}  // namespace ddg
