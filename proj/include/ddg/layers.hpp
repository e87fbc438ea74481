#pragma once

#include <cstddef>
#include <string>

#include "ddg/tensor.hpp"

namespace ddg {

enum class LayerKind { affine, relu, tanh, softmax_cross_entropy, mse };

/// Architecture of one layer. Affine layers carry (in_dim, out_dim); the
/// softmax cross-entropy head carries its class count in both fields; the
/// other kinds are dimension-preserving and leave both at zero.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;

  static LayerSpec affine(std::size_t in, std::size_t out) { return {LayerKind::affine, in, out}; }
  static LayerSpec relu() { return {LayerKind::relu, 0, 0}; }
  static LayerSpec tanh() { return {LayerKind::tanh, 0, 0}; }
  static LayerSpec softmax_cross_entropy(std::size_t classes) {
    return {LayerKind::softmax_cross_entropy, classes, classes};
  }
  static LayerSpec mse() { return {LayerKind::mse, 0, 0}; }

  bool is_head() const noexcept {
    return kind == LayerKind::softmax_cross_entropy || kind == LayerKind::mse;
  }
  bool has_parameters() const noexcept { return kind == LayerKind::affine; }
  std::size_t parameter_count() const noexcept { return has_parameters() ? in_dim * out_dim + out_dim : 0; }
  std::string name() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Parameters of one layer: weights [in x out] and bias [out] for Affine,
/// both empty otherwise.
struct LayerState {
  Tensor weights;
  Tensor bias;

  std::size_t parameter_count() const noexcept { return weights.size() + bias.size(); }
  friend bool operator==(const LayerState&, const LayerState&) = default;
};

/// Gradient with respect to a LayerState; same shapes.
using LayerGradient = LayerState;

/// What backward needs from the matching forward call.
struct LayerTape {
  Tensor input;  // h_{l-1}
  Tensor aux;    // softmax probabilities for the cross-entropy head
};

struct ForwardOutput {
  Tensor output;
  LayerTape tape;
};

struct LossResult {
  double loss = 0.0;
  std::size_t correct = 0;
};

/// Output of the layer on a [batch x in] input. For the cross-entropy head
/// the output is the softmax probabilities, for the MSE head the prediction
/// itself.
ForwardOutput forward(const LayerSpec& spec, const LayerState& state, const Tensor& input);

/// d(loss)/d(input) given d(loss)/d(output). For heads this is the
/// Jacobian-vector product of the head's forward map.
Tensor backward_input(const LayerSpec& spec, const LayerState& state, const LayerTape& tape,
                      const Tensor& delta_out);

/// d(loss)/d(parameters); empty tensors for parameter-free layers.
LayerGradient backward_weights(const LayerSpec& spec, const LayerState& state, const LayerTape& tape,
                               const Tensor& delta_out);

/// Gradient of the batch-mean head loss with respect to the head's input
/// (logits or predictions). Uses the probabilities cached in the tape.
Tensor head_loss_gradient(const LayerSpec& head, const LayerTape& tape, const Tensor& targets);

/// Batch-mean loss and Top-1 correct count (zero for regression heads).
/// Cross-entropy targets are class indices [batch]; MSE targets match the
/// prediction shape. MSE loss is 0.5 * ||pred - y||^2 averaged over the
/// batch.
LossResult loss_and_prediction(const LayerSpec& head, const Tensor& logits, const Tensor& targets);

LayerState zero_gradient_like(const LayerState& state);

}  // namespace ddg
