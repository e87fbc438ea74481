#include "ddg/network.hpp"

#include <cmath>

#include "ddg/error.hpp"

namespace ddg {

void NetworkSpec::validate() const {
  if (layers.empty()) throw ConfigError("network has no layers");
  std::size_t heads = 0;
  for (const auto& l : layers) heads += l.is_head() ? 1 : 0;
  if (heads != 1 || !layers.back().is_head()) {
    throw ConfigError("network needs exactly one head layer, in last position");
  }
  std::size_t dim = 0;  // 0 = not yet known
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.kind == LayerKind::affine || l.kind == LayerKind::softmax_cross_entropy) {
      if (l.in_dim == 0 || l.out_dim == 0) {
        throw ConfigError("layer " + std::to_string(i + 1) + " (" + l.name() + ") has a zero dimension");
      }
      if (dim != 0 && dim != l.in_dim) {
        throw ConfigError("layer " + std::to_string(i + 1) + " (" + l.name() + ") expects " +
                          std::to_string(l.in_dim) + " inputs but receives " + std::to_string(dim));
      }
      dim = l.out_dim;
    }
  }
  if (input_dim() == 0) throw ConfigError("network input dimension is undetermined (no affine layer)");
}

std::size_t NetworkSpec::input_dim() const {
  for (const auto& l : layers)
    if (l.kind == LayerKind::affine || l.kind == LayerKind::softmax_cross_entropy) return l.in_dim;
  return 0;
}

std::size_t NetworkSpec::output_dim() const {
  for (auto it = layers.rbegin(); it != layers.rend(); ++it)
    if (it->kind == LayerKind::affine || it->kind == LayerKind::softmax_cross_entropy) return it->out_dim;
  return 0;
}

std::size_t NetworkSpec::parameter_count() const {
  std::size_t d = 0;
  for (const auto& l : layers) d += l.parameter_count();
  return d;
}

std::size_t NetworkState::parameter_count() const {
  std::size_t d = 0;
  for (const auto& l : layers) d += l.parameter_count();
  return d;
}

NetworkState init_network(const NetworkSpec& spec, RandomSource& src, InitScheme scheme) {
  spec.validate();
  NetworkState state;
  state.layers.reserve(spec.size());
  for (const auto& l : spec.layers) {
    LayerState s;
    if (l.kind == LayerKind::affine) {
      const Shape w_shape{l.in_dim, l.out_dim};
      switch (scheme) {
        case InitScheme::zeros: s.weights = Tensor(w_shape); break;
        case InitScheme::xavier_uniform: {
          const double a = std::sqrt(6.0 / double(l.in_dim + l.out_dim));
          s.weights = draw(src, Distribution::uniform(-a, a), w_shape);
          break;
        }
        case InitScheme::he_gaussian:
          s.weights = draw(src, Distribution::gaussian(0.0, std::sqrt(2.0 / double(l.in_dim))), w_shape);
          break;
      }
      s.bias = Tensor({l.out_dim});
    }
    state.layers.push_back(std::move(s));
  }
  return state;
}

BackpropResult backprop(const NetworkSpec& spec, const NetworkState& state, const Tensor& features,
                        const Tensor& targets) {
  const std::size_t n = spec.size();
  if (state.layers.size() != n) throw ContractError("backprop: state does not match the network");
  std::vector<LayerTape> tapes(n);
  Tensor h = features;
  for (std::size_t l = 0; l < n; ++l) {
    auto out = forward(spec.layers[l], state.layers[l], h);
    tapes[l] = std::move(out.tape);
    h = std::move(out.output);
  }
  BackpropResult r;
  const auto loss = loss_and_prediction(spec.head(), tapes[n - 1].input, targets);
  r.loss = loss.loss;
  r.correct = loss.correct;
  r.gradients.resize(n);
  Tensor delta = head_loss_gradient(spec.head(), tapes[n - 1], targets);
  for (std::size_t l = n - 1; l-- > 0;) {
    r.gradients[l] = backward_weights(spec.layers[l], state.layers[l], tapes[l], delta);
    if (l > 0) delta = backward_input(spec.layers[l], state.layers[l], tapes[l], delta);
  }
  return r;
}

Tensor predict(const NetworkSpec& spec, const NetworkState& state, const Tensor& features) {
  Tensor h = features;
  for (std::size_t l = 0; l + 1 < spec.size(); ++l) h = forward(spec.layers[l], state.layers[l], h).output;
  return h;
}

LossResult evaluate(const NetworkSpec& spec, const NetworkState& state, const Tensor& features,
                    const Tensor& targets) {
  return loss_and_prediction(spec.head(), predict(spec, state, features), targets);
}

double gradient_sq_norm(const std::vector<LayerGradient>& grads) {
  double acc = 0;
  for (const auto& g : grads) {
    if (!g.weights.empty()) acc += sq_l2_norm(g.weights);
    if (!g.bias.empty()) acc += sq_l2_norm(g.bias);
  }
  return acc;
}

}  // namespace ddg
