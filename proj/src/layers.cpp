#include "ddg/layers.hpp"

#include <cmath>

#include "ddg/error.hpp"

namespace ddg {

namespace {

void require_batch_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(what) + ": expected [batch x features], got " + shape_to_string(t.shape()));
  }
}

void require_input_dim(const LayerSpec& spec, const Tensor& input) {
  require_batch_matrix(input, spec.name().c_str());
  if ((spec.kind == LayerKind::affine || spec.kind == LayerKind::softmax_cross_entropy) &&
      input.cols() != spec.in_dim) {
    throw ShapeError(spec.name() + ": input has " + std::to_string(input.cols()) + " features, expected " +
                     std::to_string(spec.in_dim));
  }
}

void require_affine_state(const LayerSpec& spec, const LayerState& state) {
  if (state.weights.shape() != Shape{spec.in_dim, spec.out_dim} || state.bias.shape() != Shape{spec.out_dim}) {
    throw ContractError(spec.name() + ": parameter shapes " + shape_to_string(state.weights.shape()) + "/" +
                        shape_to_string(state.bias.shape()) + " do not match the layer");
  }
}

void require_delta(const LayerSpec& spec, const LayerTape& tape, const Tensor& delta_out) {
  if (tape.input.empty()) throw ContractError(spec.name() + ": backward called without a forward tape");
  const Shape expected =
      spec.kind == LayerKind::affine ? Shape{tape.input.rows(), spec.out_dim} : tape.input.shape();
  if (delta_out.shape() != expected) {
    throw ContractError(spec.name() + ": delta shape " + shape_to_string(delta_out.shape()) +
                        " does not match forward output " + shape_to_string(expected));
  }
}

Tensor softmax_rows(const Tensor& logits) {
  const std::size_t b = logits.rows(), c = logits.cols();
  Tensor p({b, c});
  for (std::size_t i = 0; i < b; ++i) {
    Scalar m = logits.at(i, 0);
    for (std::size_t j = 1; j < c; ++j) m = std::max(m, logits.at(i, j));
    Scalar s = 0;
    for (std::size_t j = 0; j < c; ++j) {
      p.at(i, j) = std::exp(logits.at(i, j) - m);
      s += p.at(i, j);
    }
    for (std::size_t j = 0; j < c; ++j) p.at(i, j) /= s;
  }
  return p;
}

std::size_t class_index(const LayerSpec& head, Scalar target) {
  const auto classes = head.in_dim;
  if (!(target >= 0) || target != std::floor(target) || std::size_t(target) >= classes) {
    throw DomainError("target " + std::to_string(target) + " outside class range [0, " +
                      std::to_string(classes) + ")");
  }
  return std::size_t(target);
}

void require_targets(const LayerSpec& head, const Tensor& predictions, const Tensor& targets) {
  if (head.kind == LayerKind::softmax_cross_entropy) {
    if (targets.size() != predictions.rows()) {
      throw ShapeError("cross-entropy: " + std::to_string(targets.size()) + " targets for batch of " +
                       std::to_string(predictions.rows()));
    }
  } else if (targets.size() != predictions.size()) {
    throw ShapeError("mse: target shape " + shape_to_string(targets.shape()) + " vs prediction " +
                     shape_to_string(predictions.shape()));
  }
}

}  // namespace

std::string LayerSpec::name() const {
  switch (kind) {
    case LayerKind::affine: return "affine(" + std::to_string(in_dim) + "," + std::to_string(out_dim) + ")";
    case LayerKind::relu: return "relu";
    case LayerKind::tanh: return "tanh";
    case LayerKind::softmax_cross_entropy: return "softmax_ce(" + std::to_string(in_dim) + ")";
    case LayerKind::mse: return "mse";
  }
  return "unknown";
}

ForwardOutput forward(const LayerSpec& spec, const LayerState& state, const Tensor& input) {
  require_input_dim(spec, input);
  require_finite(input, spec.name().c_str());
  ForwardOutput out;
  out.tape.input = input;
  switch (spec.kind) {
    case LayerKind::affine: {
      require_affine_state(spec, state);
      out.output = matmul(input, state.weights);
      const std::size_t b = input.rows();
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < spec.out_dim; ++j) out.output.at(i, j) += state.bias[j];
      break;
    }
    case LayerKind::relu: out.output = relu(input); break;
    case LayerKind::tanh:
      out.output = tanh(input);
      out.tape.aux = out.output;
      break;
    case LayerKind::softmax_cross_entropy:
      out.output = softmax_rows(input);
      out.tape.aux = out.output;
      break;
    case LayerKind::mse: out.output = input; break;
  }
  return out;
}

Tensor backward_input(const LayerSpec& spec, const LayerState& state, const LayerTape& tape,
                      const Tensor& delta_out) {
  require_delta(spec, tape, delta_out);
  switch (spec.kind) {
    case LayerKind::affine:
      require_affine_state(spec, state);
      return matmul_nt(delta_out, state.weights);
    case LayerKind::relu: {
      Tensor d = delta_out;
      for (std::size_t i = 0; i < d.size(); ++i)
        if (!(tape.input[i] > 0)) d[i] = 0;
      return d;
    }
    case LayerKind::tanh: {
      Tensor d = delta_out;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= Scalar(1) - tape.aux[i] * tape.aux[i];
      return d;
    }
    case LayerKind::softmax_cross_entropy: {
      const Tensor& p = tape.aux;
      const std::size_t b = p.rows(), c = p.cols();
      Tensor d({b, c});
      for (std::size_t i = 0; i < b; ++i) {
        Scalar dot = 0;
        for (std::size_t j = 0; j < c; ++j) dot += delta_out.at(i, j) * p.at(i, j);
        for (std::size_t j = 0; j < c; ++j) d.at(i, j) = p.at(i, j) * (delta_out.at(i, j) - dot);
      }
      return d;
    }
    case LayerKind::mse: return delta_out;
  }
  throw ContractError("backward_input: unknown layer kind");
}

LayerGradient backward_weights(const LayerSpec& spec, const LayerState& state, const LayerTape& tape,
                               const Tensor& delta_out) {
  require_delta(spec, tape, delta_out);
  if (spec.kind != LayerKind::affine) return {};
  require_affine_state(spec, state);
  LayerGradient g;
  g.weights = matmul_tn(tape.input, delta_out);
  g.bias = Tensor({spec.out_dim});
  const std::size_t b = delta_out.rows();
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < spec.out_dim; ++j) g.bias[j] += delta_out.at(i, j);
  return g;
}

Tensor head_loss_gradient(const LayerSpec& head, const LayerTape& tape, const Tensor& targets) {
  if (!head.is_head()) throw ContractError(head.name() + " is not a loss head");
  if (tape.input.empty()) throw ContractError(head.name() + ": loss gradient requested without a forward tape");
  require_targets(head, tape.input, targets);
  const std::size_t b = tape.input.rows();
  const Scalar inv_b = Scalar(1) / Scalar(b);
  if (head.kind == LayerKind::softmax_cross_entropy) {
    Tensor d = tape.aux;
    for (std::size_t i = 0; i < b; ++i) {
      d.at(i, class_index(head, targets[i])) -= Scalar(1);
      for (std::size_t j = 0; j < d.cols(); ++j) d.at(i, j) *= inv_b;
    }
    return d;
  }
  Tensor d = tape.input;
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = (d[i] - targets[i]) * inv_b;
  return d;
}

LossResult loss_and_prediction(const LayerSpec& head, const Tensor& logits, const Tensor& targets) {
  if (!head.is_head()) throw ContractError(head.name() + " is not a loss head");
  require_batch_matrix(logits, "loss");
  require_targets(head, logits, targets);
  const std::size_t b = logits.rows(), c = logits.cols();
  LossResult r;
  double total = 0;
  if (head.kind == LayerKind::softmax_cross_entropy) {
    if (c != head.in_dim) throw ShapeError("loss: logits width does not match class count");
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t y = class_index(head, targets[i]);
      std::size_t arg = 0;
      double m = logits.at(i, 0);
      for (std::size_t j = 1; j < c; ++j)
        if (logits.at(i, j) > m) {
          m = logits.at(i, j);
          arg = j;
        }
      double s = 0;
      for (std::size_t j = 0; j < c; ++j) s += std::exp(double(logits.at(i, j)) - m);
      total += std::log(s) + m - double(logits.at(i, y));
      if (arg == y) ++r.correct;
    }
  } else {
    for (std::size_t i = 0; i < b; ++i) {
      double row = 0;
      for (std::size_t j = 0; j < c; ++j) {
        const double e = double(logits.at(i, j)) - double(targets[i * c + j]);
        row += e * e;
      }
      total += 0.5 * row;
    }
  }
  r.loss = total / double(b);
  return r;
}

LayerState zero_gradient_like(const LayerState& state) {
  LayerState z;
  if (!state.weights.empty()) z.weights = Tensor::zeros_like(state.weights);
  if (!state.bias.empty()) z.bias = Tensor::zeros_like(state.bias);
  return z;
}

}  // namespace ddg
