#include "ddg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ddg {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

NetworkState initial_state(const RunConfig& config) {
  RandomSource src(mix_seed(config.seed, 1));
  return init_network(config.network(), src, config.init_scheme());
}

std::pair<double, double> evaluate_split(const NetworkSpec& spec, const NetworkState& state, const Dataset& test) {
  if (test.size() == 0) return {kNaN, kNaN};
  const LossResult r = evaluate(spec, state, test.features, test.targets);
  const double top1 =
      spec.head().kind == LayerKind::softmax_cross_entropy ? 100.0 * double(r.correct) / double(test.size()) : kNaN;
  return {r.loss, top1};
}

TrainResult train(const RunConfig& config, const DatasetSplits& data, MetricsWriter* sink) {
  config.validate();
  const NetworkSpec spec = config.network();
  const Partition partition = config.partition();
  const std::size_t K = partition.num_modules();

  TrainResult result;
  result.initial = initial_state(config);
  result.iterations = config.total_iterations(data.train.size());
  result.test_loss = kNaN;
  result.test_top1 = kNaN;

  auto executor =
      make_executor(config.execution_mode(), spec, result.initial, partition, config.optimizer.build());
  const BatchSampler sampler(mix_seed(config.seed, 2), config.batch_size, data.train.size(), config.sampling_mode());
  const std::int64_t T = result.iterations;
  const std::int64_t steps = std::int64_t(sampler.steps_per_epoch());

  double min_grad = kNaN;
  for (std::int64_t t = 0; t < T; ++t) {
    const Batch batch = next_batch(sampler, data.train, t);
    const IterationRecord rec = executor->run_iteration(batch, t);

    MetricsRow row;
    row.t = t;
    row.epoch = sampler.epoch_of(t);
    row.train_loss = rec.loss;
    row.grad_sq_norm = rec.grad_sq_norm;
    // Before t = K-1 some modules still apply warmup zeros.
    if (t >= std::int64_t(K) - 1) min_grad = std::isnan(min_grad) ? rec.grad_sq_norm : std::min(min_grad, rec.grad_sq_norm);
    row.min_grad_sq_so_far = min_grad;
    row.test_loss = kNaN;
    row.test_top1 = kNaN;
    if (config.log_timings) {
      row.wall_ms_forward = rec.forward_ms;
      row.wall_ms_backward = rec.backward_ms;
      row.modules = rec.modules;
    } else {
      row.modules.assign(K, ModuleTiming{});
    }

    const bool last = t + 1 == T;
    const bool due = config.eval_every > 0 ? (t + 1) % config.eval_every == 0 : (t + 1) % steps == 0;
    if ((due || last) && data.test.size() > 0) {
      const auto [loss, top1] = evaluate_split(spec, executor->gather_weights(), data.test);
      row.test_loss = loss;
      row.test_top1 = top1;
      result.test_loss = loss;
      result.test_top1 = top1;
    }
    if (sink) sink->write(row);
    result.rows.push_back(std::move(row));
  }
  result.final_state = executor->gather_weights();
  return result;
}

}  // namespace ddg
