#include "ddg/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <exception>
#include <mutex>
#include <thread>

#include "ddg/error.hpp"
#include "ddg/handoff.hpp"

namespace ddg {

namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

[[noreturn]] void rethrow_in_context(std::size_t k, std::int64_t t) {
  const std::string where = "module " + std::to_string(k) + ": ";
  try {
    throw;
  } catch (const DivergenceError& e) {
    throw DivergenceError(where + e.what(), t);
  } catch (const NumericError& e) {
    throw DivergenceError(where + e.what(), t);
  } catch (const ScheduleError& e) {
    throw ScheduleError(where + "iteration " + std::to_string(t) + ": " + e.what());
  }
}

void check_record(const IterationRecord& r) {
  if (!std::isfinite(r.loss)) throw DivergenceError("non-finite loss", r.t);
  if (!std::isfinite(r.grad_sq_norm)) throw DivergenceError("non-finite gradient norm", r.t);
}

}  // namespace

// ---- ModuleWorker ----------------------------------------------------------

ModuleWorker::ModuleWorker(std::size_t k, std::size_t K, std::vector<LayerSpec> specs,
                           std::vector<LayerState> weights, const OptimizerConfig& optimizer)
    : k_(k), K_(K), specs_(std::move(specs)), weights_(std::move(weights)), optimizer_(optimizer, weights_) {
  if (k_ < 1 || k_ > K_) throw ContractError("module index out of range");
  if (specs_.empty() || specs_.size() != weights_.size()) throw ContractError("module needs matching layers");
  if (is_last() != specs_.back().is_head()) throw ContractError("the loss head must end the last module");
}

ForwardStep ModuleWorker::forward(std::int64_t t, const Tensor& input, const Tensor* targets) {
  if (!ring_.empty() && ring_.back().iteration >= t) {
    throw ScheduleError("forward for iteration " + std::to_string(t) + " after iteration " +
                        std::to_string(ring_.back().iteration));
  }
  if (is_last() && targets == nullptr) throw ContractError("last module needs targets");
  TapeEntry entry;
  entry.iteration = t;
  entry.weight_snapshot = weights_;
  entry.tapes.reserve(specs_.size());
  Tensor h = input;
  for (std::size_t l = 0; l < specs_.size(); ++l) {
    auto out = ddg::forward(specs_[l], weights_[l], h);
    entry.tapes.push_back(std::move(out.tape));
    h = std::move(out.output);
  }
  ForwardStep step;
  if (is_last()) {
    const auto r = loss_and_prediction(specs_.back(), entry.tapes.back().input, *targets);
    step.loss = r.loss;
    step.correct = r.correct;
    entry.targets = *targets;
  } else {
    step.activation = std::move(h);
  }
  ring_.push_back(std::move(entry));
  return step;
}

void ModuleWorker::deliver_delta(DeltaMessage message) {
  if (is_last()) throw ScheduleError("last module does not receive error gradients");
  if (pending_delta_) {
    throw ScheduleError("error gradient for iteration " + std::to_string(message.iteration) +
                        " arrived before iteration " + std::to_string(pending_delta_->iteration) +
                        " was consumed");
  }
  pending_delta_ = std::move(message);
}

BackwardStep ModuleWorker::backward(std::int64_t t) {
  BackwardStep step;
  step.source = source_iteration(t, k_, K_);
  step.warmup = step.source < 0;
  step.gradients.reserve(weights_.size());
  if (step.warmup) {
    for (const auto& w : weights_) step.gradients.push_back(zero_gradient_like(w));
    return step;
  }
  if (ring_.empty() || ring_.front().iteration != step.source) {
    throw ScheduleError("missing tape entry for source iteration " + std::to_string(step.source));
  }
  if (!is_last() && (!pending_delta_ || pending_delta_->iteration != step.source)) {
    throw ScheduleError("missing error gradient for source iteration " + std::to_string(step.source));
  }
  TapeEntry entry = std::move(ring_.front());
  ring_.pop_front();

  Tensor delta;
  std::size_t top = specs_.size();
  if (is_last()) {
    delta = head_loss_gradient(specs_.back(), entry.tapes.back(), entry.targets);
    top -= 1;
  } else {
    delta = std::move(pending_delta_->delta);
    pending_delta_.reset();
  }
  step.gradients.resize(weights_.size());
  for (std::size_t l = top; l-- > 0;) {
    const auto& w = entry.weight_snapshot[l];
    step.gradients[l] = backward_weights(specs_[l], w, entry.tapes[l], delta);
    if (l > 0 || k_ > 1) delta = backward_input(specs_[l], w, entry.tapes[l], delta);
  }
  for (std::size_t l = top; l < specs_.size(); ++l) step.gradients[l] = zero_gradient_like(weights_[l]);
  if (k_ > 1) step.upstream = DeltaMessage{step.source, std::move(delta)};
  return step;
}

void ModuleWorker::apply_update(const BackwardStep& step, std::int64_t t) {
  optimizer_.step(weights_, step.gradients, t, step.warmup);
}

std::vector<ModuleWorker> make_workers(const NetworkSpec& spec, const NetworkState& state,
                                       const Partition& partition, const OptimizerConfig& optimizer) {
  spec.validate();
  if (partition.layer_count() != spec.size() || state.layers.size() != spec.size()) {
    throw ConfigError("partition / state does not match the network's layer count");
  }
  std::vector<ModuleWorker> workers;
  const std::size_t K = partition.num_modules();
  workers.reserve(K);
  for (std::size_t k = 1; k <= K; ++k) {
    const auto& r = partition.range(k);
    std::vector<LayerSpec> specs(spec.layers.begin() + (r.first - 1), spec.layers.begin() + r.last);
    std::vector<LayerState> weights(state.layers.begin() + (r.first - 1), state.layers.begin() + r.last);
    workers.emplace_back(k, K, std::move(specs), std::move(weights), optimizer);
  }
  return workers;
}

// ---- EmulatedExecutor ------------------------------------------------------

EmulatedExecutor::EmulatedExecutor(const NetworkSpec& spec, const NetworkState& state, const Partition& partition,
                                   const OptimizerConfig& optimizer, ExecutorOptions options)
    : PipelineExecutor(spec, partition), workers_(make_workers(spec, state, partition, optimizer)),
      options_(options) {}

IterationRecord EmulatedExecutor::run_iteration(const Batch& batch, std::int64_t t) {
  if (batch.size() == 0) throw ContractError("empty batch");
  const std::size_t K = workers_.size();
  IterationRecord rec;
  rec.t = t;
  rec.indices = batch.indices;
  rec.batch_size = batch.size();
  rec.modules.resize(K);
  const auto start = Clock::now();

  Tensor h = batch.features;
  for (std::size_t i = 0; i < K; ++i) {
    const auto t0 = Clock::now();
    try {
      auto fs = workers_[i].forward(t, h, workers_[i].is_last() ? &batch.targets : nullptr);
      if (workers_[i].is_last()) {
        rec.loss = fs.loss;
        rec.correct = fs.correct;
      } else {
        h = std::move(fs.activation);
      }
    } catch (...) {
      rethrow_in_context(i + 1, t);
    }
    rec.modules[i].forward_ms = ms_between(t0, Clock::now());
    rec.forward_ms += rec.modules[i].forward_ms;
  }

  std::vector<BackwardStep> steps(K);
  for (std::size_t i = 0; i < K; ++i) {
    const auto t0 = Clock::now();
    try {
      steps[i] = workers_[i].backward(t);
    } catch (...) {
      rethrow_in_context(i + 1, t);
    }
    rec.modules[i].backward_ms = ms_between(t0, Clock::now());
  }
  // Error gradients produced now are consumed at t + 1.
  for (std::size_t i = 1; i < K; ++i)
    if (steps[i].upstream) workers_[i - 1].deliver_delta(std::move(*steps[i].upstream));

  for (std::size_t i = 0; i < K; ++i) {
    const auto t0 = Clock::now();
    workers_[i].apply_update(steps[i], t);
    rec.modules[i].backward_ms += ms_between(t0, Clock::now());
    rec.backward_ms += rec.modules[i].backward_ms;
    rec.grad_sq_norm += gradient_sq_norm(steps[i].gradients);
  }
  rec.wall_ms = ms_between(start, Clock::now());
  if (options_.record_gradients) {
    rec.applied.emplace();
    for (auto& s : steps) rec.applied->push_back(std::move(s.gradients));
  }
  check_record(rec);
  return rec;
}

NetworkState EmulatedExecutor::gather_weights() const {
  NetworkState s;
  for (const auto& w : workers_) s.layers.insert(s.layers.end(), w.weights().begin(), w.weights().end());
  return s;
}

std::size_t EmulatedExecutor::live_tape_count() const {
  std::size_t n = 0;
  for (const auto& w : workers_) n += w.live_tapes();
  return n;
}

// ---- ParallelExecutor ------------------------------------------------------

struct ParallelExecutor::Impl {
  struct Result {
    ForwardStep forward;
    BackwardStep backward;
    ModuleTiming timing;
    Clock::time_point forward_end;
    std::exception_ptr error;
  };

  std::vector<ModuleWorker> workers;
  std::vector<std::unique_ptr<HandoffSlot<ActivationMessage>>> activations;  // k -> k+1
  std::vector<std::unique_ptr<HandoffSlot<DeltaMessage>>> gradients;         // k+1 -> k
  std::vector<Result> results;
  std::vector<std::thread> threads;
  ExecutorOptions options;

  std::mutex mutex;
  std::condition_variable cv;
  std::uint64_t generation = 0;
  std::size_t done = 0;
  bool stop = false;
  bool failed = false;
  const Batch* batch = nullptr;
  std::int64_t t = 0;
  Clock::time_point start;

  void close_slots() {
    for (auto& s : activations) s->close();
    for (auto& s : gradients) s->close();
  }

  void run_module(std::size_t i) {
    const std::size_t K = workers.size();
    ModuleWorker& worker = workers[i];
    std::uint64_t seen = 0;
    for (;;) {
      const Batch* b;
      std::int64_t it;
      {
        std::unique_lock lock(mutex);
        cv.wait(lock, [&] { return stop || generation != seen; });
        if (stop) return;
        seen = generation;
        b = batch;
        it = t;
      }
      Result& r = results[i];
      r = Result{};
      try {
        try {
          Tensor input;
          if (i == 0) {
            input = b->features;
          } else {
            auto msg = activations[i - 1]->take();
            if (msg.iteration != it) throw ScheduleError("activation for the wrong iteration");
            input = std::move(msg.activation);
          }
          const auto f0 = Clock::now();
          r.forward = worker.forward(it, input, worker.is_last() ? &b->targets : nullptr);
          if (!worker.is_last()) activations[i]->put({it, std::move(r.forward.activation)});
          r.forward_end = Clock::now();
          r.timing.forward_ms = ms_between(f0, r.forward_end);

          if (!worker.is_last() && !is_warmup(it, i + 1, K)) worker.deliver_delta(gradients[i]->take());
          const auto b0 = Clock::now();
          r.backward = worker.backward(it);
          if (r.backward.upstream) {
            gradients[i - 1]->put(std::move(*r.backward.upstream));
            r.backward.upstream.reset();
          }
          worker.apply_update(r.backward, it);
          r.timing.backward_ms = ms_between(b0, Clock::now());
        } catch (const ChannelClosed&) {
          throw;
        } catch (...) {
          rethrow_in_context(i + 1, it);
        }
      } catch (...) {
        r.error = std::current_exception();
        close_slots();
      }
      {
        std::lock_guard lock(mutex);
        ++done;
      }
      cv.notify_all();
    }
  }
};

ParallelExecutor::ParallelExecutor(const NetworkSpec& spec, const NetworkState& state, const Partition& partition,
                                   const OptimizerConfig& optimizer, ExecutorOptions options)
    : PipelineExecutor(spec, partition), impl_(std::make_unique<Impl>()) {
  impl_->workers = make_workers(spec, state, partition, optimizer);
  impl_->options = options;
  const std::size_t K = impl_->workers.size();
  for (std::size_t i = 0; i + 1 < K; ++i) {
    impl_->activations.push_back(std::make_unique<HandoffSlot<ActivationMessage>>());
    impl_->gradients.push_back(std::make_unique<HandoffSlot<DeltaMessage>>());
  }
  impl_->results.resize(K);
  impl_->threads.reserve(K);
  for (std::size_t i = 0; i < K; ++i) impl_->threads.emplace_back([this, i] { impl_->run_module(i); });
}

ParallelExecutor::~ParallelExecutor() {
  {
    std::lock_guard lock(impl_->mutex);
    impl_->stop = true;
  }
  impl_->cv.notify_all();
  impl_->close_slots();
  for (auto& th : impl_->threads) th.join();
}

IterationRecord ParallelExecutor::run_iteration(const Batch& batch, std::int64_t t) {
  if (batch.size() == 0) throw ContractError("empty batch");
  Impl& im = *impl_;
  const std::size_t K = im.workers.size();
  {
    std::unique_lock lock(im.mutex);
    if (im.failed) throw ContractError("parallel executor is unusable after a worker failure");
    im.batch = &batch;
    im.t = t;
    im.done = 0;
    im.start = Clock::now();
    ++im.generation;
  }
  im.cv.notify_all();
  {
    // Iteration barrier: every module has stepped its optimizer.
    std::unique_lock lock(im.mutex);
    im.cv.wait(lock, [&] { return im.done == K; });
  }
  const auto end = Clock::now();

  std::exception_ptr first, closed;
  for (const auto& r : im.results) {
    if (!r.error) continue;
    try {
      std::rethrow_exception(r.error);
    } catch (const ChannelClosed&) {
      if (!closed) closed = r.error;
    } catch (...) {
      if (!first) first = r.error;
    }
  }
  if (first || closed) {
    im.failed = true;
    std::rethrow_exception(first ? first : closed);
  }

  IterationRecord rec;
  rec.t = t;
  rec.indices = batch.indices;
  rec.batch_size = batch.size();
  rec.modules.resize(K);
  for (std::size_t i = 0; i < K; ++i) {
    auto& r = im.results[i];
    rec.modules[i] = r.timing;
    rec.grad_sq_norm += gradient_sq_norm(r.backward.gradients);
  }
  rec.loss = im.results[K - 1].forward.loss;
  rec.correct = im.results[K - 1].forward.correct;
  rec.wall_ms = ms_between(im.start, end);
  rec.forward_ms = ms_between(im.start, im.results[K - 1].forward_end);
  rec.backward_ms = rec.wall_ms - rec.forward_ms;
  if (im.options.record_gradients) {
    rec.applied.emplace();
    for (auto& r : im.results) rec.applied->push_back(std::move(r.backward.gradients));
  }
  check_record(rec);
  return rec;
}

NetworkState ParallelExecutor::gather_weights() const {
  std::lock_guard lock(impl_->mutex);
  NetworkState s;
  for (const auto& w : impl_->workers) s.layers.insert(s.layers.end(), w.weights().begin(), w.weights().end());
  return s;
}

std::size_t ParallelExecutor::live_tape_count() const {
  std::lock_guard lock(impl_->mutex);
  std::size_t n = 0;
  for (const auto& w : impl_->workers) n += w.live_tapes();
  return n;
}

std::unique_ptr<PipelineExecutor> make_executor(ExecutionMode mode, const NetworkSpec& spec,
                                                const NetworkState& state, const Partition& partition,
                                                const OptimizerConfig& optimizer, ExecutorOptions options) {
  if (mode == ExecutionMode::parallel)
    return std::make_unique<ParallelExecutor>(spec, state, partition, optimizer, options);
  return std::make_unique<EmulatedExecutor>(spec, state, partition, optimizer, options);
}

}  // namespace ddg
