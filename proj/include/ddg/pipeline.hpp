#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <vector>

#include "ddg/data.hpp"
#include "ddg/network.hpp"
#include "ddg/optimizers.hpp"
#include "ddg/partition.hpp"

namespace ddg {

/// Forward-time snapshot of one module for one iteration: the layer tapes,
/// a copy of the module's weights as used by that forward, and (last module
/// only) the batch targets.
struct TapeEntry {
  std::int64_t iteration = 0;
  std::vector<LayerTape> tapes;
  std::vector<LayerState> weight_snapshot;
  Tensor targets;
};

/// Error gradient at a module boundary, tagged with the iteration whose
/// forward pass it belongs to.
struct DeltaMessage {
  std::int64_t iteration = 0;
  Tensor delta;
};

/// Activation travelling downstream.
struct ActivationMessage {
  std::int64_t iteration = 0;
  Tensor activation;
};

struct ForwardStep {
  Tensor activation;  // module output (k < K)
  double loss = 0.0;  // k == K only
  std::size_t correct = 0;
};

struct BackwardStep {
  bool warmup = true;
  std::int64_t source = -1;
  std::vector<LayerGradient> gradients;
  std::optional<DeltaMessage> upstream;
};

/// One module G(k) of the pipeline. Owns its layer states, optimizer state,
/// pending tapes and the stale error gradient it will consume next.
class ModuleWorker {
 public:
  ModuleWorker(std::size_t k, std::size_t K, std::vector<LayerSpec> specs, std::vector<LayerState> weights,
               const OptimizerConfig& optimizer);

  std::size_t index() const noexcept { return k_; }
  std::size_t delay() const noexcept { return K_ - k_; }
  bool is_last() const noexcept { return k_ == K_; }

  /// Forward with the current weights w^t; records a TapeEntry for t.
  /// The last module also evaluates the loss against `targets`.
  ForwardStep forward(std::int64_t t, const Tensor& input, const Tensor* targets);

  /// Hands over the error gradient for this module's output; consumed by
  /// the backward of iteration message.iteration + K - k.
  void deliver_delta(DeltaMessage message);

  /// Backward for source iteration t - K + k using that iteration's tape and
  /// weight snapshot. Warmup iterations yield zero gradients.
  BackwardStep backward(std::int64_t t);

  void apply_update(const BackwardStep& step, std::int64_t t);

  const std::vector<LayerState>& weights() const noexcept { return weights_; }
  const std::vector<LayerSpec>& specs() const noexcept { return specs_; }
  std::size_t live_tapes() const noexcept { return ring_.size(); }
  const ModuleOptimizer& optimizer() const noexcept { return optimizer_; }

 private:
  std::size_t k_;
  std::size_t K_;
  std::vector<LayerSpec> specs_;
  std::vector<LayerState> weights_;
  ModuleOptimizer optimizer_;
  std::deque<TapeEntry> ring_;
  std::optional<DeltaMessage> pending_delta_;
};

struct ModuleTiming {
  double forward_ms = 0.0;
  double backward_ms = 0.0;  // includes the optimizer step
};

struct IterationRecord {
  std::int64_t t = 0;
  std::vector<std::size_t> indices;
  double loss = 0.0;
  std::size_t correct = 0;
  std::size_t batch_size = 0;
  /// Squared norm of the assembled delayed gradient [g_1, ..., g_K].
  double grad_sq_norm = 0.0;
  std::vector<ModuleTiming> modules;
  double forward_ms = 0.0;
  double backward_ms = 0.0;
  double wall_ms = 0.0;
  /// Per-module applied gradients, present when requested.
  std::optional<std::vector<std::vector<LayerGradient>>> applied;
};

enum class ExecutionMode { emulated, parallel };

struct ExecutorOptions {
  bool record_gradients = false;
};

/// Runs the delayed-gradient schedule: forward through modules 1..K with the
/// current weights; module k back-propagates iteration t-K+k from its stored
/// tape; every module then applies one optimizer step.
class PipelineExecutor {
 public:
  virtual ~PipelineExecutor() = default;

  virtual IterationRecord run_iteration(const Batch& batch, std::int64_t t) = 0;
  /// Current weights of all modules, concatenated in layer order. Only
  /// valid between iterations.
  virtual NetworkState gather_weights() const = 0;
  virtual std::size_t live_tape_count() const = 0;
  virtual ExecutionMode mode() const noexcept = 0;

  const Partition& partition() const noexcept { return partition_; }
  const NetworkSpec& spec() const noexcept { return spec_; }

 protected:
  PipelineExecutor(NetworkSpec spec, Partition partition) : spec_(std::move(spec)), partition_(std::move(partition)) {}

  NetworkSpec spec_;
  Partition partition_;
};

std::vector<ModuleWorker> make_workers(const NetworkSpec& spec, const NetworkState& state,
                                       const Partition& partition, const OptimizerConfig& optimizer);

/// Single-threaded reference semantics.
class EmulatedExecutor final : public PipelineExecutor {
 public:
  EmulatedExecutor(const NetworkSpec& spec, const NetworkState& state, const Partition& partition,
                   const OptimizerConfig& optimizer, ExecutorOptions options = {});

  IterationRecord run_iteration(const Batch& batch, std::int64_t t) override;
  NetworkState gather_weights() const override;
  std::size_t live_tape_count() const override;
  ExecutionMode mode() const noexcept override { return ExecutionMode::emulated; }
  const std::vector<ModuleWorker>& workers() const noexcept { return workers_; }

 private:
  std::vector<ModuleWorker> workers_;
  ExecutorOptions options_;
};

/// K long-lived worker threads, one per module, connected by 2(K-1)
/// single-slot handoff buffers. Produces the same weight trajectory as
/// EmulatedExecutor.
class ParallelExecutor final : public PipelineExecutor {
 public:
  ParallelExecutor(const NetworkSpec& spec, const NetworkState& state, const Partition& partition,
                   const OptimizerConfig& optimizer, ExecutorOptions options = {});
  ~ParallelExecutor() override;

  ParallelExecutor(const ParallelExecutor&) = delete;
  ParallelExecutor& operator=(const ParallelExecutor&) = delete;

  IterationRecord run_iteration(const Batch& batch, std::int64_t t) override;
  NetworkState gather_weights() const override;
  std::size_t live_tape_count() const override;
  ExecutionMode mode() const noexcept override { return ExecutionMode::parallel; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::unique_ptr<PipelineExecutor> make_executor(ExecutionMode mode, const NetworkSpec& spec,
                                                const NetworkState& state, const Partition& partition,
                                                const OptimizerConfig& optimizer, ExecutorOptions options = {});

}  // namespace ddg
