#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ddg/config.hpp"
#include "ddg/convergence.hpp"
#include "ddg/pipeline.hpp"

namespace ddg {

// ---- finite differences ----------------------------------------------------

/// ||a - n|| / max(||a||, ||n||), 0 when both vanish.
double fd_relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric);

struct GradCheckEntry {
  std::string name;
  double rel_error = 0.0;
  bool passed = false;
};

struct GradCheckReport {
  double step = 1e-5;
  double tolerance = 1e-6;
  std::vector<GradCheckEntry> entries;
  bool passed() const;
};

/// Central differences with `step` against the analytic kernels for every
/// layer kind (input and parameter gradients, both heads) and two full
/// stacks through backprop().
GradCheckReport check_gradients(std::uint64_t seed, double step = 1e-5, double tolerance = 1e-6);

// ---- delayed-gradient replay ---------------------------------------------

struct StalenessOffense {
  std::int64_t t = 0;
  std::size_t k = 0;
  double max_abs_diff = 0.0;
};

struct StalenessReport {
  std::size_t K = 1;
  std::int64_t T = 0;
  ExecutionMode mode = ExecutionMode::emulated;
  double tolerance = 0.0;
  std::size_t checked = 0;     // non-warmup (t, k) pairs compared
  std::size_t warmup = 0;      // warmup pairs asserted to be exactly zero
  std::size_t mismatches = 0;
  double max_abs_diff = 0.0;
  std::optional<StalenessOffense> first;
  bool passed() const { return mismatches == 0; }
};

/// Runs T iterations and compares every applied module gradient with the
/// matching block of backprop() evaluated on the stored snapshot
/// w^{t-K+k} and batch i(t-K+k). Warmup gradients must be exactly zero.
StalenessReport check_staleness(const NetworkSpec& spec, const NetworkState& initial, const Partition& partition,
                                const OptimizerConfig& optimizer, const Dataset& train, const BatchSampler& sampler,
                                std::int64_t T, ExecutionMode mode, double tolerance);

// ---- convergence bounds --------------------------------------------------

std::unique_ptr<AnalyticObjective> make_objective(const ConvergenceSettings& settings, std::uint64_t seed);

struct TheoremSeedResult {
  std::uint64_t seed = 0;
  BoundReport report;
  /// min-so-far ||∇f||² at the final iterate over its value at t = 10.
  double min_ratio = 0.0;
};

struct TheoremSummary {
  int theorem = 1;
  std::size_t K = 1;
  std::vector<TheoremSeedResult> runs;
  std::size_t satisfied = 0;
  std::size_t min_ratio_below_1pct = 0;
};

/// For each seed builds the objective once, estimates f* with a long
/// full-batch reference run, then runs delayed SGD for every K in `modules`.
/// Theorem 1 uses the fixed schedule, theorem 2 the diminishing one.
std::vector<TheoremSummary> run_theorem(int theorem, const ConvergenceSettings& settings,
                                        std::span<const std::size_t> modules, std::uint64_t base_seed);

}  // namespace ddg
