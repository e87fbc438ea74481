#pragma once

#include <cstdint>
#include <vector>

#include "ddg/config.hpp"
#include "ddg/metrics.hpp"

namespace ddg {

struct TrainResult {
  NetworkState initial;
  NetworkState final_state;
  std::vector<MetricsRow> rows;
  std::int64_t iterations = 0;
  /// Last evaluation on the test split; NaN without a test split.
  double test_loss = 0.0;
  double test_top1 = 0.0;
};

/// Seeded initial weights for a run.
NetworkState initial_state(const RunConfig& config);

/// Runs the delayed-gradient schedule for the configured number of
/// iterations. Rows go to `sink` as they are produced; a DivergenceError
/// leaves the rows written so far in place.
TrainResult train(const RunConfig& config, const DatasetSplits& data, MetricsWriter* sink = nullptr);

/// Test loss and Top-1 percentage of `state`; NaN when `test` is empty
/// (Top-1 is also NaN for regression heads).
std::pair<double, double> evaluate_split(const NetworkSpec& spec, const NetworkState& state, const Dataset& test);

}  // namespace ddg
