#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddg/network.hpp"
#include "ddg/optimizers.hpp"

namespace ddg {

struct BenchConfig {
  NetworkSpec network;
  std::size_t batch_size = 128;
  std::vector<std::size_t> modules = {1, 2, 4};
  std::int64_t iterations = 200;  // timed iterations per repeat
  std::int64_t warmup = 10;       // untimed iterations before timing
  std::size_t repeats = 3;
  std::uint64_t seed = 0;
  OptimizerConfig optimizer = SgdConfig{StepsizeSchedule::fixed(1e-3)};
};

struct BenchEntry {
  std::size_t K = 1;
  double measured_ms = 0.0;  // median parallel iteration time
  double model_ms = 0.0;     // T_F + T_B / K
  double speedup = 0.0;      // (T_F + T_B) / measured
  std::vector<std::size_t> split_points;
  std::string warning;
};

struct BenchReport {
  double forward_ms = 0.0;   // T_F at K = 1
  double backward_ms = 0.0;  // T_B at K = 1, optimizer step included
  double forward_share = 0.0;
  unsigned logical_cores = 0;
  unsigned physical_cores = 0;
  std::vector<BenchEntry> entries;

  const BenchEntry* find(std::size_t K) const;
};

/// Stack of `depth` affine+relu blocks of `width` units followed by an
/// affine to `classes` and a softmax cross-entropy head.
NetworkSpec heavy_network(std::size_t width, std::size_t depth, std::size_t classes);

/// Distinct (physical id, core id) pairs from /proc/cpuinfo, falling back to
/// the logical count.
unsigned physical_core_count();

/// Times T_F and T_B with the single-threaded schedule at K = 1, then the
/// threaded pipeline for every K on a parameter-balanced partition. All
/// reported times are medians over iterations and then over repeats.
BenchReport run_bench(const BenchConfig& config);

nlohmann::json bench_to_json(const BenchReport& report);
std::string format_bench(const BenchReport& report);

}  // namespace ddg
