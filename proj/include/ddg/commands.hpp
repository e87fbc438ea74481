#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ddg/config.hpp"

namespace ddg {

enum ExitCode : int {
  kExitOk = 0,
  kExitVerifyFailed = 1,
  kExitConfig = 2,
  kExitIo = 3,
  kExitDivergence = 4,
  kExitOther = 5,
};

const char* version_string();

/// Runs `body`, mapping exceptions to exit codes and printing
/// "error [category]: message" to `err`.
int run_guarded(const std::function<int()>& body, std::ostream& err);

/// Writes metrics.csv, weights.bin and manifest.json into output_dir.
int cmd_train(const RunConfig& config, std::ostream& out);

/// which: gradients | staleness | theorem1 | theorem2. Writes
/// verify_<which>.json into output_dir.
int cmd_verify(const RunConfig& config, const std::string& which, std::ostream& out);

struct BenchOptions {
  std::vector<std::size_t> modules = {1, 2, 4};
  std::int64_t iterations = 200;
  std::size_t repeats = 3;
  std::size_t width = 512;  // used when the config has no network
  std::size_t depth = 4;
};

/// Writes bench.json into output_dir.
int cmd_bench(const RunConfig& config, const BenchOptions& options, std::ostream& out);

/// Writes loss_vs_epoch.csv and loss_vs_time.csv derived from a metrics CSV.
int cmd_emit_plotdata(const std::filesystem::path& metrics, const std::filesystem::path& output_dir,
                      std::ostream& out);

}  // namespace ddg
