#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ddg/pipeline.hpp"

namespace ddg {

/// One logged iteration. Evaluation columns are NaN on rows without an
/// evaluation; they serialize as empty cells.
struct MetricsRow {
  std::int64_t t = 0;
  std::int64_t epoch = 0;
  double train_loss = 0.0;
  double grad_sq_norm = 0.0;
  double min_grad_sq_so_far = 0.0;
  double test_loss = 0.0;
  double test_top1 = 0.0;
  double wall_ms_forward = 0.0;
  double wall_ms_backward = 0.0;
  std::vector<ModuleTiming> modules;

  bool has_evaluation() const;
  friend bool operator==(const MetricsRow& a, const MetricsRow& b);
};

/// t,epoch,train_loss,grad_sq_norm,min_grad_sq_so_far,test_loss,test_top1,
/// wall_ms_forward,wall_ms_backward,module_ms
extern const char* const kMetricsHeader;

/// module_ms holds "forward/backward" per module joined by ';'.
std::string format_metrics_row(const MetricsRow& row);
/// `at` is the line's byte offset, reported in ParseError.
MetricsRow parse_metrics_row(const std::string& line, std::size_t at = 0);

std::vector<MetricsRow> read_metrics(const std::filesystem::path& path);

/// Writes the header on open and flushes after every row.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path);
  void write(const MetricsRow& row);

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

}  // namespace ddg
