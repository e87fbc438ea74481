#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ddg/network.hpp"

namespace ddg {

/// Inclusive, 1-based layer range [first, last].
struct LayerRange {
  std::size_t first = 1;
  std::size_t last = 1;

  std::size_t size() const noexcept { return last - first + 1; }
  friend bool operator==(const LayerRange&, const LayerRange&) = default;
};

struct StalenessInfo {
  std::size_t module = 1;  // k, 1-based
  std::size_t delay = 0;   // K - k
};

/// Contiguous split of layers 1..L into modules G(1..K). Module indices are
/// 1-based throughout.
class Partition {
 public:
  Partition(std::size_t layer_count, std::vector<LayerRange> ranges);

  std::size_t num_modules() const noexcept { return ranges_.size(); }
  std::size_t layer_count() const noexcept { return layer_count_; }
  const LayerRange& range(std::size_t k) const;
  const std::vector<LayerRange>& ranges() const noexcept { return ranges_; }
  StalenessInfo staleness(std::size_t k) const;
  std::size_t module_of_layer(std::size_t layer) const;
  /// Split points that reproduce this partition through make_partition.
  std::vector<std::size_t> split_points() const;

 private:
  std::size_t layer_count_;
  std::vector<LayerRange> ranges_;
};

/// K = |split_points| + 1; module k spans (split[k-2], split[k-1]].
/// Split points must be strictly increasing and lie in [1, L-1].
Partition make_partition(std::size_t layer_count, std::span<const std::size_t> split_points);

/// K modules with parameter counts as equal as a greedy sweep allows. Every
/// module gets at least one layer.
Partition balance_by_parameters(const NetworkSpec& spec, std::size_t modules);

/// Module k applies a zero gradient at iteration t (t - K + k < 0).
bool is_warmup(std::int64_t t, std::size_t k, std::size_t K);

/// Iteration whose forward pass module k back-propagates at iteration t.
std::int64_t source_iteration(std::int64_t t, std::size_t k, std::size_t K);

}  // namespace ddg
