#include "ddg/partition.hpp"

#include <algorithm>
#include <limits>

#include "ddg/error.hpp"

namespace ddg {

Partition::Partition(std::size_t layer_count, std::vector<LayerRange> ranges)
    : layer_count_(layer_count), ranges_(std::move(ranges)) {
  if (layer_count_ == 0) throw ConfigError("partition: network has no layers");
  if (ranges_.empty()) throw ConfigError("partition: no modules");
  std::size_t next = 1;
  for (const auto& r : ranges_) {
    if (r.first != next || r.last < r.first) {
      throw ConfigError("partition: ranges must be nonempty, ordered and contiguous");
    }
    next = r.last + 1;
  }
  if (next != layer_count_ + 1) throw ConfigError("partition: ranges do not cover every layer");
}

const LayerRange& Partition::range(std::size_t k) const {
  if (k < 1 || k > ranges_.size()) throw ContractError("partition: module index out of range");
  return ranges_[k - 1];
}

StalenessInfo Partition::staleness(std::size_t k) const {
  range(k);
  return {k, num_modules() - k};
}

std::size_t Partition::module_of_layer(std::size_t layer) const {
  for (std::size_t k = 1; k <= ranges_.size(); ++k)
    if (layer >= ranges_[k - 1].first && layer <= ranges_[k - 1].last) return k;
  throw ContractError("partition: layer index out of range");
}

std::vector<std::size_t> Partition::split_points() const {
  std::vector<std::size_t> s;
  for (std::size_t k = 0; k + 1 < ranges_.size(); ++k) s.push_back(ranges_[k].last);
  return s;
}

Partition make_partition(std::size_t layer_count, std::span<const std::size_t> split_points) {
  if (layer_count == 0) throw ConfigError("partition: network has no layers");
  if (split_points.size() > layer_count - 1) {
    throw ConfigError("partition: " + std::to_string(split_points.size()) + " split points for " +
                      std::to_string(layer_count) + " layers");
  }
  std::vector<LayerRange> ranges;
  std::size_t first = 1;
  for (std::size_t s : split_points) {
    if (s < 1 || s > layer_count - 1) {
      throw ConfigError("partition: split point " + std::to_string(s) + " outside [1, " +
                        std::to_string(layer_count - 1) + "]");
    }
    if (s < first) throw ConfigError("partition: split points must be strictly increasing");
    ranges.push_back({first, s});
    first = s + 1;
  }
  ranges.push_back({first, layer_count});
  return Partition(layer_count, std::move(ranges));
}

Partition balance_by_parameters(const NetworkSpec& spec, std::size_t modules) {
  const std::size_t n = spec.size();
  if (modules < 1 || modules > n) {
    throw ConfigError("partition: cannot split " + std::to_string(n) + " layers into " +
                      std::to_string(modules) + " modules");
  }
  // prefix[l] = parameters in layers 1..l.
  std::vector<std::size_t> prefix(n + 1, 0);
  for (std::size_t l = 1; l <= n; ++l) prefix[l] = prefix[l - 1] + spec.layers[l - 1].parameter_count();
  const auto load = [&](std::size_t from, std::size_t to) { return prefix[to] - prefix[from]; };

  // best[m][j]: smallest achievable max-module load splitting layers 1..j
  // into m non-empty modules.
  constexpr std::size_t inf = std::numeric_limits<std::size_t>::max();
  std::vector<std::vector<std::size_t>> best(modules + 1, std::vector<std::size_t>(n + 1, inf));
  best[0][0] = 0;
  for (std::size_t m = 1; m <= modules; ++m)
    for (std::size_t j = m; j <= n; ++j)
      for (std::size_t i = m - 1; i < j; ++i)
        if (best[m - 1][i] != inf) best[m][j] = std::min(best[m][j], std::max(best[m - 1][i], load(i, j)));
  const std::size_t bound = best[modules][n];

  // Among optimal partitions start each module as late as possible, which keeps
  // parameterless layers with the layer before them.
  std::vector<std::size_t> splits;
  std::size_t end = n;
  for (std::size_t m = modules; m > 1; --m) {
    std::size_t cut = end - 1;
    while (load(cut, end) > bound || best[m - 1][cut] > bound) --cut;
    splits.push_back(cut);
    end = cut;
  }
  std::reverse(splits.begin(), splits.end());
  return make_partition(n, splits);
}

bool is_warmup(std::int64_t t, std::size_t k, std::size_t K) { return source_iteration(t, k, K) < 0; }

std::int64_t source_iteration(std::int64_t t, std::size_t k, std::size_t K) {
  return t - std::int64_t(K) + std::int64_t(k);
}

}  // namespace ddg
