#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ddg/tensor.hpp"

namespace ddg {

/// Features [N x d]; targets are class indices [N] when num_classes > 0,
/// otherwise regression rows [N x m].
struct Dataset {
  Tensor features;
  Tensor targets;
  std::size_t num_classes = 0;
  std::string split = "train";
  std::string normalization = "none";

  std::size_t size() const { return features.empty() ? 0 : features.rows(); }
  std::size_t feature_dim() const { return features.empty() ? 0 : features.cols(); }
  void validate() const;
};

struct DatasetSplits {
  Dataset train;
  Dataset test;
};

struct Batch {
  Tensor features;
  Tensor targets;
  std::vector<std::size_t> indices;  // i(t)

  std::size_t size() const noexcept { return indices.size(); }
};

Batch gather(const Dataset& data, const std::vector<std::size_t>& indices);

// ---- IDX -----------------------------------------------------------------

/// Raw IDX unsigned-byte array: big-endian header, dims, payload.
struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> values;
};

IdxArray parse_idx(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_idx(const IdxArray& array);
IdxArray read_idx(const std::filesystem::path& path);
void write_idx(const std::filesystem::path& path, const IdxArray& array);

/// A 0x00000803 image file paired with a 0x00000801 label file. Pixels are
/// scaled to [0, 1] and each image flattened to one row. num_classes = 0
/// infers max(label) + 1.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t num_classes = 0);

// ---- CSV -----------------------------------------------------------------

/// Header row, one sample per line, last column the target. With
/// num_classes > 0 the target must be an integer class index.
Dataset load_csv(const std::filesystem::path& path, std::size_t num_classes);

// ---- synthetic -----------------------------------------------------------

struct BlobsParams {
  std::size_t classes = 2;
  std::size_t dim = 2;
  double separation = 3.0;  // distance of each class mean from its opposite (2 classes) / 2x radius
};

/// Isotropic unit-variance Gaussian blobs. Class means sit at
/// separation/2 along seeded random unit directions (opposite directions for
/// two classes, so the means are exactly `separation` apart). Labels
/// alternate 0,1,..,C-1.
Dataset synth_blobs(const BlobsParams& params, std::uint64_t seed, std::size_t n);

/// Train/test blobs drawn from the same distribution, both standardized with
/// the train split's per-feature mean and standard deviation.
DatasetSplits synth_blobs_splits(const BlobsParams& params, std::uint64_t seed, std::size_t n_train,
                                 std::size_t n_test);

/// Zero-mean noise vectors of radius at most `noise` for a quadratic
/// objective (features), with zero targets.
Dataset synth_quadratic_stream(std::size_t dim, double noise, std::uint64_t seed, std::size_t n);

/// Standardizes `data` in place with the given statistics.
void standardize(Dataset& data, const std::vector<double>& mean, const std::vector<double>& stddev);
void column_stats(const Dataset& data, std::vector<double>& mean, std::vector<double>& stddev);

// ---- sampling ------------------------------------------------------------

enum class SamplingMode { shuffle, replacement, sequential };

/// Index sequence i(t) as a pure function of (seed, batch_size, N, t).
/// shuffle: one permutation per epoch, consecutive slices of batch_size
/// (the last slice may be shorter); replacement: i.i.d. uniform indices;
/// sequential: 0..N-1 in order, wrapping per epoch.
class BatchSampler {
 public:
  BatchSampler(std::uint64_t seed, std::size_t batch_size, std::size_t n,
               SamplingMode mode = SamplingMode::shuffle);

  std::vector<std::size_t> indices(std::int64_t t) const;
  std::size_t steps_per_epoch() const noexcept { return steps_per_epoch_; }
  std::int64_t epoch_of(std::int64_t t) const noexcept { return t / std::int64_t(steps_per_epoch_); }
  std::size_t batch_size() const noexcept { return batch_size_; }

 private:
  const std::vector<std::size_t>& permutation(std::int64_t epoch) const;

  std::uint64_t seed_;
  std::size_t batch_size_;
  std::size_t n_;
  SamplingMode mode_;
  std::size_t steps_per_epoch_;
  mutable std::int64_t cached_epoch_ = -1;
  mutable std::vector<std::size_t> cached_perm_;
};

Batch next_batch(const BatchSampler& sampler, const Dataset& data, std::int64_t t);

}  // namespace ddg
