#include "ddg/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "ddg/error.hpp"
#include "ddg/random.hpp"

namespace ddg {

void Dataset::validate() const {
  if (size() == 0) throw ConfigError("dataset '" + split + "' is empty");
  if (num_classes > 0) {
    if (targets.size() != size()) throw ConfigError("dataset '" + split + "': one class index per sample");
    for (Scalar y : targets.data()) {
      if (!(y >= 0) || y != std::floor(y) || std::size_t(y) >= num_classes) {
        throw ConfigError("dataset '" + split + "': class index " + std::to_string(y) + " out of range");
      }
    }
  } else if (targets.empty() || targets.rank() != 2 || targets.rows() != size()) {
    throw ConfigError("dataset '" + split + "': regression targets must be [N x m]");
  }
}

Batch gather(const Dataset& data, const std::vector<std::size_t>& indices) {
  Batch b;
  b.indices = indices;
  const std::size_t n = indices.size(), d = data.feature_dim();
  b.features = Tensor({n, d});
  const std::size_t m = data.num_classes > 0 ? 1 : data.targets.cols();
  b.targets = data.num_classes > 0 ? Tensor({n}) : Tensor({n, m});
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t i = indices[r];
    if (i >= data.size()) throw ContractError("batch index out of range");
    std::copy_n(data.features.data().begin() + i * d, d, b.features.data().begin() + r * d);
    std::copy_n(data.targets.data().begin() + i * m, m, b.targets.data().begin() + r * m);
  }
  return b;
}

// ---- IDX -----------------------------------------------------------------

namespace {

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
  if (offset + 4 > bytes.size()) throw ParseError("idx: truncated header", bytes.size());
  return (std::uint32_t(bytes[offset]) << 24) | (std::uint32_t(bytes[offset + 1]) << 16) |
         (std::uint32_t(bytes[offset + 2]) << 8) | std::uint32_t(bytes[offset + 3]);
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(std::uint8_t(v >> 24));
  out.push_back(std::uint8_t(v >> 16));
  out.push_back(std::uint8_t(v >> 8));
  out.push_back(std::uint8_t(v));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

IdxArray parse_idx(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) throw ParseError("idx: truncated magic number", bytes.size());
  if (bytes[0] != 0 || bytes[1] != 0) throw ParseError("idx: bad magic number", 0);
  if (bytes[2] != 0x08) throw ParseError("idx: only unsigned-byte payloads are supported", 2);
  const std::size_t ndims = bytes[3];
  if (ndims < 1 || ndims > 4) throw ParseError("idx: unsupported dimension count " + std::to_string(ndims), 3);
  IdxArray a;
  std::size_t count = 1;
  for (std::size_t i = 0; i < ndims; ++i) {
    const std::uint32_t d = read_be32(bytes, 4 + 4 * i);
    if (d == 0) throw ParseError("idx: zero dimension", 4 + 4 * i);
    a.dims.push_back(d);
    count *= d;
  }
  const std::size_t header = 4 + 4 * ndims;
  if (bytes.size() < header + count) {
    throw ParseError("idx: payload truncated, expected " + std::to_string(count) + " bytes", bytes.size());
  }
  if (bytes.size() > header + count) throw ParseError("idx: trailing bytes after payload", header + count);
  a.values.assign(bytes.begin() + std::ptrdiff_t(header), bytes.end());
  return a;
}

std::vector<std::uint8_t> encode_idx(const IdxArray& array) {
  std::vector<std::uint8_t> out{0, 0, 0x08, std::uint8_t(array.dims.size())};
  for (auto d : array.dims) write_be32(out, d);
  out.insert(out.end(), array.values.begin(), array.values.end());
  return out;
}

IdxArray read_idx(const std::filesystem::path& path) { return parse_idx(read_file(path)); }

void write_idx(const std::filesystem::path& path, const IdxArray& array) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const auto bytes = encode_idx(array);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t num_classes) {
  const auto img = read_idx(images);
  const auto lab = read_idx(labels);
  if (img.dims.size() != 3) throw ParseError("idx: image file must have magic 0x00000803", 3);
  if (lab.dims.size() != 1) throw ParseError("idx: label file must have magic 0x00000801", 3);
  if (img.dims[0] != lab.dims[0]) throw ParseError("idx: image and label counts differ", 4);
  const std::size_t n = img.dims[0], d = std::size_t(img.dims[1]) * img.dims[2];
  Dataset ds;
  ds.features = Tensor({n, d});
  for (std::size_t i = 0; i < n * d; ++i) ds.features[i] = Scalar(img.values[i]) / Scalar(255);
  ds.targets = Tensor({n});
  std::size_t classes = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ds.targets[i] = Scalar(lab.values[i]);
    classes = std::max<std::size_t>(classes, lab.values[i] + 1u);
  }
  if (num_classes > 0 && classes > num_classes) throw ParseError("idx: label exceeds class count", 8);
  ds.num_classes = num_classes > 0 ? num_classes : classes;
  ds.normalization = "scaled_0_1";
  return ds;
}

// ---- CSV -----------------------------------------------------------------

Dataset load_csv(const std::filesystem::path& path, std::size_t num_classes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("csv: missing header row", 0);
  std::size_t columns = std::count(line.begin(), line.end(), ',') + 1;
  if (columns < 2) throw ParseError("csv: need at least one feature and one target column", 0);
  std::size_t offset = line.size() + 1;
  std::vector<Scalar> features, targets;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      offset += 1;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw ParseError("csv: non-numeric cell '" + cell + "' on data row " + std::to_string(rows + 1), offset);
      }
      if (c + 1 < columns)
        features.push_back(Scalar(v));
      else
        targets.push_back(Scalar(v));
      ++c;
    }
    if (c != columns) {
      throw ParseError("csv: row " + std::to_string(rows + 1) + " has " + std::to_string(c) + " columns, expected " +
                           std::to_string(columns),
                       offset);
    }
    offset += line.size() + 1;
    ++rows;
  }
  if (rows == 0) throw ParseError("csv: no data rows", offset);
  Dataset ds;
  ds.features = Tensor({rows, columns - 1}, std::move(features));
  ds.num_classes = num_classes;
  ds.targets = num_classes > 0 ? Tensor({rows}, std::move(targets)) : Tensor({rows, 1}, std::move(targets));
  ds.validate();
  return ds;
}

// ---- synthetic -------------------------------------------------------------

Dataset synth_blobs(const BlobsParams& params, std::uint64_t seed, std::size_t n) {
  if (params.classes < 2 || params.dim < 1 || n < 1 || !(params.separation >= 0)) {
    throw ConfigError("blobs: need >= 2 classes, dim >= 1, N >= 1 and separation >= 0");
  }
  RandomSource src(seed);
  std::vector<std::vector<double>> means(params.classes, std::vector<double>(params.dim));
  for (std::size_t c = 0; c < params.classes; ++c) {
    if (params.classes == 2 && c == 1) {
      for (std::size_t j = 0; j < params.dim; ++j) means[1][j] = -means[0][j];
      break;
    }
    double norm = 0;
    for (auto& v : means[c]) {
      v = src.gaussian(0, 1);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : means[c]) v *= 0.5 * params.separation / (norm > 0 ? norm : 1.0);
  }
  Dataset ds;
  ds.features = Tensor({n, params.dim});
  ds.targets = Tensor({n});
  ds.num_classes = params.classes;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % params.classes;
    ds.targets[i] = Scalar(c);
    for (std::size_t j = 0; j < params.dim; ++j) ds.features.at(i, j) = Scalar(means[c][j] + src.gaussian(0, 1));
  }
  return ds;
}

void column_stats(const Dataset& data, std::vector<double>& mean, std::vector<double>& stddev) {
  const std::size_t n = data.size(), d = data.feature_dim();
  mean.assign(d, 0.0);
  stddev.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += data.features.at(i, j);
  for (auto& m : mean) m /= double(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double e = data.features.at(i, j) - mean[j];
      stddev[j] += e * e;
    }
  for (auto& s : stddev) s = std::sqrt(s / double(n));
}

void standardize(Dataset& data, const std::vector<double>& mean, const std::vector<double>& stddev) {
  const std::size_t n = data.size(), d = data.feature_dim();
  if (mean.size() != d || stddev.size() != d) throw ContractError("standardize: statistics do not match features");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double s = stddev[j] > 0 ? stddev[j] : 1.0;
      data.features.at(i, j) = Scalar((data.features.at(i, j) - mean[j]) / s);
    }
  data.normalization = "standardized";
}

DatasetSplits synth_blobs_splits(const BlobsParams& params, std::uint64_t seed, std::size_t n_train,
                                 std::size_t n_test) {
  DatasetSplits s;
  s.train = synth_blobs(params, seed, n_train + n_test);
  // Same class means for both splits: draw once, then cut.
  Dataset all = std::move(s.train);
  const std::size_t d = params.dim;
  auto slice = [&](std::size_t from, std::size_t count, const char* name) {
    Dataset ds;
    ds.num_classes = all.num_classes;
    ds.split = name;
    ds.features = Tensor({count, d});
    ds.targets = Tensor({count});
    std::copy_n(all.features.data().begin() + from * d, count * d, ds.features.data().begin());
    std::copy_n(all.targets.data().begin() + from, count, ds.targets.data().begin());
    return ds;
  };
  s.train = slice(0, n_train, "train");
  std::vector<double> mean, stddev;
  column_stats(s.train, mean, stddev);
  standardize(s.train, mean, stddev);
  if (n_test > 0) {
    s.test = slice(n_train, n_test, "test");
    standardize(s.test, mean, stddev);
  }
  return s;
}

Dataset synth_quadratic_stream(std::size_t dim, double noise, std::uint64_t seed, std::size_t n) {
  if (dim < 1 || n < 1 || !(noise >= 0)) throw ConfigError("quadratic stream: need dim, N >= 1 and noise >= 0");
  RandomSource src(seed);
  Dataset ds;
  ds.features = Tensor({n, dim});
  ds.targets = Tensor({n, 1});
  ds.num_classes = 0;
  ds.normalization = "none";
  if (noise == 0) return ds;
  for (std::size_t i = 0; i < n; ++i) {
    // uniform direction, radius uniform in [0, noise]
    double norm = 0;
    for (std::size_t j = 0; j < dim; ++j) {
      ds.features.at(i, j) = Scalar(src.gaussian(0, 1));
      norm += double(ds.features.at(i, j)) * ds.features.at(i, j);
    }
    const double r = src.uniform(0, noise) / (norm > 0 ? std::sqrt(norm) : 1.0);
    for (std::size_t j = 0; j < dim; ++j) ds.features.at(i, j) *= Scalar(r);
  }
  // Center so the full-batch gradient is noise-free, then shrink back into
  // the radius.
  std::vector<double> mean(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim; ++j) mean[j] += ds.features.at(i, j);
  for (auto& m : mean) m /= double(n);
  double max_norm = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < dim; ++j) {
      ds.features.at(i, j) -= Scalar(mean[j]);
      s += double(ds.features.at(i, j)) * ds.features.at(i, j);
    }
    max_norm = std::max(max_norm, std::sqrt(s));
  }
  if (max_norm > noise) {
    const Scalar shrink = Scalar(noise / max_norm);
    for (Scalar& v : ds.features.data()) v *= shrink;
  }
  return ds;
}

// ---- sampling ------------------------------------------------------------

BatchSampler::BatchSampler(std::uint64_t seed, std::size_t batch_size, std::size_t n, SamplingMode mode)
    : seed_(seed), batch_size_(batch_size), n_(n), mode_(mode) {
  if (n_ == 0) throw ConfigError("sampler: empty dataset");
  if (batch_size_ == 0 || batch_size_ > n_) {
    throw ConfigError("sampler: batch size must lie in [1, " + std::to_string(n_) + "]");
  }
  steps_per_epoch_ = (n_ + batch_size_ - 1) / batch_size_;
}

const std::vector<std::size_t>& BatchSampler::permutation(std::int64_t epoch) const {
  if (cached_epoch_ != epoch) {
    cached_perm_.resize(n_);
    std::iota(cached_perm_.begin(), cached_perm_.end(), std::size_t(0));
    RandomSource src(mix_seed(seed_, std::uint64_t(epoch)));
    for (std::size_t i = n_ - 1; i > 0; --i) std::swap(cached_perm_[i], cached_perm_[src.below(i + 1)]);
    cached_epoch_ = epoch;
  }
  return cached_perm_;
}

std::vector<std::size_t> BatchSampler::indices(std::int64_t t) const {
  if (t < 0) throw DomainError("sampler: negative iteration");
  std::vector<std::size_t> out;
  if (mode_ == SamplingMode::replacement) {
    RandomSource src(mix_seed(seed_ ^ 0xA5A5A5A5A5A5A5A5ULL, std::uint64_t(t)));
    out.resize(batch_size_);
    for (auto& i : out) i = std::size_t(src.below(n_));
    return out;
  }
  const std::int64_t epoch = epoch_of(t);
  const std::size_t pos = std::size_t(t % std::int64_t(steps_per_epoch_));
  const std::size_t begin = pos * batch_size_, end = std::min(n_, begin + batch_size_);
  out.resize(end - begin);
  if (mode_ == SamplingMode::sequential) {
    std::iota(out.begin(), out.end(), begin);
  } else {
    const auto& perm = permutation(epoch);
    std::copy(perm.begin() + std::ptrdiff_t(begin), perm.begin() + std::ptrdiff_t(end), out.begin());
  }
  return out;
}

Batch next_batch(const BatchSampler& sampler, const Dataset& data, std::int64_t t) {
  return gather(data, sampler.indices(t));
}

}  // namespace ddg
