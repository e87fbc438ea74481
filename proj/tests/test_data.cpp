#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "ddg/convergence.hpp"
#include "ddg/data.hpp"
#include "ddg/error.hpp"

using namespace ddg;

namespace {

std::filesystem::path tmp_dir(const std::string& name) {
  const auto p = std::filesystem::path(DDG_TEST_TMP) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

IdxArray four_images() {
  IdxArray a;
  a.dims = {4, 3, 2};
  for (int i = 0; i < 24; ++i) a.values.push_back(std::uint8_t(i * 11));
  return a;
}

IdxArray four_labels() { return {{4}, {0, 1, 2, 1}}; }

/// Train accuracy of a logistic model fitted by full-batch gradient descent.
double logistic_train_accuracy(const Dataset& d) {
  const LogisticObjective obj(d, 0.0);
  Vector w(obj.dim(), 0.0);
  const double step = 1.0 / obj.lipschitz();
  for (int it = 0; it < 500; ++it) {
    const Vector g = obj.full_gradient(w);
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= step * g[j];
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double z = w.back();
    for (std::size_t j = 0; j < d.feature_dim(); ++j) z += w[j] * d.features.at(i, j);
    correct += (z > 0) == (d.targets[i] == 1);
  }
  return double(correct) / double(d.size());
}

}  // namespace

TEST(Idx, EncodeParseRoundTrip) {
  const auto a = four_images();
  const auto bytes = encode_idx(a);
  ASSERT_EQ(bytes.size(), 4u + 3 * 4 + 24);
  EXPECT_EQ(bytes[2], 0x08);
  EXPECT_EQ(bytes[3], 3);
  EXPECT_EQ(bytes[7], 4);  // big-endian count
  const auto b = parse_idx(bytes);
  EXPECT_EQ(b.dims, a.dims);
  EXPECT_EQ(b.values, a.values);
  EXPECT_EQ(encode_idx(b), bytes);
}

TEST(Idx, FixtureFilesLoad) {
  const auto dir = tmp_dir("idx");
  write_idx(dir / "img.idx", four_images());
  write_idx(dir / "lab.idx", four_labels());
  const auto read_back = read_idx(dir / "img.idx");
  EXPECT_EQ(encode_idx(read_back), encode_idx(four_images()));

  const Dataset d = load_idx(dir / "img.idx", dir / "lab.idx");
  EXPECT_EQ(d.size(), 4u);
  EXPECT_EQ(d.feature_dim(), 6u);
  EXPECT_EQ(d.num_classes, 3u);
  EXPECT_EQ(d.features.at(0, 1), 11.0 / 255.0);
  EXPECT_EQ(d.features.at(3, 5), 253.0 / 255.0);
  EXPECT_EQ(d.targets, Tensor::vector({0, 1, 2, 1}));
  for (double v : d.features.data()) {
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
  EXPECT_EQ(load_idx(dir / "img.idx", dir / "lab.idx", 10).num_classes, 10u);
  EXPECT_THROW(load_idx(dir / "img.idx", dir / "lab.idx", 2), ParseError);
  EXPECT_THROW(load_idx(dir / "lab.idx", dir / "img.idx"), ParseError);
  EXPECT_THROW(read_idx(dir / "missing.idx"), IoError);
}

TEST(Idx, TruncatedHeaderReportsOffset) {
  auto bytes = encode_idx(four_images());
  bytes.resize(9);
  try {
    parse_idx(bytes);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 9u);
    EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos);
  }
  EXPECT_THROW(parse_idx({0, 0}), ParseError);
}

TEST(Idx, BadMagicAndPayload) {
  auto bytes = encode_idx(four_images());
  bytes[0] = 1;
  try {
    parse_idx(bytes);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  bytes = encode_idx(four_images());
  bytes.pop_back();
  EXPECT_THROW(parse_idx(bytes), ParseError);
  bytes = encode_idx(four_images());
  bytes.push_back(0);
  EXPECT_THROW(parse_idx(bytes), ParseError);
}

TEST(Idx, MnistTestSetIfPresent) {
  const std::filesystem::path images = "data/t10k-images-idx3-ubyte", labels = "data/t10k-labels-idx1-ubyte";
  if (!std::filesystem::exists(images) || !std::filesystem::exists(labels)) GTEST_SKIP() << "MNIST not available";
  const Dataset d = load_idx(images, labels, 10);
  EXPECT_EQ(d.size(), 10000u);
  EXPECT_EQ(d.feature_dim(), 784u);
}

TEST(Csv, LoadsClassificationAndRegression) {
  const auto dir = tmp_dir("csv");
  {
    std::ofstream f(dir / "c.csv");
    f << "x1,x2,label\n1.5,2,0\n-1,0.25,2\n3,4,1\n";
    std::ofstream r(dir / "r.csv");
    r << "a,b,y\n1,2,0.5\n3,4,-1.5\n";
  }
  const Dataset c = load_csv(dir / "c.csv", 3);
  EXPECT_EQ(c.size(), 3u);
  EXPECT_EQ(c.feature_dim(), 2u);
  EXPECT_EQ(c.features.at(1, 1), 0.25);
  EXPECT_EQ(c.targets, Tensor::vector({0, 2, 1}));
  const Dataset r = load_csv(dir / "r.csv", 0);
  EXPECT_EQ(r.targets.shape(), (Shape{2, 1}));
  EXPECT_EQ(r.targets[1], -1.5);
}

TEST(Csv, Errors) {
  const auto dir = tmp_dir("csv_bad");
  auto write = [&](const char* name, const char* text) {
    std::ofstream(dir / name) << text;
    return dir / name;
  };
  EXPECT_THROW(load_csv(write("empty.csv", ""), 2), ParseError);
  EXPECT_THROW(load_csv(write("header.csv", "a,b\n"), 2), ParseError);
  EXPECT_THROW(load_csv(write("ragged.csv", "a,b,y\n1,2,0\n1,0\n"), 2), ParseError);
  EXPECT_THROW(load_csv(write("text.csv", "a,y\nfoo,1\n"), 2), ParseError);
  EXPECT_THROW(load_csv(write("range.csv", "a,y\n1,5\n"), 2), Error);
  EXPECT_THROW(load_csv(dir / "nope.csv", 2), IoError);
}

TEST(Synth, SameSeedSameData) {
  const auto a = synth_blobs({3, 4, 2.0}, 5, 100);
  const auto b = synth_blobs({3, 4, 2.0}, 5, 100);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.targets, b.targets);
  EXPECT_NE(a.features, synth_blobs({3, 4, 2.0}, 6, 100).features);
  EXPECT_EQ(a.targets[0], 0.0);
  EXPECT_EQ(a.targets[1], 1.0);
  EXPECT_EQ(a.targets[2], 2.0);
}

TEST(Synth, ZeroSeparationIsChance) {
  const double acc = logistic_train_accuracy(synth_blobs({2, 2, 0.0}, 1, 4000));
  EXPECT_NEAR(acc, 0.5, 0.05);
}

TEST(Synth, WideSeparationIsLinearlySeparable) {
  EXPECT_GT(logistic_train_accuracy(synth_blobs({2, 2, 10.0}, 2, 1000)), 0.99);
}

TEST(Synth, SplitsShareTrainStatistics) {
  const auto s = synth_blobs_splits({2, 3, 4.0}, 3, 500, 100);
  std::vector<double> mean, sd;
  column_stats(s.train, mean, sd);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_NEAR(mean[j], 0.0, 1e-12);
    EXPECT_NEAR(sd[j], 1.0, 1e-12);
  }
  EXPECT_EQ(s.train.normalization, "standardized");
  EXPECT_EQ(s.test.size(), 100u);
  EXPECT_EQ(s.test.split, "test");
}

TEST(Synth, QuadraticStreamIsBoundedAndCentered) {
  const auto d = synth_quadratic_stream(5, 0.3, 4, 1000);
  std::vector<double> mean(5, 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    double sq = 0;
    for (std::size_t j = 0; j < 5; ++j) {
      sq += d.features.at(i, j) * d.features.at(i, j);
      mean[j] += d.features.at(i, j);
    }
    ASSERT_LE(std::sqrt(sq), 0.3 + 1e-12);
  }
  for (double m : mean) EXPECT_NEAR(m, 0.0, 1e-12);
}

TEST(Sampler, FullBatchSequential) {
  const BatchSampler s(1, 10, 10, SamplingMode::sequential);
  for (std::int64_t t = 0; t < 5; ++t) {
    const auto idx = s.indices(t);
    ASSERT_EQ(idx.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) ASSERT_EQ(idx[i], i);
  }
}

TEST(Sampler, Replay) {
  for (auto mode : {SamplingMode::shuffle, SamplingMode::replacement, SamplingMode::sequential}) {
    const BatchSampler a(77, 7, 50, mode), b(77, 7, 50, mode);
    for (std::int64_t t : {0, 3, 20, 7, 0, 100}) ASSERT_EQ(a.indices(t), b.indices(t));
    // Out-of-order queries see the same sequence as in-order ones.
    const auto late = a.indices(40);
    for (std::int64_t t = 0; t < 40; ++t) b.indices(t);
    ASSERT_EQ(b.indices(40), late);
  }
}

TEST(Sampler, EveryEpochIsAPermutation) {
  const std::size_t N = 53, B = 8;
  const BatchSampler s(9, B, N);
  ASSERT_EQ(s.steps_per_epoch(), 7u);
  for (std::int64_t epoch = 0; epoch < 4; ++epoch) {
    std::multiset<std::size_t> seen;
    for (std::int64_t i = 0; i < 7; ++i) {
      const auto idx = s.indices(epoch * 7 + i);
      ASSERT_EQ(s.epoch_of(epoch * 7 + i), epoch);
      seen.insert(idx.begin(), idx.end());
    }
    ASSERT_EQ(seen.size(), N);
    for (std::size_t n = 0; n < N; ++n) ASSERT_EQ(seen.count(n), 1u);
  }
  EXPECT_NE(s.indices(0), s.indices(7));
}

TEST(Sampler, ReplacementDrawsInRange) {
  const BatchSampler s(3, 16, 20, SamplingMode::replacement);
  std::set<std::size_t> seen;
  for (std::int64_t t = 0; t < 50; ++t)
    for (std::size_t i : s.indices(t)) {
      ASSERT_LT(i, 20u);
      seen.insert(i);
    }
  EXPECT_EQ(seen.size(), 20u);
}

TEST(Sampler, Errors) {
  EXPECT_THROW(BatchSampler(1, 0, 10), ConfigError);
  EXPECT_THROW(BatchSampler(1, 11, 10), ConfigError);
  EXPECT_THROW(BatchSampler(1, 1, 0), ConfigError);
  EXPECT_THROW(BatchSampler(1, 2, 10).indices(-1), DomainError);
}

TEST(Batch, GatherMatchesIndices) {
  const auto d = synth_blobs({2, 3, 1.0}, 1, 20);
  const BatchSampler s(4, 5, 20);
  const Batch b = next_batch(s, d, 2);
  ASSERT_EQ(b.indices, s.indices(2));
  for (std::size_t r = 0; r < 5; ++r) {
    EXPECT_EQ(b.targets[r], d.targets[b.indices[r]]);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(b.features.at(r, j), d.features.at(b.indices[r], j));
  }
  EXPECT_THROW(gather(d, {20}), ContractError);
}

TEST(Dataset, ValidateCatchesBadLabels) {
  auto d = synth_blobs({2, 2, 1.0}, 1, 4);
  d.targets[0] = 2;
  EXPECT_THROW(d.validate(), ConfigError);
  EXPECT_THROW(Dataset{}.validate(), ConfigError);
}
