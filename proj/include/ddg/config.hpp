#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddg/data.hpp"
#include "ddg/network.hpp"
#include "ddg/optimizers.hpp"
#include "ddg/pipeline.hpp"

namespace ddg {

struct DatasetConfig {
  std::string kind = "blobs";  // blobs | idx | csv
  // blobs
  std::size_t classes = 2;
  std::size_t dim = 2;
  double separation = 3.0;
  std::size_t n_train = 1000;
  std::size_t n_test = 200;
  std::optional<std::uint64_t> seed;  // defaults to the run seed
  // idx / csv
  std::string train_images, train_labels, test_images, test_labels;
  std::string train_csv, test_csv;
};

struct OptimizerSettings {
  std::string kind = "sgd";           // sgd | adam
  std::string schedule = "fixed";     // fixed | diminishing (sgd only)
  double lr = 0.01;                   // gamma, gamma0, or adam stepsize
  double momentum = 0.0;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  OptimizerConfig build() const;
};

/// Settings for `verify theorem1|theorem2`.
struct ConvergenceSettings {
  std::string objective = "logistic";  // logistic | quadratic
  std::size_t n = 2000;
  std::size_t dim = 20;
  double separation = 3.0;
  double lambda = 0.0;
  double noise = 0.1;                  // quadratic noise radius
  std::vector<double> eigenvalues;     // quadratic diag(A); default 1..dim
  std::size_t modules = 1;
  std::optional<double> gamma;         // explicit gamma / gamma0
  double gamma_times_L = 0.25;         // used when gamma is absent
  std::int64_t iterations = 10000;
  std::size_t batch_size = 1;
  std::size_t seeds = 1;
  std::int64_t reference_iterations = 20000;
};

struct RunConfig {
  std::vector<LayerSpec> layers;
  std::string init = "he_gaussian";  // xavier_uniform | he_gaussian | zeros
  std::vector<std::size_t> split_points;
  std::optional<std::size_t> modules;  // auto-balance when split_points is empty
  OptimizerSettings optimizer;
  std::string mode = "emulated";  // emulated | parallel
  DatasetConfig dataset;
  std::size_t batch_size = 128;
  std::optional<std::int64_t> iterations;
  std::optional<std::int64_t> epochs;
  std::uint64_t seed = 0;
  std::string precision = "f64";
  std::string output_dir = "ddg_out";
  std::int64_t eval_every = 0;  // 0: at the end of every epoch
  std::string sampling = "shuffle";
  bool log_timings = false;
  ConvergenceSettings convergence;

  /// Whole-config validation; throws ConfigError before any compute.
  void validate() const;
  /// The convergence section alone; needs no network or dataset.
  void validate_convergence() const;

  NetworkSpec network() const;
  Partition partition() const;
  InitScheme init_scheme() const;
  ExecutionMode execution_mode() const;
  SamplingMode sampling_mode() const;
  std::uint64_t dataset_seed() const { return dataset.seed.value_or(seed); }
  /// Total iterations, resolving epochs against the train split size.
  std::int64_t total_iterations(std::size_t train_size) const;
};

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& config);
RunConfig load_config(const std::filesystem::path& path);

LayerSpec layer_from_json(const nlohmann::json& j);
nlohmann::json layer_to_json(const LayerSpec& layer);

DatasetSplits load_datasets(const RunConfig& config);

}  // namespace ddg
