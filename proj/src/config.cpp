#include "ddg/config.hpp"

#include <fstream>
#include <set>

#include "ddg/error.hpp"

namespace ddg {

using nlohmann::json;

namespace {

void check_keys(const json& j, const char* where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items())
    if (!ok.count(key)) throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

template <typename T>
void read(const json& j, const char* key, std::optional<T>& out) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  T v{};
  read(j, key, v);
  out = v;
}

void require_one_of(const std::string& value, const char* what, std::initializer_list<const char*> options) {
  for (const char* o : options)
    if (value == o) return;
  std::string list;
  for (const char* o : options) list += std::string(list.empty() ? "" : ", ") + o;
  throw ConfigError(std::string(what) + " must be one of {" + list + "}, got '" + value + "'");
}

}  // namespace

LayerSpec layer_from_json(const json& j) {
  if (!j.is_object() || !j.contains("type")) throw ConfigError("layer: expected an object with a 'type'");
  const std::string type = j.at("type").get<std::string>();
  if (type == "affine") {
    check_keys(j, "affine layer", {"type", "in", "out"});
    if (!j.contains("in") || !j.contains("out")) throw ConfigError("affine layer needs 'in' and 'out'");
    return LayerSpec::affine(j.at("in").get<std::size_t>(), j.at("out").get<std::size_t>());
  }
  if (type == "relu") return LayerSpec::relu();
  if (type == "tanh") return LayerSpec::tanh();
  if (type == "mse") return LayerSpec::mse();
  if (type == "softmax_ce") {
    check_keys(j, "softmax_ce layer", {"type", "classes"});
    if (!j.contains("classes")) throw ConfigError("softmax_ce layer needs 'classes'");
    return LayerSpec::softmax_cross_entropy(j.at("classes").get<std::size_t>());
  }
  throw ConfigError("unknown layer type '" + type + "'");
}

json layer_to_json(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::affine: return {{"type", "affine"}, {"in", l.in_dim}, {"out", l.out_dim}};
    case LayerKind::relu: return {{"type", "relu"}};
    case LayerKind::tanh: return {{"type", "tanh"}};
    case LayerKind::softmax_cross_entropy: return {{"type", "softmax_ce"}, {"classes", l.in_dim}};
    case LayerKind::mse: return {{"type", "mse"}};
  }
  return {};
}

OptimizerConfig OptimizerSettings::build() const {
  require_one_of(kind, "optimizer.kind", {"sgd", "adam"});
  if (kind == "adam") return AdamConfig{lr, beta1, beta2, epsilon};
  require_one_of(schedule, "optimizer.schedule", {"fixed", "diminishing"});
  SgdConfig c;
  c.schedule = schedule == "fixed" ? StepsizeSchedule::fixed(lr) : StepsizeSchedule::diminishing(lr);
  c.momentum = momentum;
  c.weight_decay = weight_decay;
  return c;
}

NetworkSpec RunConfig::network() const { return NetworkSpec{layers}; }

Partition RunConfig::partition() const {
  const auto net = network();
  if (!split_points.empty() || !modules || *modules == 1) return make_partition(net.size(), split_points);
  return balance_by_parameters(net, *modules);
}

InitScheme RunConfig::init_scheme() const {
  require_one_of(init, "network.init", {"xavier_uniform", "he_gaussian", "zeros"});
  if (init == "xavier_uniform") return InitScheme::xavier_uniform;
  if (init == "zeros") return InitScheme::zeros;
  return InitScheme::he_gaussian;
}

ExecutionMode RunConfig::execution_mode() const {
  require_one_of(mode, "mode", {"emulated", "parallel"});
  return mode == "parallel" ? ExecutionMode::parallel : ExecutionMode::emulated;
}

SamplingMode RunConfig::sampling_mode() const {
  require_one_of(sampling, "sampling", {"shuffle", "replacement", "sequential"});
  if (sampling == "replacement") return SamplingMode::replacement;
  if (sampling == "sequential") return SamplingMode::sequential;
  return SamplingMode::shuffle;
}

std::int64_t RunConfig::total_iterations(std::size_t train_size) const {
  if (iterations) return *iterations;
  const std::size_t steps = (train_size + batch_size - 1) / batch_size;
  return *epochs * std::int64_t(steps);
}

void RunConfig::validate() const {
  const auto net = network();
  net.validate();
  if (!split_points.empty() && modules && *modules != split_points.size() + 1) {
    throw ConfigError("modules disagrees with the number of split points");
  }
  partition();
  optimizer.build();
  init_scheme();
  execution_mode();
  sampling_mode();
#ifdef DDG_FLOAT32
  require_one_of(precision, "precision (this build stores 32-bit floats)", {"f32"});
#else
  require_one_of(precision, "precision (this build stores 64-bit floats)", {"f64"});
#endif
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (iterations.has_value() == epochs.has_value()) throw ConfigError("set exactly one of iterations / epochs");
  if (iterations && *iterations < 0) throw ConfigError("iterations must be nonnegative");
  if (epochs && *epochs < 0) throw ConfigError("epochs must be nonnegative");
  if (eval_every < 0) throw ConfigError("eval_every must be nonnegative");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");

  require_one_of(dataset.kind, "dataset.kind", {"blobs", "idx", "csv"});
  const auto& head = net.head();
  if (dataset.kind == "blobs") {
    if (head.kind != LayerKind::softmax_cross_entropy) throw ConfigError("blobs need a softmax_ce head");
    if (dataset.classes != head.in_dim) throw ConfigError("dataset.classes does not match the head's class count");
    if (dataset.dim != net.input_dim()) throw ConfigError("dataset.dim does not match the network input");
    if (dataset.n_train == 0) throw ConfigError("dataset.n_train must be positive");
    if (batch_size > dataset.n_train) throw ConfigError("batch_size exceeds the training set size");
  } else if (dataset.kind == "idx") {
    if (dataset.train_images.empty() || dataset.train_labels.empty()) {
      throw ConfigError("idx dataset needs train_images and train_labels");
    }
    if (head.kind != LayerKind::softmax_cross_entropy) throw ConfigError("idx data need a softmax_ce head");
  } else if (dataset.train_csv.empty()) {
    throw ConfigError("csv dataset needs train_csv");
  }

  validate_convergence();
}

void RunConfig::validate_convergence() const {
  const auto& c = convergence;
  require_one_of(c.objective, "convergence.objective", {"logistic", "quadratic"});
  if (c.modules < 1) throw ConfigError("convergence.modules must be positive");
  if (c.iterations < 1) throw ConfigError("convergence.iterations must be positive");
  if (c.seeds < 1) throw ConfigError("convergence.seeds must be positive");
  if (c.batch_size < 1 || c.batch_size > c.n) throw ConfigError("convergence.batch_size must lie in [1, n]");
  if (c.gamma && !(*c.gamma > 0)) throw ConfigError("convergence.gamma must be positive");
  if (!(c.gamma_times_L > 0)) throw ConfigError("convergence.gamma_times_L must be positive");
}

RunConfig config_from_json(const json& j) {
  check_keys(j, "config",
             {"network", "split_points", "modules", "optimizer", "mode", "dataset", "batch_size", "iterations",
              "epochs", "seed", "precision", "output_dir", "eval_every", "sampling", "log_timings", "convergence"});
  RunConfig c;
  if (j.contains("network")) {
    const auto& n = j.at("network");
    check_keys(n, "network", {"layers", "init"});
    if (n.contains("layers"))
      for (const auto& l : n.at("layers")) c.layers.push_back(layer_from_json(l));
    read(n, "init", c.init);
  }
  read(j, "split_points", c.split_points);
  read(j, "modules", c.modules);
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    check_keys(o, "optimizer",
               {"kind", "schedule", "lr", "momentum", "weight_decay", "beta1", "beta2", "epsilon"});
    auto& s = c.optimizer;
    read(o, "kind", s.kind);
    if (s.kind == "adam" && !o.contains("lr")) s.lr = 1e-3;
    read(o, "schedule", s.schedule);
    read(o, "lr", s.lr);
    read(o, "momentum", s.momentum);
    read(o, "weight_decay", s.weight_decay);
    read(o, "beta1", s.beta1);
    read(o, "beta2", s.beta2);
    read(o, "epsilon", s.epsilon);
  }
  read(j, "mode", c.mode);
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    check_keys(d, "dataset",
               {"kind", "classes", "dim", "separation", "n_train", "n_test", "seed", "train_images",
                "train_labels", "test_images", "test_labels", "train_csv", "test_csv"});
    auto& s = c.dataset;
    read(d, "kind", s.kind);
    read(d, "classes", s.classes);
    read(d, "dim", s.dim);
    read(d, "separation", s.separation);
    read(d, "n_train", s.n_train);
    read(d, "n_test", s.n_test);
    read(d, "seed", s.seed);
    read(d, "train_images", s.train_images);
    read(d, "train_labels", s.train_labels);
    read(d, "test_images", s.test_images);
    read(d, "test_labels", s.test_labels);
    read(d, "train_csv", s.train_csv);
    read(d, "test_csv", s.test_csv);
  }
  read(j, "batch_size", c.batch_size);
  read(j, "iterations", c.iterations);
  read(j, "epochs", c.epochs);
  read(j, "seed", c.seed);
  read(j, "precision", c.precision);
  read(j, "output_dir", c.output_dir);
  read(j, "eval_every", c.eval_every);
  read(j, "sampling", c.sampling);
  read(j, "log_timings", c.log_timings);
  if (j.contains("convergence")) {
    const auto& v = j.at("convergence");
    check_keys(v, "convergence",
               {"objective", "n", "dim", "separation", "lambda", "noise", "eigenvalues", "modules", "gamma",
                "gamma_times_L", "iterations", "batch_size", "seeds", "reference_iterations"});
    auto& s = c.convergence;
    read(v, "objective", s.objective);
    read(v, "n", s.n);
    read(v, "dim", s.dim);
    read(v, "separation", s.separation);
    read(v, "lambda", s.lambda);
    read(v, "noise", s.noise);
    read(v, "eigenvalues", s.eigenvalues);
    read(v, "modules", s.modules);
    read(v, "gamma", s.gamma);
    read(v, "gamma_times_L", s.gamma_times_L);
    read(v, "iterations", s.iterations);
    read(v, "batch_size", s.batch_size);
    read(v, "seeds", s.seeds);
    read(v, "reference_iterations", s.reference_iterations);
  }
  return c;
}

json config_to_json(const RunConfig& c) {
  json layers = json::array();
  for (const auto& l : c.layers) layers.push_back(layer_to_json(l));
  json j;
  j["network"] = {{"layers", layers}, {"init", c.init}};
  j["split_points"] = c.split_points;
  if (c.modules) j["modules"] = *c.modules;
  const auto& o = c.optimizer;
  j["optimizer"] = {{"kind", o.kind},         {"schedule", o.schedule},
                    {"lr", o.lr},             {"momentum", o.momentum},
                    {"weight_decay", o.weight_decay}, {"beta1", o.beta1},
                    {"beta2", o.beta2},       {"epsilon", o.epsilon}};
  j["mode"] = c.mode;
  const auto& d = c.dataset;
  j["dataset"] = {{"kind", d.kind}, {"classes", d.classes}, {"dim", d.dim}, {"separation", d.separation},
                  {"n_train", d.n_train}, {"n_test", d.n_test}};
  if (d.seed) j["dataset"]["seed"] = *d.seed;
  for (auto [k, v] : {std::pair{"train_images", &d.train_images}, {"train_labels", &d.train_labels},
                      {"test_images", &d.test_images}, {"test_labels", &d.test_labels},
                      {"train_csv", &d.train_csv}, {"test_csv", &d.test_csv}})
    if (!v->empty()) j["dataset"][k] = *v;
  j["batch_size"] = c.batch_size;
  if (c.iterations) j["iterations"] = *c.iterations;
  if (c.epochs) j["epochs"] = *c.epochs;
  j["seed"] = c.seed;
  j["precision"] = c.precision;
  j["output_dir"] = c.output_dir;
  j["eval_every"] = c.eval_every;
  j["sampling"] = c.sampling;
  j["log_timings"] = c.log_timings;
  const auto& v = c.convergence;
  j["convergence"] = {{"objective", v.objective}, {"n", v.n}, {"dim", v.dim}, {"separation", v.separation},
                      {"lambda", v.lambda}, {"noise", v.noise}, {"eigenvalues", v.eigenvalues},
                      {"modules", v.modules}, {"gamma_times_L", v.gamma_times_L}, {"iterations", v.iterations},
                      {"batch_size", v.batch_size}, {"seeds", v.seeds},
                      {"reference_iterations", v.reference_iterations}};
  if (v.gamma) j["convergence"]["gamma"] = *v.gamma;
  return j;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

DatasetSplits load_datasets(const RunConfig& c) {
  DatasetSplits s;
  const auto net = c.network();
  const std::size_t classes = net.head().kind == LayerKind::softmax_cross_entropy ? net.head().in_dim : 0;
  if (c.dataset.kind == "blobs") {
    s = synth_blobs_splits({c.dataset.classes, c.dataset.dim, c.dataset.separation}, c.dataset_seed(),
                           c.dataset.n_train, c.dataset.n_test);
  } else if (c.dataset.kind == "idx") {
    s.train = load_idx(c.dataset.train_images, c.dataset.train_labels, classes);
    if (!c.dataset.test_images.empty()) s.test = load_idx(c.dataset.test_images, c.dataset.test_labels, classes);
  } else {
    s.train = load_csv(c.dataset.train_csv, classes);
    if (!c.dataset.test_csv.empty()) s.test = load_csv(c.dataset.test_csv, classes);
  }
  s.train.split = "train";
  s.test.split = "test";
  s.train.validate();
  if (s.train.feature_dim() != net.input_dim()) {
    throw ConfigError("training data has " + std::to_string(s.train.feature_dim()) +
                      " features, network expects " + std::to_string(net.input_dim()));
  }
  if (s.test.size() > 0) s.test.validate();
  if (c.batch_size > s.train.size()) throw ConfigError("batch_size exceeds the training set size");
  return s;
}

}  // namespace ddg
