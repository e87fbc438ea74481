#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ddg/commands.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> iterations;
  std::optional<std::int64_t> epochs;
  std::optional<std::string> mode;
  std::optional<double> lr;
  std::optional<std::size_t> batch_size;
  std::optional<std::vector<std::size_t>> split_points;
  std::optional<std::size_t> modules;
  std::optional<std::string> output_dir;
  std::optional<std::string> precision;
  std::optional<std::string> optimizer;
  std::optional<std::string> schedule;
  std::optional<double> momentum;
  std::optional<double> weight_decay;
  bool log_timings = false;

  void attach(CLI::App& app) {
    app.add_option("-c,--config", config, "Run configuration JSON");
    app.add_option("--seed", seed, "Run seed");
    app.add_option("--iterations", iterations, "Iterations T (replaces epochs)");
    app.add_option("--epochs", epochs, "Epochs E (replaces iterations)");
    app.add_option("--mode", mode, "emulated | parallel");
    app.add_option("--lr", lr, "Stepsize gamma / gamma0");
    app.add_option("--batch-size", batch_size, "Mini-batch size");
    app.add_option("--split-points", split_points, "Module boundaries (layer indices)")->delimiter(',');
    app.add_option("--modules", modules, "Module count K, auto-balanced when no split points are set");
    app.add_option("-o,--output-dir", output_dir, "Artifact directory");
    app.add_option("--precision", precision, "f64 | f32 (must match the build)");
    app.add_option("--optimizer", optimizer, "sgd | adam");
    app.add_option("--schedule", schedule, "fixed | diminishing");
    app.add_option("--momentum", momentum, "SGD momentum");
    app.add_option("--weight-decay", weight_decay, "SGD weight decay");
    app.add_flag("--log-timings", log_timings, "Record wall-clock timings in metrics");
  }

  ddg::RunConfig resolve() const {
    ddg::RunConfig c = config.empty() ? ddg::RunConfig{} : ddg::load_config(config);
    if (seed) c.seed = *seed;
    if (iterations) {
      c.iterations = *iterations;
      c.epochs.reset();
    }
    if (epochs) {
      c.epochs = *epochs;
      c.iterations.reset();
    }
    if (mode) c.mode = *mode;
    if (lr) c.optimizer.lr = *lr;
    if (batch_size) c.batch_size = *batch_size;
    if (split_points) c.split_points = *split_points;
    if (modules) {
      c.modules = *modules;
      c.convergence.modules = *modules;
      if (!split_points) c.split_points.clear();
    }
    if (output_dir) c.output_dir = *output_dir;
    if (precision) c.precision = *precision;
    if (optimizer) c.optimizer.kind = *optimizer;
    if (schedule) c.optimizer.schedule = *schedule;
    if (momentum) c.optimizer.momentum = *momentum;
    if (weight_decay) c.optimizer.weight_decay = *weight_decay;
    if (log_timings) c.log_timings = true;
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delayed-gradient module-parallel training engine"};
  app.set_version_flag("--version", ddg::version_string());
  app.require_subcommand(1);

  Overrides train_flags, verify_flags, bench_flags;

  auto* train = app.add_subcommand("train", "Train a network and write metrics, weights and a run manifest");
  train_flags.attach(*train);

  auto* verify = app.add_subcommand("verify", "Run a pass/fail oracle and write a JSON report");
  std::string which;
  verify->add_option("check", which, "gradients | staleness | theorem1 | theorem2")
      ->required()
      ->check(CLI::IsMember({"gradients", "staleness", "theorem1", "theorem2"}));
  verify_flags.attach(*verify);

  auto* bench = app.add_subcommand("bench", "Time the pipeline against the T_F + T_B/K model");
  ddg::BenchOptions bench_options;
  bench->add_option("-k,--k", bench_options.modules, "Module counts to time")->delimiter(',');
  bench->add_option("--bench-iterations", bench_options.iterations, "Timed iterations per repeat");
  bench->add_option("--repeats", bench_options.repeats, "Repeats; medians are reported");
  bench->add_option("--width", bench_options.width, "Hidden width of the default network");
  bench->add_option("--depth", bench_options.depth, "Hidden blocks of the default network");
  bench_flags.attach(*bench);

  auto* plot = app.add_subcommand("emit-plotdata", "Derive loss/accuracy series from a metrics CSV");
  std::string metrics_path, plot_dir = "plotdata";
  plot->add_option("metrics", metrics_path, "metrics.csv from a training run")->required();
  plot->add_option("-o,--output-dir", plot_dir, "Directory for the series CSVs");

  CLI11_PARSE(app, argc, argv);

  return ddg::run_guarded(
      [&] {
        if (*train) return ddg::cmd_train(train_flags.resolve(), std::cout);
        if (*verify) return ddg::cmd_verify(verify_flags.resolve(), which, std::cout);
        if (*bench) return ddg::cmd_bench(bench_flags.resolve(), bench_options, std::cout);
        return ddg::cmd_emit_plotdata(metrics_path, plot_dir, std::cout);
      },
      std::cerr);
}
