#include "ddg/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>

#include "ddg/bench.hpp"
#include "ddg/error.hpp"
#include "ddg/trainer.hpp"
#include "ddg/verify.hpp"
#include "ddg/weights_io.hpp"

#ifndef DDG_VERSION_STRING
#define DDG_VERSION_STRING "ddg-0.1.0+unknown"
#endif

namespace ddg {

using nlohmann::json;

namespace {

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

std::filesystem::path prepare_output(const RunConfig& c) {
  std::filesystem::path dir(c.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

const char* mode_name(ExecutionMode m) { return m == ExecutionMode::parallel ? "parallel" : "emulated"; }

}  // namespace

const char* version_string() { return DDG_VERSION_STRING; }

int run_guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const DivergenceError& e) {
    err << "error [divergence]: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const ConfigError& e) {
    err << "error [config]: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "error [io]: " << e.what() << '\n';
    return kExitIo;
  } catch (const ParseError& e) {
    err << "error [io]: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    err << "error [" << e.category() << "]: " << e.what() << '\n';
    return kExitOther;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitOther;
  }
}

int cmd_train(const RunConfig& config, std::ostream& out) {
  config.validate();
  const auto dir = prepare_output(config);
  const DatasetSplits data = load_datasets(config);

  json manifest;
  manifest["version"] = version_string();
  manifest["seed"] = config.seed;
  manifest["config"] = config_to_json(config);
  manifest["split_points"] = config.partition().split_points();
  manifest["iterations"] = config.total_iterations(data.train.size());
  manifest["dataset"] = {{"train_size", data.train.size()},
                         {"test_size", data.test.size()},
                         {"feature_dim", data.train.feature_dim()},
                         {"normalization", data.train.normalization}};
  write_json(dir / "manifest.json", manifest);

  MetricsWriter sink(dir / "metrics.csv");
  const TrainResult result = train(config, data, &sink);
  write_weights(dir / "weights.bin", result.final_state);

  out << "trained " << result.iterations << " iterations with K=" << config.partition().num_modules() << " ("
      << mode_name(config.execution_mode()) << ")";
  if (!result.rows.empty()) out << ", final train loss " << result.rows.back().train_loss;
  if (std::isfinite(result.test_top1)) out << ", test top-1 " << result.test_top1 << "%";
  out << "\nartifacts in " << dir.string() << '\n';
  return kExitOk;
}

int cmd_verify(const RunConfig& config, const std::string& which, std::ostream& out) {
  json report = {{"check", which}, {"version", version_string()}, {"seed", config.seed}};
  bool passed = false;

  if (which == "gradients") {
    const auto r = check_gradients(config.seed);
    json entries = json::array();
    for (const auto& e : r.entries) entries.push_back({{"name", e.name}, {"rel_error", e.rel_error}, {"pass", e.passed}});
    report["step"] = r.step;
    report["tolerance"] = r.tolerance;
    report["entries"] = entries;
    passed = r.passed();
  } else if (which == "staleness") {
    config.validate();
    const DatasetSplits data = load_datasets(config);
    const auto mode = config.execution_mode();
    const double tol = mode == ExecutionMode::parallel ? 1e-12 : 0.0;
    const BatchSampler sampler(mix_seed(config.seed, 2), config.batch_size, data.train.size(), config.sampling_mode());
    const auto r = check_staleness(config.network(), initial_state(config), config.partition(),
                                   config.optimizer.build(), data.train, sampler,
                                   config.total_iterations(data.train.size()), mode, tol);
    report.update({{"K", r.K}, {"T", r.T}, {"mode", mode_name(r.mode)}, {"tolerance", r.tolerance},
                   {"checked", r.checked}, {"warmup_checked", r.warmup}, {"mismatches", r.mismatches},
                   {"max_abs_diff", r.max_abs_diff}});
    if (r.first) report["first_offense"] = {{"t", r.first->t}, {"k", r.first->k}, {"max_abs_diff", r.first->max_abs_diff}};
    passed = r.passed();
  } else if (which == "theorem1" || which == "theorem2") {
    config.validate_convergence();
    const int theorem = which == "theorem1" ? 1 : 2;
    const std::vector<std::size_t> modules = {config.convergence.modules};
    const auto summaries = run_theorem(theorem, config.convergence, modules, config.seed);
    const auto& s = summaries.front();
    json runs = json::array();
    for (const auto& run : s.runs) {
      const auto& p = run.report.params;
      runs.push_back({{"seed", run.seed},
                      {"T", run.report.T},
                      {"measured", run.report.measured},
                      {"bound", run.report.bound_value},
                      {"satisfied", run.report.satisfied},
                      {"min_grad_sq_ratio", run.min_ratio},
                      {"params",
                       {{"L", p.L}, {"M", p.M}, {"M_analytic", p.M_analytic}, {"K", p.K}, {"sigma", p.sigma},
                        {"sigma_measured", p.sigma_measured}, {"M_K", p.M_K}, {"f0", p.f0}, {"f_star", p.f_star},
                        {"gamma", p.gamma}}}});
    }
    report["K"] = s.K;
    report["runs"] = runs;
    report["satisfied"] = s.satisfied;
    report["seeds"] = s.runs.size();
    report["required"] = "at least 19 of every 20 seeds";
    passed = s.satisfied * 20 >= s.runs.size() * 19;
  } else {
    throw ConfigError("verify: unknown check '" + which + "' (gradients | staleness | theorem1 | theorem2)");
  }

  report["pass"] = passed;
  const auto dir = prepare_output(config);
  write_json(dir / ("verify_" + which + ".json"), report);
  out << report.dump(2) << '\n';
  return passed ? kExitOk : kExitVerifyFailed;
}

int cmd_bench(const RunConfig& config, const BenchOptions& options, std::ostream& out) {
  BenchConfig b;
  b.network = config.layers.empty() ? heavy_network(options.width, options.depth, 10) : config.network();
  b.batch_size = config.batch_size;
  b.modules = options.modules;
  b.iterations = options.iterations;
  b.repeats = options.repeats;
  b.seed = config.seed;
  b.optimizer = config.optimizer.build();
  const BenchReport r = run_bench(b);
  json j = bench_to_json(r);
  j["version"] = version_string();
  j["batch_size"] = b.batch_size;
  j["iterations"] = b.iterations;
  j["repeats"] = b.repeats;
  const auto dir = prepare_output(config);
  write_json(dir / "bench.json", j);
  out << format_bench(r);
  return kExitOk;
}

int cmd_emit_plotdata(const std::filesystem::path& metrics, const std::filesystem::path& output_dir,
                      std::ostream& out) {
  const auto rows = read_metrics(metrics);
  std::error_code ec;
  std::filesystem::create_directories(output_dir, ec);
  if (ec) throw IoError("cannot create " + output_dir.string());

  struct EpochStats {
    double loss_sum = 0;
    std::size_t n = 0;
    double test_loss = std::numeric_limits<double>::quiet_NaN();
    double test_top1 = std::numeric_limits<double>::quiet_NaN();
  };
  std::map<std::int64_t, EpochStats> epochs;
  for (const auto& r : rows) {
    auto& e = epochs[r.epoch];
    e.loss_sum += r.train_loss;
    ++e.n;
    if (r.has_evaluation()) {
      e.test_loss = r.test_loss;
      e.test_top1 = r.test_top1;
    }
  }
  auto cell = [](double v) {
    if (std::isnan(v)) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };

  std::ofstream by_epoch(output_dir / "loss_vs_epoch.csv");
  by_epoch << "epoch,mean_train_loss,test_loss,test_top1\n";
  for (const auto& [epoch, e] : epochs) {
    by_epoch << epoch << ',' << cell(e.loss_sum / double(e.n)) << ',' << cell(e.test_loss) << ','
             << cell(e.test_top1) << '\n';
  }
  std::ofstream by_time(output_dir / "loss_vs_time.csv");
  by_time << "t,elapsed_ms,train_loss,test_loss\n";
  double elapsed = 0;
  for (const auto& r : rows) {
    elapsed += r.wall_ms_forward + r.wall_ms_backward;
    by_time << r.t << ',' << cell(elapsed) << ',' << cell(r.train_loss) << ',' << cell(r.test_loss) << '\n';
  }
  if (!by_epoch || !by_time) throw IoError("cannot write plot data into " + output_dir.string());
  out << "wrote " << epochs.size() << " epoch rows and " << rows.size() << " time rows to " << output_dir.string()
      << '\n';
  return kExitOk;
}

}  // namespace ddg
