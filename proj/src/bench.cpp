#include "ddg/bench.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "ddg/data.hpp"
#include "ddg/error.hpp"
#include "ddg/partition.hpp"
#include "ddg/pipeline.hpp"

namespace ddg {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Timed {
  std::vector<double> wall, forward, backward;
};

Timed time_run(PipelineExecutor& exec, const BenchConfig& c, const Dataset& data) {
  const BatchSampler sampler(c.seed, c.batch_size, data.size(), SamplingMode::shuffle);
  Timed out;
  for (std::int64_t t = 0; t < c.warmup + c.iterations; ++t) {
    const auto rec = exec.run_iteration(next_batch(sampler, data, t), t);
    if (t < c.warmup) continue;
    out.wall.push_back(rec.wall_ms);
    out.forward.push_back(rec.forward_ms);
    out.backward.push_back(rec.backward_ms);
  }
  return out;
}

}  // namespace

const BenchEntry* BenchReport::find(std::size_t K) const {
  for (const auto& e : entries)
    if (e.K == K) return &e;
  return nullptr;
}

NetworkSpec heavy_network(std::size_t width, std::size_t depth, std::size_t classes) {
  NetworkSpec spec;
  for (std::size_t i = 0; i < depth; ++i) {
    spec.layers.push_back(LayerSpec::affine(width, width));
    spec.layers.push_back(LayerSpec::relu());
  }
  spec.layers.push_back(LayerSpec::affine(width, classes));
  spec.layers.push_back(LayerSpec::softmax_cross_entropy(classes));
  return spec;
}

unsigned physical_core_count() {
  std::ifstream in("/proc/cpuinfo");
  std::set<std::pair<std::string, std::string>> cores;
  std::string line, physical = "0";
  while (std::getline(in, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    const std::string key = line.substr(0, line.find_last_not_of(" \t", colon - 1) + 1);
    const std::string value = line.substr(colon + 1 + (colon + 1 < line.size()));
    if (key == "physical id") physical = value;
    if (key == "core id") cores.emplace(physical, value);
  }
  if (!cores.empty()) return unsigned(cores.size());
  return std::max(1u, std::thread::hardware_concurrency());
}

BenchReport run_bench(const BenchConfig& c) {
  c.network.validate();
  if (c.iterations < 1 || c.repeats < 1) throw ConfigError("bench needs at least one iteration and repeat");
  for (std::size_t K : c.modules)
    if (K < 1 || K > c.network.size()) throw ConfigError("bench: K must lie in [1, layer count]");

  const std::size_t classes = c.network.head().in_dim;
  const Dataset data = synth_blobs({classes, c.network.input_dim(), 3.0}, c.seed,
                                   std::max<std::size_t>(c.batch_size * 4, 512));
  RandomSource src(mix_seed(c.seed, 1));
  const NetworkState init = init_network(c.network, src, InitScheme::he_gaussian);

  BenchReport report;
  report.logical_cores = std::max(1u, std::thread::hardware_concurrency());
  report.physical_cores = physical_core_count();

  std::vector<double> tf, tb;
  for (std::size_t r = 0; r < c.repeats; ++r) {
    EmulatedExecutor exec(c.network, init, make_partition(c.network.size(), {}), c.optimizer);
    const Timed t = time_run(exec, c, data);
    tf.push_back(median(t.forward));
    tb.push_back(median(t.backward));
  }
  report.forward_ms = median(tf);
  report.backward_ms = median(tb);
  const double total = report.forward_ms + report.backward_ms;
  report.forward_share = total > 0 ? report.forward_ms / total : 0.0;

  for (std::size_t K : c.modules) {
    BenchEntry e;
    e.K = K;
    const Partition p = balance_by_parameters(c.network, K);
    e.split_points = p.split_points();
    std::vector<double> walls;
    for (std::size_t r = 0; r < c.repeats; ++r) {
      ParallelExecutor exec(c.network, init, p, c.optimizer);
      walls.push_back(median(time_run(exec, c, data).wall));
    }
    e.measured_ms = median(walls);
    e.model_ms = report.forward_ms + report.backward_ms / double(K);
    e.speedup = e.measured_ms > 0 ? total / e.measured_ms : 0.0;
    if (report.physical_cores < K) {
      e.warning = "only " + std::to_string(report.physical_cores) + " physical core(s) for " + std::to_string(K) +
                  " modules; timings are not representative";
    }
    report.entries.push_back(std::move(e));
  }
  return report;
}

nlohmann::json bench_to_json(const BenchReport& r) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : r.entries) {
    nlohmann::json j = {{"K", e.K},
                        {"measured_ms", e.measured_ms},
                        {"model_ms", e.model_ms},
                        {"speedup", e.speedup},
                        {"split_points", e.split_points}};
    if (!e.warning.empty()) j["warning"] = e.warning;
    entries.push_back(std::move(j));
  }
  return {{"T_F_ms", r.forward_ms},          {"T_B_ms", r.backward_ms},
          {"forward_share", r.forward_share}, {"logical_cores", r.logical_cores},
          {"physical_cores", r.physical_cores}, {"entries", entries}};
}

std::string format_bench(const BenchReport& r) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "T_F %.3f ms  T_B %.3f ms  forward share %.1f%%  cores %u physical / %u logical\n",
                r.forward_ms, r.backward_ms, 100.0 * r.forward_share, r.physical_cores, r.logical_cores);
  out << buf;
  out << "   K   measured_ms   model_ms   speedup\n";
  for (const auto& e : r.entries) {
    std::snprintf(buf, sizeof buf, "%4zu %13.3f %10.3f %9.3f\n", e.K, e.measured_ms, e.model_ms, e.speedup);
    out << buf;
    if (!e.warning.empty()) out << "     warning: " << e.warning << "\n";
  }
  return out.str();
}

}  // namespace ddg
