#include "ddg/verify.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>

#include "ddg/error.hpp"

namespace ddg {

double fd_relative_error(const std::vector<double>& a, const std::vector<double>& n) {
  double diff = 0, na = 0, nn = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn += n[i] * n[i];
  }
  const double denom = std::sqrt(std::max(na, nn));
  return denom == 0 ? 0.0 : std::sqrt(diff) / denom;
}

bool GradCheckReport::passed() const {
  return !entries.empty() && std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

namespace {

std::vector<double> as_vector(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

std::vector<double> numeric_gradient(Tensor& param, const std::function<double()>& f, double step) {
  std::vector<double> g(param.size());
  for (std::size_t i = 0; i < param.size(); ++i) {
    const Scalar saved = param[i];
    param[i] = saved + Scalar(step);
    const double up = f();
    param[i] = saved - Scalar(step);
    const double down = f();
    param[i] = saved;
    g[i] = (up - down) / (2 * step);
  }
  return g;
}

Tensor away_from_zero(Tensor t) {
  for (auto& v : t.data()) v = v >= 0 ? v + Scalar(0.1) : v - Scalar(0.1);
  return t;
}

Tensor class_targets(RandomSource& src, std::size_t batch, std::size_t classes) {
  Tensor y({batch});
  for (std::size_t i = 0; i < batch; ++i) y[i] = Scalar(src.below(classes));
  return y;
}

double weighted_sum(const Tensor& a, const Tensor& r) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += double(a[i]) * double(r[i]);
  return s;
}

struct Checker {
  GradCheckReport& report;
  double step;

  void add(const std::string& name, const std::vector<double>& analytic, const std::vector<double>& numeric) {
    const double e = fd_relative_error(analytic, numeric);
    report.entries.push_back({name, e, e < report.tolerance});
  }

  // Hidden layer: f = <r, layer(x)>.
  void hidden(const std::string& name, const LayerSpec& spec, LayerState state, Tensor x, RandomSource& src) {
    const auto fw = forward(spec, state, x);
    const Tensor r = draw(src, Distribution::uniform(-1, 1), fw.output.shape());
    auto f = [&] { return weighted_sum(forward(spec, state, x).output, r); };
    add(name + ".input", as_vector(backward_input(spec, state, fw.tape, r)), numeric_gradient(x, f, step));
    if (spec.has_parameters()) {
      const auto g = backward_weights(spec, state, fw.tape, r);
      add(name + ".weights", as_vector(g.weights), numeric_gradient(state.weights, f, step));
      add(name + ".bias", as_vector(g.bias), numeric_gradient(state.bias, f, step));
    }
  }

  // Head: f = batch-mean loss.
  void head(const std::string& name, const LayerSpec& spec, Tensor x, const Tensor& y) {
    const LayerState none;
    auto f = [&] { return loss_and_prediction(spec, x, y).loss; };
    const auto fw = forward(spec, none, x);
    add(name + ".loss", as_vector(head_loss_gradient(spec, fw.tape, y)), numeric_gradient(x, f, step));
  }

  void stack(const std::string& name, const NetworkSpec& spec, NetworkState state, const Tensor& x,
             const Tensor& y) {
    const auto bp = backprop(spec, state, x, y);
    auto f = [&] { return evaluate(spec, state, x, y).loss; };
    std::vector<double> analytic, numeric;
    for (std::size_t l = 0; l < spec.size(); ++l) {
      if (!spec.layers[l].has_parameters()) continue;
      auto a = as_vector(bp.gradients[l].weights);
      auto n = numeric_gradient(state.layers[l].weights, f, step);
      analytic.insert(analytic.end(), a.begin(), a.end());
      numeric.insert(numeric.end(), n.begin(), n.end());
      a = as_vector(bp.gradients[l].bias);
      n = numeric_gradient(state.layers[l].bias, f, step);
      analytic.insert(analytic.end(), a.begin(), a.end());
      numeric.insert(numeric.end(), n.begin(), n.end());
    }
    add(name, analytic, numeric);
  }
};

}  // namespace

GradCheckReport check_gradients(std::uint64_t seed, double step, double tolerance) {
  GradCheckReport report;
  report.step = step;
  report.tolerance = tolerance;
  Checker c{report, step};
  RandomSource src(seed);
  const std::size_t B = 4;
  auto input = [&](std::size_t d) { return draw(src, Distribution::uniform(-1, 1), {B, d}); };

  {
    const auto spec = LayerSpec::affine(5, 3);
    LayerState s{draw(src, Distribution::gaussian(0, 0.5), {5, 3}), draw(src, Distribution::gaussian(0, 0.5), {3})};
    c.hidden("affine", spec, s, input(5), src);
  }
  c.hidden("relu", LayerSpec::relu(), {}, away_from_zero(input(6)), src);
  c.hidden("tanh", LayerSpec::tanh(), {}, input(6), src);
  c.hidden("softmax", LayerSpec::softmax_cross_entropy(4), {}, input(4), src);
  c.hidden("mse", LayerSpec::mse(), {}, input(3), src);
  c.head("softmax_ce", LayerSpec::softmax_cross_entropy(4), scale(input(4), Scalar(2)), class_targets(src, B, 4));
  c.head("mse", LayerSpec::mse(), input(3), input(3));

  const NetworkSpec cls{{LayerSpec::affine(5, 8), LayerSpec::tanh(), LayerSpec::affine(8, 6), LayerSpec::relu(),
                         LayerSpec::affine(6, 4), LayerSpec::softmax_cross_entropy(4)}};
  RandomSource init_src(mix_seed(seed, 7));
  NetworkState cls_state = init_network(cls, init_src, InitScheme::xavier_uniform);
  for (auto& l : cls_state.layers)
    if (!l.bias.empty()) l.bias = draw(src, Distribution::uniform(-0.2, 0.2), l.bias.shape());
  c.stack("stack.softmax_ce", cls, cls_state, input(5), class_targets(src, B, 4));

  const NetworkSpec reg{{LayerSpec::affine(3, 5), LayerSpec::tanh(), LayerSpec::affine(5, 2), LayerSpec::mse()}};
  c.stack("stack.mse", reg, init_network(reg, init_src, InitScheme::xavier_uniform), input(3), input(2));
  return report;
}

namespace {

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return std::numeric_limits<double>::infinity();
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(double(a[i]) - double(b[i]));
    if (!(d <= m)) m = d;  // NaN propagates
  }
  return m;
}

}  // namespace

StalenessReport check_staleness(const NetworkSpec& spec, const NetworkState& initial, const Partition& partition,
                                const OptimizerConfig& optimizer, const Dataset& train, const BatchSampler& sampler,
                                std::int64_t T, ExecutionMode mode, double tolerance) {
  const std::size_t K = partition.num_modules();
  StalenessReport report;
  report.K = K;
  report.T = T;
  report.mode = mode;
  report.tolerance = tolerance;

  auto executor = make_executor(mode, spec, initial, partition, optimizer, {.record_gradients = true});
  std::deque<NetworkState> snapshots;  // w^{t-K+1} .. w^t
  std::deque<Batch> batches;

  auto offend = [&](std::int64_t t, std::size_t k, double d) {
    ++report.mismatches;
    if (!report.first) report.first = StalenessOffense{t, k, d};
  };

  for (std::int64_t t = 0; t < T; ++t) {
    snapshots.push_back(executor->gather_weights());
    batches.push_back(next_batch(sampler, train, t));
    if (snapshots.size() > K) {
      snapshots.pop_front();
      batches.pop_front();
    }
    const IterationRecord rec = executor->run_iteration(batches.back(), t);
    const auto& applied = *rec.applied;

    for (std::size_t k = 1; k <= K; ++k) {
      const auto& got = applied[k - 1];
      const LayerRange range = partition.range(k);
      double diff = 0;
      if (is_warmup(t, k, K)) {
        ++report.warmup;
        for (const auto& g : got) {
          diff = std::max({diff, max_abs_diff(g.weights, Tensor::zeros_like(g.weights)),
                           max_abs_diff(g.bias, Tensor::zeros_like(g.bias))});
        }
        if (diff != 0) offend(t, k, diff);
        continue;
      }
      ++report.checked;
      const std::int64_t s = source_iteration(t, k, K);
      const std::size_t slot = std::size_t(s - (t - std::int64_t(snapshots.size()) + 1));
      const Batch& b = batches[slot];
      const auto bp = backprop(spec, snapshots[slot], b.features, b.targets);
      for (std::size_t l = range.first; l <= range.last; ++l) {
        const auto& want = bp.gradients[l - 1];
        const auto& have = got[l - range.first];
        diff = std::max({diff, max_abs_diff(want.weights, have.weights), max_abs_diff(want.bias, have.bias)});
      }
      report.max_abs_diff = std::max(report.max_abs_diff, diff);
      if (!(diff <= tolerance)) offend(t, k, diff);
    }
  }
  return report;
}

std::unique_ptr<AnalyticObjective> make_objective(const ConvergenceSettings& s, std::uint64_t seed) {
  if (s.objective == "logistic") {
    const Dataset data = synth_blobs({2, s.dim, s.separation}, seed, s.n);
    return std::make_unique<LogisticObjective>(data, s.lambda);
  }
  if (s.objective == "quadratic") {
    Tensor A({s.dim, s.dim});
    for (std::size_t i = 0; i < s.dim; ++i) {
      A.at(i, i) = Scalar(s.eigenvalues.empty() ? double(i + 1) : s.eigenvalues.at(i));
    }
    if (!s.eigenvalues.empty() && s.eigenvalues.size() != s.dim) {
      throw ConfigError("convergence.eigenvalues must have dim entries");
    }
    const Dataset noise = synth_quadratic_stream(s.dim, s.noise, seed, s.n);
    return std::make_unique<QuadraticObjective>(A, noise.features);
  }
  throw ConfigError("unknown convergence objective '" + s.objective + "'");
}

std::vector<TheoremSummary> run_theorem(int theorem, const ConvergenceSettings& s,
                                        std::span<const std::size_t> modules, std::uint64_t base_seed) {
  if (theorem != 1 && theorem != 2) throw ConfigError("theorem must be 1 or 2");
  std::vector<TheoremSummary> out;
  for (std::size_t K : modules) out.push_back({theorem, K, {}, 0, 0});

  for (std::size_t r = 0; r < s.seeds; ++r) {
    const std::uint64_t seed = mix_seed(base_seed, r);
    const auto objective = make_objective(s, seed);
    const double L = objective->lipschitz();
    const double gamma = s.gamma ? *s.gamma : s.gamma_times_L / L;
    if (gamma * L > 1.0) {
      throw ConfigError("stepsize precondition violated: gamma * L = " + std::to_string(gamma * L) + " > 1");
    }
    const Vector w0(objective->dim(), 0.0);
    const double f_star =
        objective->has_known_minimum() ? 0.0 : reference_minimum(*objective, w0, s.reference_iterations);

    for (auto& summary : out) {
      DelayedSgdConfig cfg;
      cfg.modules = summary.K;
      cfg.schedule = theorem == 1 ? StepsizeSchedule::fixed(gamma) : StepsizeSchedule::diminishing(gamma);
      cfg.iterations = s.iterations;
      cfg.batch_size = s.batch_size;
      cfg.seed = mix_seed(seed, summary.K);
      const Trajectory traj = run_delayed_sgd(*objective, w0, cfg);
      // f* can be no larger than any value the run itself reached.
      const double f_low = std::min(f_star, *std::min_element(traj.values.begin(), traj.values.end()));
      const BoundParams params = estimate_constants(*objective, traj, f_low);
      TheoremSeedResult res;
      res.seed = seed;
      res.report = theorem == 1 ? check_theorem1(traj, params) : check_theorem2(traj, params);
      const auto ms = min_so_far(traj.grad_sq);
      const std::size_t early = std::min<std::size_t>(10, ms.size() - 1);
      res.min_ratio = ms[early] > 0 ? ms.back() / ms[early] : 0.0;
      summary.satisfied += res.report.satisfied;
      summary.min_ratio_below_1pct += res.min_ratio < 0.01;
      summary.runs.push_back(std::move(res));
    }
  }
  return out;
}

}  // namespace ddg
