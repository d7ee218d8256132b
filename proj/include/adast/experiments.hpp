#pragma once

// Experiment orchestration: build problem + topology from a RunConfig, run
// every configured algorithm (in parallel, each on its own RunState), and
// persist traces, the manifest and a gnuplot script.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "adast/algorithms.hpp"
#include "adast/config.hpp"
#include "adast/metrics.hpp"
#include "adast/problems.hpp"
#include "adast/serialization.hpp"
#include "adast/topology.hpp"
#include "adast/trace_io.hpp"

#ifndef ADAST_VERSION
#define ADAST_VERSION "0.1.0"
#endif

namespace adast {

inline constexpr const char* kVersion = ADAST_VERSION;

/// ADAST_THREADS caps the worker count; unset or 0 means hardware concurrency.
inline std::size_t worker_threads() {
  std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const char* env = std::getenv("ADAST_THREADS");
  if (!env || !*env) return hw;
  KeyValues tmp{{"ADAST_THREADS", env}};
  const auto v = detail::get_uint(tmp, "ADAST_THREADS");
  return v == 0 ? hw : static_cast<std::size_t>(v);
}

/// Runs fn(0..count-1) on up to `threads` workers. The first exception (by
/// index) is rethrown after all workers finish.
template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(count);
  auto body = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < count;) body(i);
      });
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline QuadraticMinimaxProblem build_problem(const RunConfig& rc) {
  switch (rc.experiment) {
    case Experiment::CaseStudy: return make_two_node_case_study();
    case Experiment::Counterexample: {
      const auto& ac = rc.algo_configs.front();
      return make_counterexample(ac.alpha, ac.beta).problem;
    }
    case Experiment::Synthetic: return make_synthetic(rc.topology.n, rc.seed, rc.l_low, rc.l_high);
    case Experiment::Custom: return make_random(rc.topology.n, rc.p, rc.d, rc.seed);
  }
  throw InvalidParameter("unknown experiment");
}

inline Initialization build_initialization(const RunConfig& rc,
                                           const QuadraticMinimaxProblem& problem) {
  double y0 = rc.y0;
  if (rc.experiment == Experiment::Counterexample) {
    const auto& ac = rc.algo_configs.front();
    y0 = make_counterexample(ac.alpha, ac.beta).slope * rc.x0;
  }
  return Initialization::with_offsets(problem.n(), Vector::Constant(problem.p(), rc.x0),
                                      Vector::Constant(problem.d(), y0), rc.init_offset);
}

struct AlgoOutcome {
  AlgoConfig config;
  Trace trace;
  bool aborted = false;
  std::size_t abort_node = 0;
  std::uint64_t abort_iteration = 0;
  std::string message;
};

struct ExperimentResult {
  RunConfig config;
  QuadraticMinimaxProblem problem;
  WeightMatrix weights;
  ValidationReport validation;
  Initialization init;
  std::vector<AlgoOutcome> outcomes;

  bool any_aborted() const {
    return std::any_of(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.aborted; });
  }
};

/// Runs every algorithm of rc. A numeric abort is recorded in the outcome
/// (with its partial trace) instead of propagating. `problem` overrides the
/// generated instance, e.g. when replaying coefficients from a manifest.
inline ExperimentResult run_experiment(const RunConfig& rc,
                                       std::optional<QuadraticMinimaxProblem> problem = {},
                                       std::size_t threads = worker_threads()) {
  if (!problem) problem = build_problem(rc);
  if (problem->n() != rc.topology.n)
    throw InvalidParameter("problem has " + std::to_string(problem->n()) + " nodes, topology " +
                           std::to_string(rc.topology.n));
  auto w = default_weights(rc.topology);
  auto report = validate_doubly_stochastic(w.matrix(), 1e-12);
  auto init = build_initialization(rc, *problem);
  ExperimentResult result{rc, *problem, w, report, init, {}};
  result.outcomes.resize(rc.algo_configs.size());
  const auto& prob = result.problem;
  parallel_for(rc.algo_configs.size(), threads, [&](std::size_t i) {
    auto& out = result.outcomes[i];
    out.config = rc.algo_configs[i];
    RunOptions opts{rc.trace_stride, rc.seed};
    try {
      out.trace = run(prob, w, out.config, rc.noise, init, opts);
    } catch (const NumericAbort& e) {
      out.trace = e.partial_trace();
      out.aborted = true;
      out.abort_node = e.node();
      out.abort_iteration = e.iteration();
      out.message = e.what();
    }
  });
  return result;
}

inline std::string trace_filename(Algorithm a) { return "trace_" + std::string(to_string(a)) + ".csv"; }

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json manifest_json(const ExperimentResult& r) {
  const auto& rc = r.config;
  json config = json::object();
  for (const auto& [k, v] : rc.echo) config[k] = v;
  json runs = json::array();
  for (const auto& o : r.outcomes) {
    json run = {{"algo", std::string(to_string(o.config.algo))},
                {"trace", trace_filename(o.config.algo)},
                {"records", o.trace.records.size()},
                {"status", o.aborted ? "numeric-abort" : "ok"}};
    if (o.aborted)
      run["abort"] = {{"node", o.abort_node}, {"iteration", o.abort_iteration}, {"message", o.message}};
    runs.push_back(std::move(run));
  }
  const auto graph = build_graph(rc.topology);
  const auto& first = rc.algo_configs.front();
  return {{"tool", "adast"},
          {"version", kVersion},
          {"timestamp", utc_timestamp()},
          {"experiment", std::string(to_string(rc.experiment))},
          {"seed", rc.seed},
          {"c0", first.c0},
          {"ordering", std::string(to_string(first.ordering))},
          {"config", std::move(config)},
          {"topology",
           {{"kind", std::string(to_string(rc.topology.kind))},
            {"n", rc.topology.n},
            {"graph", to_json(graph)},
            {"rho_w", number(r.weights.rho_w())},
            {"spectral_norm", number(r.weights.spectral_norm())},
            {"weights", to_json(r.weights.matrix())},
            {"validation", to_json(r.validation)}}},
          {"initialization", {{"x0", to_json(r.init.x0)}, {"y0", to_json(r.init.y0)}}},
          {"problem", to_json(r.problem)},
          {"runs", std::move(runs)}};
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TraceIoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw TraceIoError("write to '" + path.string() + "' failed");
}

}  // namespace detail

/// gnuplot script drawing the trajectory, stationarity, gradient and
/// inconsistency panels from the trace files next to it.
inline std::string gnuplot_script(const ExperimentResult& r) {
  std::ostringstream gp;
  std::string files;
  for (const auto& o : r.outcomes) files += (files.empty() ? "" : " ") + trace_filename(o.config.algo);
  gp << "# gnuplot -p plot.gp  (run from this directory)\n"
     << "set datafile separator ','\n"
     << "set datafile columnheaders\n"
     << "set key top right\n"
     << "files = \"" << files << "\"\n"
     << "set terminal pngcairo size 1400,1000\n"
     << "set output 'panels.png'\n"
     << "set multiplot layout 2,2 title '" << to_string(r.config.experiment) << "'\n";
  gp << "set title 'averaged iterate'\nset xlabel 'xbar_0'\nset ylabel 'ybar_0'\nunset logscale\n";
  if (r.config.experiment == Experiment::CaseStudy)
    gp << "plot for [f in files] f using 'xbar_0':'ybar_0' with lines title f, "
          "(5*x+2)/3 with lines dashtype 2 title '3y = 5x + 2'\n";
  else
    gp << "plot for [f in files] f using 'xbar_0':'ybar_0' with lines title f\n";
  gp << "set logscale y\nset xlabel 'iteration'\n";
  if (r.config.experiment == Experiment::CaseStudy)
    gp << "set title 'distance to the stationary line'\nset ylabel 'distance'\n"
       << "plot for [f in files] f using 'k':(abs(-5*column('xbar_0')+3*column('ybar_0')-2)/sqrt(34)) "
          "with lines title f\n";
  else
    gp << "set title 'stationarity'\nset ylabel '||grad Phi(xbar)||^2'\n"
       << "plot for [f in files] f using 'k':'grad_phi_sq' with lines title f\n";
  gp << "set title 'primal gradient at the average'\nset ylabel '||grad_x f(xbar, ybar)||^2'\n"
     << "plot for [f in files] f using 'k':'grad_xf_sq' with lines title f\n"
     << "set title 'stepsize inconsistency'\nset ylabel 'zeta_v'\n"
     << "plot for [f in files] f using 'k':'zeta_v_inst' with lines title f\n"
     << "unset multiplot\n";
  return gp.str();
}

/// Writes one CSV per algorithm plus manifest.json, problem.json and plot.gp.
inline void write_artifacts(const ExperimentResult& r) {
  namespace fs = std::filesystem;
  const fs::path dir(r.config.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw TraceIoError("cannot create '" + dir.string() + "': " + ec.message());
  for (const auto& o : r.outcomes)
    write_trace((dir / trace_filename(o.config.algo)).string(), o.trace.records, r.problem.p(),
                r.problem.d());
  detail::write_text(dir / "manifest.json", manifest_json(r).dump(2) + "\n");
  detail::write_text(dir / "problem.json", to_json(r.problem).dump(2) + "\n");
  detail::write_text(dir / "plot.gp", gnuplot_script(r));
}

/// Config and problem recorded in a manifest; replaying them reproduces the traces.
struct ManifestReplay {
  KeyValues config;
  QuadraticMinimaxProblem problem;
};

inline ManifestReplay load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read manifest '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("", "manifest '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.contains("config") || !j.contains("problem"))
    throw ConfigError("", "manifest '" + path + "' lacks config or problem");
  KeyValues kv;
  for (const auto& [k, v] : j["config"].items()) kv[k] = v.get<std::string>();
  return {std::move(kv), problem_from_json(j["problem"])};
}

// ---------------------------------------------------------------------------
// Counterexample report

struct CounterexampleReport {
  double alpha = 0.0, beta = 0.0, a = 0.0, b = 0.0, slope = 0.0;
  double x0 = 0.0, y0 = 0.0;
  double gamma_x = 0.0, gamma_y = 0.0, c0 = 0.0;
  std::size_t K_tiada = 0, K_adast = 0;
  double tiada_grad_x0 = 0.0, tiada_grad_y0 = 0.0;
  double tiada_drift_x = 0.0, tiada_drift_y = 0.0;
  double adast_grad_x0 = 0.0, adast_grad_x_final = 0.0;
  double adast_ratio = 0.0;
  std::vector<double> adast_window_means;
  bool adast_monotone = false;
  std::size_t window = 1000;

  json to_json() const {
    return {{"alpha", alpha},
            {"beta", beta},
            {"a", a},
            {"b", b},
            {"slope", slope},
            {"x0", x0},
            {"y0", y0},
            {"gamma_x", gamma_x},
            {"gamma_y", gamma_y},
            {"c0", c0},
            {"d_tiada",
             {{"K", K_tiada},
              {"grad_x_initial", tiada_grad_x0},
              {"grad_y_initial", tiada_grad_y0},
              {"max_rel_drift_grad_x", tiada_drift_x},
              {"max_rel_drift_grad_y", tiada_drift_y}}},
            {"d_adast",
             {{"K", K_adast},
              {"grad_x_initial", adast_grad_x0},
              {"grad_x_final", number(adast_grad_x_final)},
              {"final_over_initial", number(adast_ratio)},
              {"window", window},
              {"distance_window_means", adast_window_means},
              {"distance_monotone", adast_monotone}}}};
  }
};

struct CounterexampleOptions {
  double alpha = 0.75;
  double beta = 0.25;
  double x0 = 10.0;
  std::size_t K_tiada = 1000;
  std::size_t K_adast = 1000;
  // Larger stepsizes make the frozen D-TiAda point numerically unstable:
  // rounding in the cancelling local steps grows instead of staying at 1e-14.
  double gamma_x = 1.0;
  double gamma_y = 1.0;
  double c0 = 0.0;
  std::size_t window = 1000;
};

/// D-TiAda and D-AdaST on the three-node instance from (x0, slope * x0),
/// exact gradients over the complete graph, tracking the gradient norms of
/// the averaged objective at the averaged iterate after every step.
inline CounterexampleReport counterexample_report(const CounterexampleOptions& o) {
  if (o.x0 == 0.0 || !std::isfinite(o.x0))
    throw InvalidParameter("x0 must be finite and non-zero");
  if (o.window == 0) throw InvalidParameter("window must be positive");
  const auto inst = make_counterexample(o.alpha, o.beta);
  const auto& prob = inst.problem;
  CounterexampleReport rep;
  rep.alpha = o.alpha;
  rep.beta = o.beta;
  rep.a = inst.a;
  rep.b = inst.b;
  rep.slope = inst.slope;
  rep.x0 = o.x0;
  rep.y0 = inst.slope * o.x0;
  rep.gamma_x = o.gamma_x;
  rep.gamma_y = o.gamma_y;
  rep.c0 = o.c0;
  rep.K_tiada = o.K_tiada;
  rep.K_adast = o.K_adast;
  rep.window = o.window;

  const auto w = WeightMatrix::averaging(3);
  const auto init =
      Initialization::uniform(3, Vector::Constant(1, rep.x0), Vector::Constant(1, rep.y0));
  auto grads = [&](const RunState& s) {
    const Vector xb = s.x.colwise().mean().transpose(), yb = s.y.colwise().mean().transpose();
    return std::pair{prob.average_grad_x(xb, yb).norm(), prob.average_grad_y(xb, yb).norm()};
  };
  AlgoConfig cfg;
  cfg.gamma_x = o.gamma_x;
  cfg.gamma_y = o.gamma_y;
  cfg.alpha = o.alpha;
  cfg.beta = o.beta;
  cfg.c0 = o.c0;

  cfg.algo = Algorithm::DTiada;
  cfg.K = o.K_tiada;
  auto s = init_state(prob, cfg, init, 0);
  std::tie(rep.tiada_grad_x0, rep.tiada_grad_y0) = grads(s);
  for (std::size_t k = 0; k < o.K_tiada; ++k) {
    step(s, prob, w, cfg, NoiseModel::none());
    const auto [gx, gy] = grads(s);
    rep.tiada_drift_x = std::max(rep.tiada_drift_x, std::abs(gx - rep.tiada_grad_x0) / rep.tiada_grad_x0);
    rep.tiada_drift_y = std::max(rep.tiada_drift_y, std::abs(gy - rep.tiada_grad_y0) / rep.tiada_grad_y0);
  }

  cfg.algo = Algorithm::DAdast;
  cfg.K = o.K_adast;
  s = init_state(prob, cfg, init, 0);
  rep.adast_grad_x0 = grads(s).first;
  double window_sum = 0.0;
  std::size_t in_window = 0;
  for (std::size_t k = 0; k < o.K_adast; ++k) {
    step(s, prob, w, cfg, NoiseModel::none());
    if (auto bad = first_nonfinite_node(s)) throw NumericAbort(*bad, s.k, {});
    window_sum += std::hypot(s.x.mean(), s.y.mean());
    if (++in_window == o.window) {
      rep.adast_window_means.push_back(window_sum / static_cast<double>(o.window));
      window_sum = 0.0;
      in_window = 0;
    }
  }
  rep.adast_grad_x_final = grads(s).first;
  rep.adast_ratio = rep.adast_grad_x_final / rep.adast_grad_x0;
  rep.adast_monotone = std::adjacent_find(rep.adast_window_means.begin(),
                                          rep.adast_window_means.end(),
                                          [](double prev, double next) { return next > prev; }) ==
                       rep.adast_window_means.end();
  return rep;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepCell {
  double gamma_x, gamma_y, alpha, beta;
};

/// Cartesian grid over the grid-* keys (alpha/beta are paired when both lists
/// have the same length, otherwise crossed). Throws ConfigError when no grid
/// key is present or a list is empty.
inline std::vector<SweepCell> sweep_grid(const KeyValues& kv, const RunConfig& base) {
  const auto& ac = base.algo_configs.front();
  auto list_or = [&](const char* key, double fallback) {
    return kv.count(key) ? parse_double_list(kv, key) : std::vector<double>{fallback};
  };
  if (!kv.count("grid-gamma-x") && !kv.count("grid-gamma-y") && !kv.count("grid-alpha") &&
      !kv.count("grid-beta"))
    throw ConfigError("grid-gamma-x", "empty grid: set at least one grid-* key");
  const auto gx = list_or("grid-gamma-x", ac.gamma_x), gy = list_or("grid-gamma-y", ac.gamma_y),
             al = list_or("grid-alpha", ac.alpha), be = list_or("grid-beta", ac.beta);
  std::vector<std::pair<double, double>> exps;
  if (kv.count("grid-alpha") && kv.count("grid-beta") && al.size() == be.size()) {
    for (std::size_t i = 0; i < al.size(); ++i) exps.emplace_back(al[i], be[i]);
  } else {
    for (double a : al)
      for (double b : be) exps.emplace_back(a, b);
  }
  std::vector<SweepCell> cells;
  for (double x : gx)
    for (double y : gy)
      for (const auto& [a, b] : exps) cells.push_back({x, y, a, b});
  return cells;
}

/// First recorded k with the stationarity measure at or below threshold
/// (grad_phi_sq when available, else grad_xf_sq); -1 if never.
inline long long iterations_to_threshold(const Trace& t, double threshold) {
  for (const auto& r : t.records) {
    const double m = std::isnan(r.grad_phi_sq) ? r.grad_xf_sq : r.grad_phi_sq;
    if (m <= threshold) return static_cast<long long>(r.k);
  }
  return -1;
}

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<ExperimentResult> results;
  bool any_aborted() const {
    return std::any_of(results.begin(), results.end(), [](const auto& r) { return r.any_aborted(); });
  }
};

/// Runs every cell into <out-dir>/cell_<i>/ and writes <out-dir>/sweep.csv.
inline SweepResult run_sweep(const KeyValues& kv) {
  const RunConfig base = resolve(kv);
  SweepResult sr;
  sr.cells = sweep_grid(kv, base);
  std::vector<RunConfig> configs;
  for (std::size_t i = 0; i < sr.cells.size(); ++i) {
    KeyValues cell_kv = kv;
    for (const char* k : {"grid-gamma-x", "grid-gamma-y", "grid-alpha", "grid-beta"}) cell_kv.erase(k);
    cell_kv["gamma-x"] = detail::format_value(sr.cells[i].gamma_x);
    cell_kv["gamma-y"] = detail::format_value(sr.cells[i].gamma_y);
    cell_kv["alpha"] = detail::format_value(sr.cells[i].alpha);
    cell_kv["beta"] = detail::format_value(sr.cells[i].beta);
    cell_kv["out-dir"] = (std::filesystem::path(base.out_dir) / ("cell_" + std::to_string(i))).string();
    configs.push_back(resolve(cell_kv));
  }
  std::vector<std::optional<ExperimentResult>> results(configs.size());
  const auto threads = worker_threads();
  parallel_for(configs.size(), threads, [&](std::size_t i) {
    results[i] = run_experiment(configs[i], std::nullopt, 1);
    write_artifacts(*results[i]);
  });
  for (auto& r : results) sr.results.push_back(std::move(*r));

  std::ostringstream csv;
  csv << "cell,gamma_x,gamma_y,alpha,beta,algo,status,final_k,final_grad_phi_sq,final_grad_xf_sq,"
         "final_zeta_v_sup,iters_to_threshold\n";
  for (std::size_t i = 0; i < sr.results.size(); ++i) {
    const auto& c = sr.cells[i];
    for (const auto& o : sr.results[i].outcomes) {
      const auto& last = o.trace.records.back();
      csv << i << ',' << format_double(c.gamma_x) << ',' << format_double(c.gamma_y) << ','
          << format_double(c.alpha) << ',' << format_double(c.beta) << ',' << to_string(o.config.algo)
          << ',' << (o.aborted ? "numeric-abort" : "ok") << ',' << last.k << ','
          << format_double(last.grad_phi_sq) << ',' << format_double(last.grad_xf_sq) << ','
          << format_double(last.zeta_v_sup) << ',' << iterations_to_threshold(o.trace, base.threshold)
          << '\n';
    }
  }
  std::filesystem::create_directories(base.out_dir);
  detail::write_text(std::filesystem::path(base.out_dir) / "sweep.csv", csv.str());
  return sr;
}

}  // namespace adast
