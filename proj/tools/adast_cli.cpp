// adast: decentralized adaptive minimax simulator.
//
//   adast run --experiment case-study --K 100000 --out-dir out/cs
//   adast run --config exp.toml --seed 3
//   adast run --manifest out/cs/manifest.json --out-dir out/replay
//   adast counterexample --alpha 0.75 --beta 0.25 --x0 10 --K 1000
//   adast sweep --experiment synthetic --n 50 --grid-gamma-x 0.1,0.02
//   adast spectral --topology exponential --n 50
//
// Exit codes: 0 ok, 2 configuration error, 3 numeric abort or I/O failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adast/adast.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRunError = 3;

/// One --<key> option per config key; returns the ones actually given.
struct KeyFlags {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App& app, bool include_grid) {
    for (const auto& k : adast::kConfigKeys) {
      const std::string name(k.name);
      if (!include_grid && name.rfind("grid-", 0) == 0) continue;
      options[name] = app.add_option("--" + name, values[name], std::string(k.help));
    }
  }

  adast::KeyValues given() const {
    adast::KeyValues kv;
    for (const auto& [name, opt] : options)
      if (opt->count() > 0) kv[name] = values.at(name);
    return kv;
  }
};

adast::KeyValues gather(const std::string& config_file, const KeyFlags& flags) {
  adast::KeyValues kv;
  if (!config_file.empty()) kv = adast::load_config_file(config_file);
  return adast::merge(kv, flags.given());
}

int report_outcomes(const adast::ExperimentResult& r) {
  int code = kOk;
  for (const auto& o : r.outcomes) {
    const auto& recs = o.trace.records;
    if (o.aborted) {
      std::cerr << adast::to_string(o.config.algo) << ": numeric abort at node " << o.abort_node
                << ", iteration " << o.abort_iteration << "\n";
      code = kRunError;
    } else if (!recs.empty()) {
      std::cerr << adast::to_string(o.config.algo) << ": k=" << recs.back().k
                << " grad_phi_sq=" << adast::format_double(recs.back().grad_phi_sq)
                << " zeta_v_inst=" << adast::format_double(recs.back().zeta_v_inst) << "\n";
    }
  }
  return code;
}

int cmd_run(const std::string& config_file, const std::string& manifest, const KeyFlags& flags) {
  std::optional<adast::QuadraticMinimaxProblem> problem;
  adast::KeyValues kv;
  if (!manifest.empty()) {
    auto replay = adast::load_manifest(manifest);
    problem.emplace(std::move(replay.problem));
    kv = replay.config;
    if (!config_file.empty()) kv = adast::merge(kv, adast::load_config_file(config_file));
    kv = adast::merge(kv, flags.given());
  } else {
    kv = gather(config_file, flags);
  }
  const auto rc = adast::resolve(kv);
  const auto result = adast::run_experiment(rc, problem);
  adast::write_artifacts(result);
  std::cerr << "wrote " << rc.out_dir << "/manifest.json (rho_w="
            << adast::format_double(result.weights.rho_w())
            << ", ||W-J||=" << adast::format_double(result.weights.spectral_norm()) << ")\n";
  return report_outcomes(result);
}

int cmd_sweep(const std::string& config_file, const KeyFlags& flags) {
  const auto kv = gather(config_file, flags);
  const auto sr = adast::run_sweep(kv);
  std::cerr << "wrote " << adast::resolve(kv).out_dir << "/sweep.csv (" << sr.cells.size()
            << " cells)\n";
  return sr.any_aborted() ? kRunError : kOk;
}

int cmd_spectral(const std::string& topology, const std::string& ns) {
  const auto kind = adast::parse_graph_kind(topology);
  if (!kind || *kind == adast::GraphKind::Custom)
    throw adast::ConfigError("topology", "unknown or unsupported topology '" + topology + "'");
  const adast::KeyValues kv{{"n", ns}};
  for (double v : adast::parse_double_list(kv, "n")) {
    if (!(v >= 1.0) || v != static_cast<double>(static_cast<std::size_t>(v)))
      throw adast::ConfigError("n", "expected positive integers");
    adast::GraphSpec spec{static_cast<std::size_t>(v), *kind, {}, false};
    const auto w = adast::default_weights(spec);
    const auto report = adast::validate_doubly_stochastic(w.matrix(), 1e-12);
    adast::json line = {{"topology", std::string(adast::to_string(*kind))},
                        {"n", spec.n},
                        {"rho_w", adast::number(w.rho_w())},
                        {"spectral_norm", adast::number(w.spectral_norm())},
                        {"validation", adast::to_json(report)}};
    std::cout << line.dump() << "\n";
  }
  return kOk;
}

int cmd_counterexample(const adast::CounterexampleOptions& opts, const std::string& out) {
  if (!(opts.alpha > 0.5 && opts.alpha < 1.0))
    throw adast::ConfigError("alpha", "need 0.5 < alpha < 1");
  if (!(opts.beta > 0.0 && opts.beta < 0.5)) throw adast::ConfigError("beta", "need 0 < beta < 0.5");
  if (opts.x0 == 0.0) throw adast::ConfigError("x0", "x0 = 0 is the stationary point");
  if (!(opts.gamma_x > 0.0)) throw adast::ConfigError("gamma-x", "must be positive");
  if (!(opts.gamma_y > 0.0)) throw adast::ConfigError("gamma-y", "must be positive");
  if (!(opts.c0 >= 0.0)) throw adast::ConfigError("c0", "must be >= 0");
  const auto report = adast::counterexample_report(opts).to_json().dump(2);
  std::cout << report << "\n";
  if (!out.empty()) {
    std::ofstream f(out);
    if (!(f << report << "\n")) throw adast::TraceIoError("cannot write '" + out + "'");
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized adaptive minimax simulator (D-SGDA, D-TiAda, D-AdaST)"};
  app.set_version_flag("--version", std::string(adast::kVersion));
  app.require_subcommand(1);

  std::string run_config, run_manifest;
  KeyFlags run_flags;
  auto* run = app.add_subcommand("run", "run one experiment and write traces, manifest and plot");
  run->add_option("--config", run_config, "flat key = value config file");
  run->add_option("--manifest", run_manifest, "replay the config and problem of a manifest");
  run_flags.attach(*run, false);

  adast::CounterexampleOptions ce;
  std::size_t ce_K = 1000;
  std::size_t ce_K_adast = 0;
  std::string ce_out;
  auto* cex = app.add_subcommand("counterexample", "D-TiAda vs D-AdaST on the three-node instance");
  cex->add_option("--alpha", ce.alpha, "primal exponent, 0.5 < alpha < 1")->capture_default_str();
  cex->add_option("--beta", ce.beta, "dual exponent, 0 < beta < 0.5")->capture_default_str();
  cex->add_option("--x0", ce.x0, "starting primal value (non-zero)")->capture_default_str();
  cex->add_option("--K", ce_K, "iterations")->capture_default_str();
  cex->add_option("--K-adast", ce_K_adast, "iterations for D-AdaST (default: --K)");
  cex->add_option("--gamma-x", ce.gamma_x, "initial primal stepsize")->capture_default_str();
  cex->add_option("--gamma-y", ce.gamma_y, "initial dual stepsize")->capture_default_str();
  cex->add_option("--c0", ce.c0, "initial accumulator")->capture_default_str();
  cex->add_option("--out", ce_out, "also write the JSON report here");

  std::string sweep_config;
  KeyFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "grid over stepsizes or exponents; writes sweep.csv");
  sweep->add_option("--config", sweep_config, "flat key = value config file");
  sweep_flags.attach(*sweep, true);

  std::string sp_topology = "ring", sp_n;
  auto* spectral = app.add_subcommand("spectral", "print rho_W and the validation report as JSON lines");
  spectral->add_option("--topology", sp_topology, "graph kind")->capture_default_str();
  spectral->add_option("--n", sp_n, "node count(s), comma separated")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*run) return cmd_run(run_config, run_manifest, run_flags);
    if (*sweep) return cmd_sweep(sweep_config, sweep_flags);
    if (*spectral) return cmd_spectral(sp_topology, sp_n);
    if (*cex) {
      ce.K_tiada = ce_K;
      ce.K_adast = ce_K_adast ? ce_K_adast : ce_K;
      return cmd_counterexample(ce, ce_out);
    }
  } catch (const adast::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::logic_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const adast::NumericAbort& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return kRunError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRunError;
  }
  return kOk;
}
