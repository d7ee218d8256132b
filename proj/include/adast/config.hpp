#pragma once

// Run configuration: a flat `key = value` file mirrored one-to-one by CLI
// flags (--gamma-x, ...). Values left unset get per-experiment defaults in
// resolve(); the resolved map (every key explicit) is what the manifest
// echoes, so it alone reproduces a run.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "adast/errors.hpp"
#include "adast/problems.hpp"
#include "adast/state.hpp"
#include "adast/topology.hpp"

namespace adast {

/// Bad or unknown configuration entry; key() names it.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : "config key '" + key + "': " + what),
        key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

using KeyValues = std::map<std::string, std::string>;

enum class Experiment { CaseStudy, Counterexample, Synthetic, Custom };

inline std::string_view to_string(Experiment e) {
  switch (e) {
    case Experiment::CaseStudy: return "case-study";
    case Experiment::Counterexample: return "counterexample";
    case Experiment::Synthetic: return "synthetic";
    case Experiment::Custom: return "custom";
  }
  return "unknown";
}

inline std::optional<Experiment> parse_experiment(std::string_view s) {
  if (s == "case-study") return Experiment::CaseStudy;
  if (s == "counterexample") return Experiment::Counterexample;
  if (s == "synthetic") return Experiment::Synthetic;
  if (s == "custom") return Experiment::Custom;
  return std::nullopt;
}

struct KeyInfo {
  std::string_view name;
  std::string_view help;
};

// clang-format off
inline constexpr KeyInfo kConfigKeys[] = {
    {"experiment", "case-study | counterexample | synthetic | custom"},
    {"topology", "ring | directed-ring | exponential | dense | complete | custom"},
    {"n", "number of nodes"},
    {"edges", "custom topology edges, e.g. 0-1,1-2"},
    {"directed", "custom topology: edges are one-way (true/false)"},
    {"algos", "comma list of d-sgda, d-tiada, d-adast, d-adast-coord"},
    {"alpha", "primal stepsize exponent"},
    {"beta", "dual stepsize exponent"},
    {"gamma-x", "initial primal stepsize"},
    {"gamma-y", "initial dual stepsize"},
    {"c0", "initial accumulator value"},
    {"ordering", "local-then-mix | mixed-accumulators"},
    {"noise", "none | gaussian | gaussian-clipped"},
    {"sigma", "noise standard deviation per coordinate"},
    {"clip", "clipping bound for gaussian-clipped"},
    {"seed", "64-bit seed for problem draws and noise"},
    {"K", "iterations"},
    {"trace-stride", "record every this many iterations"},
    {"out-dir", "output directory"},
    {"x0", "initial primal value (every coordinate)"},
    {"y0", "initial dual value (every coordinate)"},
    {"init-offset", "node i starts at (x0 + i*off, y0 - i*off)"},
    {"projection", "all | box | ball"},
    {"proj-lo", "box lower bound (every coordinate)"},
    {"proj-hi", "box upper bound (every coordinate)"},
    {"proj-radius", "ball radius (centered at 0)"},
    {"l-low", "synthetic: lower end of the L_i range"},
    {"l-high", "synthetic: upper end of the L_i range"},
    {"p", "custom: primal dimension"},
    {"d", "custom: dual dimension"},
    {"threshold", "sweep: stationarity level for iterations-to-threshold"},
    {"grid-gamma-x", "sweep: comma list of gamma-x values"},
    {"grid-gamma-y", "sweep: comma list of gamma-y values"},
    {"grid-alpha", "sweep: comma list of alpha values"},
    {"grid-beta", "sweep: comma list of beta values (paired with grid-alpha when same length)"},
};
// clang-format on

inline bool is_known_key(std::string_view key) {
  for (const auto& k : kConfigKeys)
    if (k.name == key) return true;
  return false;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Accept snake_case spellings of the dashed keys.
inline std::string normalize_key(std::string key) {
  for (auto& ch : key)
    if (ch == '_') ch = '-';
  return key;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace detail

/// Parses `key = value` lines; '#' starts a comment, values may be quoted.
inline KeyValues parse_config_text(std::string_view text) {
  KeyValues kv;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string body = line;
    bool quoted = false;
    for (std::size_t i = 0; i < body.size(); ++i) {
      if (body[i] == '"') quoted = !quoted;
      if (body[i] == '#' && !quoted) {
        body.resize(i);
        break;
      }
    }
    body = detail::trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("", "line " + std::to_string(lineno) + ": expected key = value");
    std::string key = detail::normalize_key(detail::trim(body.substr(0, eq)));
    std::string value = detail::trim(body.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    if (!is_known_key(key)) throw ConfigError(key, "unknown key");
    kv[key] = value;
  }
  return kv;
}

inline KeyValues load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// Later entries win.
inline KeyValues merge(KeyValues base, const KeyValues& overrides) {
  for (const auto& [k, v] : overrides) base[k] = v;
  return base;
}

/// Fully resolved run configuration.
struct RunConfig {
  Experiment experiment = Experiment::CaseStudy;
  GraphSpec topology;
  std::vector<AlgoConfig> algo_configs;
  NoiseModel noise;
  std::uint64_t seed = 0;
  std::size_t K = 1000;
  std::size_t trace_stride = 1;
  std::string out_dir = "out";
  double x0 = 1.0;
  /// Unused for the counterexample, which starts on its invariant line.
  double y0 = 1.0;
  double init_offset = 0.0;
  double l_low = 1.5;
  double l_high = 2.5;
  Eigen::Index p = 2;
  Eigen::Index d = 2;
  double threshold = 1e-2;

  /// Every key spelled out; parse + resolve of this map gives back *this.
  KeyValues echo;
};

namespace detail {

inline double get_double(const KeyValues& kv, const std::string& key) {
  const auto& s = kv.at(key);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || !std::isfinite(v))
    throw ConfigError(key, "expected a finite number, got '" + s + "'");
  return v;
}

inline std::uint64_t get_uint(const KeyValues& kv, const std::string& key) {
  const auto& s = kv.at(key);
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError(key, "expected a non-negative integer, got '" + s + "'");
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw ConfigError(key, "integer out of range: '" + s + "'");
  }
}

inline bool get_bool(const KeyValues& kv, const std::string& key) {
  const auto& s = kv.at(key);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + s + "'");
}

inline std::vector<Edge> parse_edges(const std::string& s) {
  std::vector<Edge> edges;
  for (const auto& item : split_list(s)) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) throw ConfigError("edges", "expected i-j, got '" + item + "'");
    KeyValues tmp{{"edges", item.substr(0, dash)}};
    const auto i = get_uint(tmp, "edges");
    tmp["edges"] = item.substr(dash + 1);
    const auto j = get_uint(tmp, "edges");
    edges.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  }
  return edges;
}

inline std::string format_value(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

/// Applies per-experiment defaults, enforces the counterexample's fixed
/// setting, validates everything and fills RunConfig::echo.
inline RunConfig resolve(const KeyValues& input) {
  for (const auto& [k, v] : input)
    if (!is_known_key(k)) throw ConfigError(k, "unknown key");
  KeyValues kv = input;
  auto set_default = [&](const std::string& key, const std::string& value) {
    if (!kv.count(key)) kv[key] = value;
  };

  set_default("experiment", "case-study");
  const auto exp = parse_experiment(kv["experiment"]);
  if (!exp) throw ConfigError("experiment", "unknown experiment '" + kv["experiment"] + "'");

  switch (*exp) {
    case Experiment::CaseStudy:
      set_default("n", "2");
      set_default("topology", "complete");
      set_default("algos", "d-sgda,d-tiada,d-adast");
      set_default("K", "100000");
      set_default("x0", "1");
      set_default("y0", "1");
      set_default("init-offset", "0.01");
      set_default("noise", "none");
      break;
    case Experiment::Counterexample: {
      auto force = [&](const std::string& key, const std::string& value) {
        if (kv.count(key) && kv[key] != value)
          throw ConfigError(key, "the counterexample requires " + key + " = " + value);
        kv[key] = value;
      };
      force("n", "3");
      force("topology", "complete");
      force("noise", "none");
      force("projection", "all");
      force("init-offset", "0");
      if (kv.count("y0")) throw ConfigError("y0", "the counterexample derives y0 from x0");
      set_default("algos", "d-tiada,d-adast");
      set_default("K", "1000");
      set_default("x0", "10");
      set_default("alpha", "0.75");
      set_default("beta", "0.25");
      set_default("gamma-x", "1");
      set_default("gamma-y", "1");
      set_default("c0", "0");
      break;
    }
    case Experiment::Synthetic:
      if (!kv.count("n")) throw ConfigError("n", "the synthetic experiment needs n");
      set_default("topology", "exponential");
      set_default("algos", "d-sgda,d-tiada,d-adast");
      set_default("K", "10000");
      set_default("x0", "0");
      set_default("y0", "0");
      set_default("noise", "gaussian");
      set_default("sigma", detail::format_value(std::sqrt(0.1)));
      break;
    case Experiment::Custom:
      if (!kv.count("n")) throw ConfigError("n", "the custom experiment needs n");
      set_default("topology", "ring");
      set_default("algos", "d-sgda,d-tiada,d-adast,d-adast-coord");
      set_default("x0", "0");
      set_default("y0", "0");
      break;
  }
  set_default("K", "1000");
  set_default("alpha", "0.6");
  set_default("beta", "0.4");
  set_default("gamma-x", "0.1");
  set_default("gamma-y", "0.1");
  set_default("c0", "1e-6");
  set_default("ordering", "local-then-mix");
  set_default("noise", "none");
  set_default("seed", "0");
  set_default("out-dir", "out");
  set_default("x0", "0");
  if (*exp != Experiment::Counterexample) set_default("y0", "0");
  set_default("init-offset", "0");
  set_default("projection", "all");
  set_default("l-low", "1.5");
  set_default("l-high", "2.5");
  if (*exp == Experiment::Custom) {
    set_default("p", "2");
    set_default("d", "2");
  }
  set_default("threshold", "0.01");

  RunConfig rc;
  rc.experiment = *exp;

  // topology
  const auto kind = parse_graph_kind(kv["topology"]);
  if (!kind) throw ConfigError("topology", "unknown topology '" + kv["topology"] + "'");
  rc.topology.kind = *kind;
  rc.topology.n = static_cast<std::size_t>(detail::get_uint(kv, "n"));
  if (rc.topology.n == 0) throw ConfigError("n", "need at least one node");
  if (*kind == GraphKind::Custom) {
    if (!kv.count("edges")) throw ConfigError("edges", "custom topology needs edges");
    rc.topology.edges = detail::parse_edges(kv["edges"]);
    for (const auto& [i, j] : rc.topology.edges)
      if (i >= rc.topology.n || j >= rc.topology.n)
        throw ConfigError("edges", "edge endpoint out of range for n = " + kv["n"]);
    set_default("directed", "false");
    rc.topology.directed = detail::get_bool(kv, "directed");
  } else if (kv.count("edges") || kv.count("directed")) {
    throw ConfigError(kv.count("edges") ? "edges" : "directed",
                      "only meaningful with topology = custom");
  }

  // noise
  const auto& noise = kv["noise"];
  if (noise == "none") {
    rc.noise = NoiseModel::none();
  } else if (noise == "gaussian" || noise == "gaussian-clipped") {
    if (!kv.count("sigma")) throw ConfigError("sigma", "gaussian noise needs sigma");
    const double sigma = detail::get_double(kv, "sigma");
    if (!(sigma >= 0.0)) throw ConfigError("sigma", "must be >= 0");
    if (noise == "gaussian") {
      rc.noise = NoiseModel::gaussian(sigma);
    } else {
      if (!kv.count("clip")) throw ConfigError("clip", "gaussian-clipped noise needs clip");
      const double clip = detail::get_double(kv, "clip");
      if (!(clip > 0.0)) throw ConfigError("clip", "must be positive");
      rc.noise = NoiseModel::gaussian_clipped(sigma, clip);
    }
  } else {
    throw ConfigError("noise", "unknown noise model '" + noise + "'");
  }
  if (noise == "none") {
    kv.erase("sigma");
    kv.erase("clip");
  }

  rc.seed = detail::get_uint(kv, "seed");
  rc.K = static_cast<std::size_t>(detail::get_uint(kv, "K"));
  set_default("trace-stride", std::to_string(rc.K >= 1000 ? rc.K / 1000 : 1));
  rc.trace_stride = static_cast<std::size_t>(detail::get_uint(kv, "trace-stride"));
  if (rc.trace_stride == 0) throw ConfigError("trace-stride", "must be positive");
  rc.out_dir = kv["out-dir"];
  if (rc.out_dir.empty()) throw ConfigError("out-dir", "must not be empty");
  rc.x0 = detail::get_double(kv, "x0");
  if (kv.count("y0")) rc.y0 = detail::get_double(kv, "y0");
  rc.init_offset = detail::get_double(kv, "init-offset");
  rc.l_low = detail::get_double(kv, "l-low");
  rc.l_high = detail::get_double(kv, "l-high");
  if (!(rc.l_low <= rc.l_high)) throw ConfigError("l-high", "must be >= l-low");
  rc.threshold = detail::get_double(kv, "threshold");
  if (rc.experiment == Experiment::Counterexample && rc.x0 == 0.0)
    throw ConfigError("x0", "x0 = 0 is the stationary point; nothing to show");
  if (rc.experiment != Experiment::Custom && (input.count("p") || input.count("d")))
    throw ConfigError(input.count("p") ? "p" : "d", "only the custom experiment has free dimensions");
  if (rc.experiment == Experiment::Custom) {
    rc.p = static_cast<Eigen::Index>(detail::get_uint(kv, "p"));
    rc.d = static_cast<Eigen::Index>(detail::get_uint(kv, "d"));
    if (rc.p == 0) throw ConfigError("p", "must be positive");
    if (rc.d == 0) throw ConfigError("d", "must be positive");
  }

  // projection of the dual variable; dimension is known once the problem is
  const Eigen::Index dual_dim =
      rc.experiment == Experiment::Custom ? rc.d : Eigen::Index{1};
  ProjectionSet proj = ProjectionSet::all();
  const auto& pk = kv["projection"];
  if (pk == "box") {
    if (!kv.count("proj-lo") || !kv.count("proj-hi"))
      throw ConfigError(kv.count("proj-lo") ? "proj-hi" : "proj-lo", "box projection needs bounds");
    const double lo = detail::get_double(kv, "proj-lo"), hi = detail::get_double(kv, "proj-hi");
    if (!(lo <= hi)) throw ConfigError("proj-hi", "must be >= proj-lo");
    proj = ProjectionSet::box(Vector::Constant(dual_dim, lo), Vector::Constant(dual_dim, hi));
    kv.erase("proj-radius");
  } else if (pk == "ball") {
    if (!kv.count("proj-radius")) throw ConfigError("proj-radius", "ball projection needs a radius");
    const double r = detail::get_double(kv, "proj-radius");
    if (!(r > 0.0)) throw ConfigError("proj-radius", "must be positive");
    proj = ProjectionSet::ball(Vector::Zero(dual_dim), r);
    kv.erase("proj-lo");
    kv.erase("proj-hi");
  } else if (pk == "all") {
    for (const char* k : {"proj-lo", "proj-hi", "proj-radius"})
      if (kv.count(k)) throw ConfigError(k, "set projection = box or ball to use it");
  } else {
    throw ConfigError("projection", "unknown projection '" + pk + "'");
  }

  // algorithms
  const auto ordering = parse_ordering(kv["ordering"]);
  if (!ordering) throw ConfigError("ordering", "unknown ordering '" + kv["ordering"] + "'");
  const auto names = detail::split_list(kv["algos"]);
  if (names.empty()) throw ConfigError("algos", "need at least one algorithm");
  for (const auto& name : names) {
    const auto algo = parse_algorithm(name);
    if (!algo) throw ConfigError("algos", "unknown algorithm '" + name + "'");
    for (const auto& prev : rc.algo_configs)
      if (prev.algo == *algo) throw ConfigError("algos", "'" + name + "' listed twice");
    AlgoConfig ac;
    ac.algo = *algo;
    ac.gamma_x = detail::get_double(kv, "gamma-x");
    ac.gamma_y = detail::get_double(kv, "gamma-y");
    ac.alpha = detail::get_double(kv, "alpha");
    ac.beta = detail::get_double(kv, "beta");
    ac.c0 = detail::get_double(kv, "c0");
    ac.K = rc.K;
    ac.ordering = *ordering;
    ac.projection = proj;
    if (!(ac.gamma_x > 0.0)) throw ConfigError("gamma-x", "must be positive");
    if (!(ac.gamma_y > 0.0)) throw ConfigError("gamma-y", "must be positive");
    if (!(ac.c0 >= 0.0)) throw ConfigError("c0", "must be >= 0");
    if (is_adaptive(ac.algo)) {
      if (!(ac.alpha > 0.0 && ac.alpha < 1.0)) throw ConfigError("alpha", "need 0 < alpha < 1");
      if (!(ac.beta > 0.0 && ac.beta < ac.alpha))
        throw ConfigError("beta", "need 0 < beta < alpha");
    }
    if (is_coordinatewise(ac.algo) && ac.c0 == 0.0)
      throw ConfigError("c0", "the coordinate-wise method needs c0 > 0");
    rc.algo_configs.push_back(ac);
  }
  if (rc.experiment == Experiment::Counterexample) {
    const double a = rc.algo_configs.front().alpha, b = rc.algo_configs.front().beta;
    if (!(a > 0.5 && a < 1.0)) throw ConfigError("alpha", "counterexample needs 0.5 < alpha < 1");
    if (!(b > 0.0 && b < 0.5)) throw ConfigError("beta", "counterexample needs 0 < beta < 0.5");
    for (const auto& ac : rc.algo_configs)
      if (ac.algo == Algorithm::DAdastCoordinate)
        throw ConfigError("algos", "the counterexample is scalar; use d-adast");
  }
  // sweep-only keys ride along in the echo of a single run
  rc.echo = kv;
  return rc;
}

/// Parses "a,b,c" as doubles, naming `key` on failure. Empty lists are errors.
inline std::vector<double> parse_double_list(const KeyValues& kv, const std::string& key) {
  const auto items = detail::split_list(kv.at(key));
  if (items.empty()) throw ConfigError(key, "empty grid");
  std::vector<double> out;
  for (const auto& item : items) {
    KeyValues tmp{{key, item}};
    out.push_back(detail::get_double(tmp, key));
  }
  return out;
}

}  // namespace adast
