#pragma once

// Communication graphs, doubly-stochastic mixing matrices and the
// connectivity constant rho_W = ||W - J||_2^2.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "adast/errors.hpp"
#include "adast/rng.hpp"

namespace adast {

enum class GraphKind { Ring, DirectedRing, Exponential, Dense, Complete, Custom };

inline std::string_view to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::Ring: return "ring";
    case GraphKind::DirectedRing: return "directed-ring";
    case GraphKind::Exponential: return "exponential";
    case GraphKind::Dense: return "dense";
    case GraphKind::Complete: return "complete";
    case GraphKind::Custom: return "custom";
  }
  return "unknown";
}

inline std::optional<GraphKind> parse_graph_kind(std::string_view s) {
  if (s == "ring") return GraphKind::Ring;
  if (s == "directed-ring") return GraphKind::DirectedRing;
  if (s == "exponential" || s == "exp") return GraphKind::Exponential;
  if (s == "dense") return GraphKind::Dense;
  if (s == "complete" || s == "fc") return GraphKind::Complete;
  if (s == "custom") return GraphKind::Custom;
  return std::nullopt;
}

using Edge = std::pair<std::size_t, std::size_t>;

struct GraphSpec {
  std::size_t n = 0;
  GraphKind kind = GraphKind::Ring;
  /// Only read for Custom. Ordered pairs (i, j): i sends to j.
  std::vector<Edge> edges;
  /// Custom only: when false every listed pair is also added reversed.
  bool directed = false;
};

/// Out-neighbor lists, self-loops excluded, each list sorted and unique.
struct Graph {
  std::size_t n = 0;
  std::vector<std::vector<std::size_t>> out;

  std::size_t out_degree(std::size_t i) const { return out[i].size(); }

  std::vector<std::size_t> in_degrees() const {
    std::vector<std::size_t> deg(n, 0);
    for (const auto& nbrs : out)
      for (auto j : nbrs) ++deg[j];
    return deg;
  }

  bool has_edge(std::size_t i, std::size_t j) const {
    return std::binary_search(out[i].begin(), out[i].end(), j);
  }

  bool is_undirected() const {
    for (std::size_t i = 0; i < n; ++i)
      for (auto j : out[i])
        if (!has_edge(j, i)) return false;
    return true;
  }

  /// Connectivity of the underlying undirected graph (edges of both directions).
  bool is_connected() const {
    if (n == 0) return false;
    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t i = 0; i < n; ++i)
      for (auto j : out[i]) {
        adj[i].push_back(j);
        adj[j].push_back(i);
      }
    std::vector<bool> seen(n, false);
    std::queue<std::size_t> frontier;
    frontier.push(0);
    seen[0] = true;
    std::size_t count = 1;
    while (!frontier.empty()) {
      auto u = frontier.front();
      frontier.pop();
      for (auto v : adj[u])
        if (!seen[v]) {
          seen[v] = true;
          ++count;
          frontier.push(v);
        }
    }
    return count == n;
  }
};

namespace detail {

inline Graph from_offsets(std::size_t n, const std::vector<std::size_t>& offsets,
                          bool undirected) {
  std::vector<std::set<std::size_t>> sets(n);
  for (std::size_t i = 0; i < n; ++i)
    for (auto o : offsets) {
      std::size_t j = (i + o) % n;
      if (j == i) continue;
      sets[i].insert(j);
      if (undirected) sets[j].insert(i);
    }
  Graph g{n, {}};
  g.out.reserve(n);
  for (auto& s : sets) g.out.emplace_back(s.begin(), s.end());
  return g;
}

/// Offsets {2^0, 2^1, ...} up to 2^floor(log2(n-1)).
inline std::vector<std::size_t> power_of_two_offsets(std::size_t n) {
  std::vector<std::size_t> offs;
  for (std::size_t o = 1; n > 1 && o <= n - 1; o *= 2) offs.push_back(o);
  return offs;
}

/// Undirected circulant offsets reaching degree floor(n/2): powers of two
/// first, then the smallest unused offsets. Offset n/2 (n even) adds one
/// neighbor, every other offset two, so an odd n with odd floor(n/2) gets
/// degree floor(n/2) + 1 (no regular graph has odd degree and odd order).
inline std::vector<std::size_t> dense_offsets(std::size_t n) {
  const std::size_t half = n / 2;
  std::size_t target = half;
  if (n % 2 == 1 && target % 2 == 1) ++target;
  std::vector<std::size_t> offs;
  std::size_t degree = 0;
  if (target % 2 == 1) {  // n even: the antipodal offset supplies the odd neighbor
    offs.push_back(half);
    degree = 1;
  }
  auto try_take = [&](std::size_t o) {
    if (degree >= target || std::find(offs.begin(), offs.end(), o) != offs.end()) return;
    if (n % 2 == 0 && o == half) return;  // only used for the odd case above
    offs.push_back(o);
    degree += 2;
  };
  for (std::size_t o = 1; o <= half; o *= 2) try_take(o);
  for (std::size_t o = 1; o <= half; ++o) try_take(o);
  std::sort(offs.begin(), offs.end());
  return offs;
}

}  // namespace detail

inline Graph build_graph(const GraphSpec& spec) {
  const std::size_t n = spec.n;
  if (n == 0) throw InvalidSpec("graph must have at least one node");
  switch (spec.kind) {
    case GraphKind::Ring:
      return detail::from_offsets(n, {1}, true);
    case GraphKind::DirectedRing:
      return detail::from_offsets(n, {1}, false);
    case GraphKind::Exponential:
      return detail::from_offsets(n, detail::power_of_two_offsets(n), false);
    case GraphKind::Dense:
      return detail::from_offsets(n, detail::dense_offsets(n), true);
    case GraphKind::Complete: {
      std::vector<std::size_t> offs;
      for (std::size_t o = 1; o < n; ++o) offs.push_back(o);
      return detail::from_offsets(n, offs, false);
    }
    case GraphKind::Custom: {
      std::vector<std::set<std::size_t>> sets(n);
      for (auto [i, j] : spec.edges) {
        if (i >= n || j >= n)
          throw InvalidSpec("custom edge (" + std::to_string(i) + ", " +
                            std::to_string(j) + ") out of range for n = " +
                            std::to_string(n));
        if (i == j) continue;
        sets[i].insert(j);
        if (!spec.directed) sets[j].insert(i);
      }
      Graph g{n, {}};
      for (auto& s : sets) g.out.emplace_back(s.begin(), s.end());
      return g;
    }
  }
  throw InvalidSpec("unknown graph kind");
}

/// Squared spectral norm of W - J by power iteration on (W-J)^T (W-J).
/// Throws NumericError (with the last estimate) if the Rayleigh quotient does
/// not settle to `rel_tol` within `max_iter` iterations.
inline double spectral_rho_power(const Eigen::MatrixXd& w, double rel_tol = 1e-10,
                                 std::size_t max_iter = 100000) {
  const auto n = w.rows();
  if (n == 0 || w.cols() != n) throw InvalidSpec("weight matrix must be square and non-empty");
  auto centered = [](Eigen::VectorXd v) {
    v.array() -= v.mean();
    return v;
  };
  auto apply = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd u = centered(w * v);  // (W - J) v
    return Eigen::VectorXd(centered(w.transpose() * u));  // (W - J)^T u
  };

  SplitMix64 gen(0x5eed5eedULL);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = unif(gen);
  v.normalize();

  double lambda = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    Eigen::VectorXd next = apply(v);
    const double estimate = v.dot(next);
    const double norm = next.norm();
    if (norm == 0.0) return 0.0;
    if (it > 0 && std::abs(estimate - lambda) <= rel_tol * std::abs(estimate)) return estimate;
    lambda = estimate;
    v = next / norm;
  }
  throw NumericError("power iteration for rho_W did not converge", lambda);
}

/// rho_W = ||W - J||_2^2. Dense symmetric eigensolver on (W-J)^T (W-J) for
/// n <= 64, power iteration above.
inline double spectral_rho(const Eigen::MatrixXd& w) {
  const auto n = w.rows();
  if (n == 0 || w.cols() != n) throw InvalidSpec("weight matrix must be square and non-empty");
  if (n > 64) return spectral_rho_power(w);
  Eigen::MatrixXd a = w.array() - 1.0 / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.transpose() * a,
                                                     Eigen::EigenvaluesOnly);
  return std::max(0.0, es.eigenvalues().maxCoeff());
}

struct ValidationReport {
  bool pass = true;
  double max_row_deviation = 0.0;
  double max_col_deviation = 0.0;
  double min_entry = 0.0;
  std::vector<std::string> violations;
};

inline ValidationReport validate_doubly_stochastic(const Eigen::MatrixXd& w, double tol) {
  ValidationReport r;
  if (w.rows() != w.cols() || w.rows() == 0) {
    r.pass = false;
    r.violations.push_back("matrix is not square and non-empty");
    return r;
  }
  r.min_entry = w.minCoeff();
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    const double row_dev = std::abs(w.row(i).sum() - 1.0);
    const double col_dev = std::abs(w.col(i).sum() - 1.0);
    r.max_row_deviation = std::max(r.max_row_deviation, row_dev);
    r.max_col_deviation = std::max(r.max_col_deviation, col_dev);
    if (!(row_dev <= tol))
      r.violations.push_back("row " + std::to_string(i) + " sum deviates by " +
                             std::to_string(row_dev));
    if (!(col_dev <= tol))
      r.violations.push_back("column " + std::to_string(i) + " sum deviates by " +
                             std::to_string(col_dev));
  }
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      if (w(i, j) < 0.0)
        r.violations.push_back("negative entry at (" + std::to_string(i) + ", " +
                               std::to_string(j) + ")");
  r.pass = r.violations.empty();
  return r;
}

/// Doubly-stochastic mixing matrix together with its rho_W.
class WeightMatrix {
 public:
  explicit WeightMatrix(Eigen::MatrixXd w) : w_(std::move(w)), rho_w_(spectral_rho(w_)) {}

  const Eigen::MatrixXd& matrix() const noexcept { return w_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(w_.rows()); }
  /// ||W - J||_2^2
  double rho_w() const noexcept { return rho_w_; }
  /// ||W - J||_2 (unsquared).
  double spectral_norm() const noexcept { return std::sqrt(rho_w_); }

  static WeightMatrix identity(std::size_t n) {
    return WeightMatrix(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                                  static_cast<Eigen::Index>(n)));
  }
  static WeightMatrix averaging(std::size_t n) {
    const auto m = static_cast<Eigen::Index>(n);
    return WeightMatrix(Eigen::MatrixXd::Constant(m, m, 1.0 / static_cast<double>(n)));
  }

 private:
  Eigen::MatrixXd w_;
  double rho_w_;
};

/// W_ij = 1 / (1 + max(deg i, deg j)) on edges, self weight takes the rest.
inline WeightMatrix metropolis_weights(const Graph& g) {
  if (!g.is_undirected()) throw InvalidGraph("Metropolis weights need an undirected graph");
  if (!g.is_connected()) throw ConnectivityError("graph is not connected");
  const auto n = static_cast<Eigen::Index>(g.n);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < g.n; ++i) {
    double off = 0.0;
    for (auto j : g.out[i]) {
      const double wij =
          1.0 / (1.0 + static_cast<double>(std::max(g.out_degree(i), g.out_degree(j))));
      w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = wij;
      off += wij;
    }
    w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0 - off;
  }
  return WeightMatrix(std::move(w));
}

/// 1/(d+1) on every out-neighbor and self. Needs equal in- and out-degrees.
inline WeightMatrix uniform_out_weights(const Graph& g) {
  if (g.n == 0) throw InvalidGraph("empty graph");
  const std::size_t d = g.out_degree(0);
  const auto in = g.in_degrees();
  for (std::size_t i = 0; i < g.n; ++i) {
    if (g.out_degree(i) != d)
      throw InvalidGraph("node " + std::to_string(i) + " has out-degree " +
                         std::to_string(g.out_degree(i)) + ", expected " + std::to_string(d));
    if (in[i] != d)
      throw InvalidGraph("node " + std::to_string(i) + " has in-degree " +
                         std::to_string(in[i]) + ", expected " + std::to_string(d));
  }
  if (!g.is_connected()) throw ConnectivityError("graph is not connected");
  const auto n = static_cast<Eigen::Index>(g.n);
  const double share = 1.0 / static_cast<double>(d + 1);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < g.n; ++i) {
    w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = share;
    for (auto j : g.out[i]) w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = share;
  }
  return WeightMatrix(std::move(w));
}

/// Metropolis for undirected topologies, uniform out-weights for directed ones.
inline WeightMatrix default_weights(const GraphSpec& spec) {
  Graph g = build_graph(spec);
  if (spec.n == 1) return WeightMatrix::identity(1);
  switch (spec.kind) {
    case GraphKind::DirectedRing:
    case GraphKind::Exponential:
      return uniform_out_weights(g);
    case GraphKind::Custom:
      return spec.directed ? uniform_out_weights(g) : metropolis_weights(g);
    default:
      return metropolis_weights(g);
  }
}

}  // namespace adast
