#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "adast/errors.hpp"
#include "adast/problems.hpp"
#include "adast/rng.hpp"

namespace adast {

enum class Algorithm { DSgda, DTiada, DAdast, DAdastCoordinate };

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::DSgda: return "d-sgda";
    case Algorithm::DTiada: return "d-tiada";
    case Algorithm::DAdast: return "d-adast";
    case Algorithm::DAdastCoordinate: return "d-adast-coord";
  }
  return "unknown";
}

inline std::optional<Algorithm> parse_algorithm(std::string_view s) {
  if (s == "d-sgda") return Algorithm::DSgda;
  if (s == "d-tiada") return Algorithm::DTiada;
  if (s == "d-adast") return Algorithm::DAdast;
  if (s == "d-adast-coord") return Algorithm::DAdastCoordinate;
  return std::nullopt;
}

inline bool is_adaptive(Algorithm a) { return a != Algorithm::DSgda; }
inline bool is_coordinatewise(Algorithm a) { return a == Algorithm::DAdastCoordinate; }

/// Where the tracked accumulators enter the stepsize.
///  LocalThenMix: stepsizes from the locally accumulated (pre-mixing) buffers,
///    one communication round for {m_x, m_y, x, y}.
///  MixedAccumulators: buffers are mixed first and the mixed values set the
///    stepsize; variables go out in a second round.
enum class Ordering { LocalThenMix, MixedAccumulators };

inline std::string_view to_string(Ordering o) {
  return o == Ordering::LocalThenMix ? "local-then-mix" : "mixed-accumulators";
}

inline std::optional<Ordering> parse_ordering(std::string_view s) {
  if (s == "local-then-mix") return Ordering::LocalThenMix;
  if (s == "mixed-accumulators") return Ordering::MixedAccumulators;
  return std::nullopt;
}

struct AlgoConfig {
  Algorithm algo = Algorithm::DAdast;
  double gamma_x = 0.1;
  double gamma_y = 0.1;
  double alpha = 0.6;
  double beta = 0.4;
  /// Initial buffer. Zero is accepted: a buffer can then only be zero while
  /// every gradient it has seen was zero, and such steps are skipped.
  double c0 = 1e-6;
  ProjectionSet projection = ProjectionSet::all();
  std::size_t K = 1000;
  Ordering ordering = Ordering::LocalThenMix;

  void validate() const {
    if (!(gamma_x > 0.0) || !(gamma_y > 0.0))
      throw InvalidParameter("initial stepsizes must be positive");
    if (!(c0 >= 0.0) || !std::isfinite(c0)) throw InvalidParameter("c0 must be finite and >= 0");
    if (is_adaptive(algo) && !(beta > 0.0 && beta < alpha && alpha < 1.0))
      throw InvalidParameter("adaptive methods need 0 < beta < alpha < 1");
  }
};

/// One node's iterate and buffers.
struct NodeState {
  Vector x;
  Vector y;
  Vector m_x;  // size 1, or p for the coordinate-wise method
  Vector m_y;  // size 1, or d
};

/// Stacked state of all nodes: row i of every matrix belongs to node i.
struct RunState {
  Matrix x;    // n x p
  Matrix y;    // n x d
  Matrix m_x;  // n x 1 or n x p
  Matrix m_y;  // n x 1 or n x d
  /// Preconditioners behind the stepsizes applied in the latest update:
  /// x moved by gamma_x * v^-alpha * g_x, y by gamma_y * u^-beta * g_y.
  Matrix v;
  Matrix u;
  std::uint64_t k = 0;
  StreamFamily streams{0};
  /// c0 + running network mean of the squared-gradient increments, per buffer
  /// entry. Doubly-stochastic mixing must keep mean(m_x) equal to this.
  double global_m_x = 0.0;
  double global_m_y = 0.0;

  std::size_t n() const { return static_cast<std::size_t>(x.rows()); }

  NodeState node(std::size_t i) const {
    const auto r = static_cast<Eigen::Index>(i);
    return {x.row(r).transpose(), y.row(r).transpose(), m_x.row(r).transpose(),
            m_y.row(r).transpose()};
  }
};

/// Initial iterates, one row per node.
struct Initialization {
  Matrix x0;  // n x p
  Matrix y0;  // n x d

  static Initialization uniform(std::size_t n, const Vector& x, const Vector& y) {
    const auto m = static_cast<Eigen::Index>(n);
    return {x.transpose().replicate(m, 1), y.transpose().replicate(m, 1)};
  }

  /// Node i starts at (x + i*offset, y - i*offset) in every coordinate.
  static Initialization with_offsets(std::size_t n, const Vector& x, const Vector& y,
                                     double offset) {
    auto init = uniform(n, x, y);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
      init.x0.row(i).array() += offset * static_cast<double>(i);
      init.y0.row(i).array() -= offset * static_cast<double>(i);
    }
    return init;
  }
};

inline RunState init_state(const QuadraticMinimaxProblem& problem, const AlgoConfig& cfg,
                           const Initialization& init, std::uint64_t seed) {
  cfg.validate();
  const auto n = static_cast<Eigen::Index>(problem.n());
  if (init.x0.rows() != n || init.y0.rows() != n || init.x0.cols() != problem.p() ||
      init.y0.cols() != problem.d())
    throw InvalidParameter("initialization does not match problem dimensions");
  RunState s;
  s.x = init.x0;
  s.y = init.y0;
  for (Eigen::Index i = 0; i < n; ++i)
    s.y.row(i) = project(cfg.projection, s.y.row(i).transpose()).transpose();
  const bool coord = is_coordinatewise(cfg.algo);
  s.m_x = Matrix::Constant(n, coord ? problem.p() : 1, cfg.c0);
  s.m_y = Matrix::Constant(n, coord ? problem.d() : 1, cfg.c0);
  s.v = s.m_x;
  s.u = s.m_y;
  s.k = 0;
  s.streams = StreamFamily(seed);
  s.global_m_x = cfg.c0;
  s.global_m_y = cfg.c0;
  return s;
}

}  // namespace adast
