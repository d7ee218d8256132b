#pragma once

// Per-iteration steppers for D-SGDA, D-TiAda, D-AdaST (scalar and
// coordinate-wise buffers) and the traced run loop.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "adast/errors.hpp"
#include "adast/metrics.hpp"
#include "adast/problems.hpp"
#include "adast/state.hpp"
#include "adast/topology.hpp"

namespace adast {

struct Trace {
  std::vector<TraceRecord> records;
};

/// A NaN or Inf showed up in a node's state. Carries the trace recorded so far.
class NumericAbort : public std::runtime_error {
 public:
  NumericAbort(std::size_t node, std::uint64_t iteration, Trace partial)
      : std::runtime_error("non-finite iterate at node " + std::to_string(node) +
                           ", iteration " + std::to_string(iteration)),
        node_(node),
        iteration_(iteration),
        partial_(std::move(partial)) {}

  std::size_t node() const noexcept { return node_; }
  std::uint64_t iteration() const noexcept { return iteration_; }
  const Trace& partial_trace() const noexcept { return partial_; }

 private:
  std::size_t node_;
  std::uint64_t iteration_;
  Trace partial_;
};

namespace detail {

/// m^-e, with a zero buffer mapped to a zero stepsize (its gradient was zero).
inline double inv_pow(double m, double e) { return m > 0.0 ? std::pow(m, -e) : 0.0; }

/// psi = m_x^a / max(m_x^a, m_y^a); exactly 1 on ties and for empty buffers.
inline double stepsize_ratio(double mx_pow, double my_pow) {
  const double top = std::max(mx_pow, my_pow);
  if (!(top > 0.0) || mx_pow >= my_pow) return 1.0;
  return mx_pow / top;
}

struct Gradients {
  Matrix gx;  // n x p
  Matrix gy;  // n x d
};

inline Gradients sample_all(const RunState& s, const QuadraticMinimaxProblem& problem,
                            const NoiseModel& noise) {
  const auto n = static_cast<Eigen::Index>(s.n());
  Gradients g{Matrix(n, problem.p()), Matrix(n, problem.d())};
  for (Eigen::Index i = 0; i < n; ++i) {
    auto sample = sample_grad(problem, static_cast<std::size_t>(i), s.x.row(i).transpose(),
                              s.y.row(i).transpose(), noise, s.streams, s.k);
    g.gx.row(i) = sample.gx.transpose();
    g.gy.row(i) = sample.gy.transpose();
  }
  return g;
}

/// Applies the adaptive local update to every node using the buffers
/// currently in s.m_x / s.m_y and records the preconditioners in s.v / s.u.
inline void adaptive_local_update(RunState& s, const Gradients& g, const AlgoConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(s.n());
  if (!is_coordinatewise(cfg.algo)) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mx = s.m_x(i, 0), my = s.m_y(i, 0);
      const double psi = stepsize_ratio(std::pow(mx, cfg.alpha), std::pow(my, cfg.alpha));
      const double sx = psi * inv_pow(mx, cfg.alpha);
      const double sy = inv_pow(my, cfg.beta);
      s.x.row(i) -= (cfg.gamma_x * sx) * g.gx.row(i);
      s.y.row(i) += (cfg.gamma_y * sy) * g.gy.row(i);
      s.v(i, 0) = std::max(mx, my);
      s.u(i, 0) = my;
    }
    return;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double nx = std::pow(s.m_x.row(i).norm(), 2.0 * cfg.alpha);
    const double ny = std::pow(s.m_y.row(i).norm(), 2.0 * cfg.alpha);
    const double psi = stepsize_ratio(nx, ny);
    const double rescale = std::pow(psi, -1.0 / cfg.alpha);
    for (Eigen::Index j = 0; j < s.x.cols(); ++j) {
      const double mx = s.m_x(i, j);
      s.x(i, j) -= cfg.gamma_x * psi * inv_pow(mx, cfg.alpha) * g.gx(i, j);
      s.v(i, j) = psi > 0.0 ? mx * rescale : std::numeric_limits<double>::infinity();
    }
    for (Eigen::Index j = 0; j < s.y.cols(); ++j) {
      const double my = s.m_y(i, j);
      s.y(i, j) += cfg.gamma_y * inv_pow(my, cfg.beta) * g.gy(i, j);
      s.u(i, j) = my;
    }
  }
}

/// Adds the squared gradients to the node buffers (plain or Hadamard).
inline void accumulate(RunState& s, const Gradients& g, bool coordinatewise) {
  if (coordinatewise) {
    s.m_x += g.gx.cwiseAbs2();
    s.m_y += g.gy.cwiseAbs2();
  } else {
    s.m_x.col(0) += g.gx.rowwise().squaredNorm();
    s.m_y.col(0) += g.gy.rowwise().squaredNorm();
  }
  s.global_m_x += g.gx.squaredNorm() / static_cast<double>(s.m_x.size());
  s.global_m_y += g.gy.squaredNorm() / static_cast<double>(s.m_y.size());
}

inline void project_rows(RunState& s, const ProjectionSet& set) {
  if (set.is_all()) return;
  for (Eigen::Index i = 0; i < s.y.rows(); ++i)
    s.y.row(i) = project(set, s.y.row(i).transpose()).transpose();
}

inline void check_dims(const RunState& s, const QuadraticMinimaxProblem& problem,
                       const WeightMatrix& w) {
  if (s.n() != problem.n() || w.size() != problem.n())
    throw InvalidParameter("state, problem and weight matrix disagree on n");
  if (s.x.cols() != problem.p() || s.y.cols() != problem.d())
    throw InvalidParameter("state and problem disagree on dimensions");
}

}  // namespace detail

/// x_i <- sum_j W_ij (x_j - gamma_x g_j^x), y_i <- P(sum_j W_ij (y_j + gamma_y g_j^y)).
inline void step_dsgda(RunState& s, const QuadraticMinimaxProblem& problem,
                       const WeightMatrix& w, const AlgoConfig& cfg, const NoiseModel& noise) {
  detail::check_dims(s, problem, w);
  const auto g = detail::sample_all(s, problem, noise);
  s.x = w.matrix() * (s.x - cfg.gamma_x * g.gx);
  s.y = w.matrix() * (s.y + cfg.gamma_y * g.gy);
  detail::project_rows(s, cfg.projection);
  ++s.k;
}

/// Locally adaptive stepsizes, buffers never leave the node.
inline void step_dtiada(RunState& s, const QuadraticMinimaxProblem& problem,
                        const WeightMatrix& w, const AlgoConfig& cfg, const NoiseModel& noise) {
  detail::check_dims(s, problem, w);
  if (s.m_x.cols() != 1 || s.m_y.cols() != 1)
    throw InvalidParameter("D-TiAda needs scalar buffers");
  const auto g = detail::sample_all(s, problem, noise);
  detail::accumulate(s, g, false);
  detail::adaptive_local_update(s, g, cfg);
  s.x = w.matrix() * s.x;
  s.y = w.matrix() * s.y;
  detail::project_rows(s, cfg.projection);
  ++s.k;
}

namespace detail {

inline void step_tracked(RunState& s, const QuadraticMinimaxProblem& problem,
                         const WeightMatrix& w, const AlgoConfig& cfg, const NoiseModel& noise,
                         bool coordinatewise) {
  check_dims(s, problem, w);
  const auto g = sample_all(s, problem, noise);
  const auto& W = w.matrix();
  if (cfg.ordering == Ordering::LocalThenMix) {
    accumulate(s, g, coordinatewise);
    adaptive_local_update(s, g, cfg);
    s.m_x = W * s.m_x;
    s.m_y = W * s.m_y;
    s.x = W * s.x;
    s.y = W * s.y;
  } else {
    accumulate(s, g, coordinatewise);
    s.m_x = W * s.m_x;
    s.m_y = W * s.m_y;
    adaptive_local_update(s, g, cfg);
    s.x = W * s.x;
    s.y = W * s.y;
  }
  project_rows(s, cfg.projection);
  ++s.k;
}

}  // namespace detail

/// Stepsize tracking with scalar buffers: the accumulated squared gradient
/// norms are gossiped together with the iterates.
inline void step_dadast(RunState& s, const QuadraticMinimaxProblem& problem,
                        const WeightMatrix& w, const AlgoConfig& cfg, const NoiseModel& noise) {
  if (s.m_x.cols() != 1 || s.m_y.cols() != 1)
    throw InvalidParameter("D-AdaST needs scalar buffers");
  detail::step_tracked(s, problem, w, cfg, noise, false);
}

/// Stepsize tracking with per-coordinate (Hadamard) buffers. The ratio psi
/// uses ||m_x||^{2 alpha} against ||m_y||^{2 alpha}.
inline void step_dadast_coordinate(RunState& s, const QuadraticMinimaxProblem& problem,
                                   const WeightMatrix& w, const AlgoConfig& cfg,
                                   const NoiseModel& noise) {
  if (s.m_x.cols() != problem.p() || s.m_y.cols() != problem.d())
    throw InvalidParameter("coordinate-wise D-AdaST needs p- and d-dimensional buffers");
  detail::step_tracked(s, problem, w, cfg, noise, true);
}

inline void step(RunState& s, const QuadraticMinimaxProblem& problem, const WeightMatrix& w,
                 const AlgoConfig& cfg, const NoiseModel& noise) {
  switch (cfg.algo) {
    case Algorithm::DSgda: return step_dsgda(s, problem, w, cfg, noise);
    case Algorithm::DTiada: return step_dtiada(s, problem, w, cfg, noise);
    case Algorithm::DAdast: return step_dadast(s, problem, w, cfg, noise);
    case Algorithm::DAdastCoordinate: return step_dadast_coordinate(s, problem, w, cfg, noise);
  }
}

/// Index of the first node holding a NaN/Inf, if any.
inline std::optional<std::size_t> first_nonfinite_node(const RunState& s) {
  for (Eigen::Index i = 0; i < s.x.rows(); ++i)
    if (!s.x.row(i).allFinite() || !s.y.row(i).allFinite() || !s.m_x.row(i).allFinite() ||
        !s.m_y.row(i).allFinite())
      return static_cast<std::size_t>(i);
  return std::nullopt;
}

struct RunOptions {
  std::size_t trace_stride = 1;
  std::uint64_t seed = 0;
};

/// Runs cfg.K iterations from `init`. Records k = 0, every multiple of
/// trace_stride, and then a final record for k = K that is appended even when
/// K is itself a multiple of the stride (K = 100, stride 10 gives 12 rows).
/// Deterministic given the seed.
/// Throws NumericAbort (with the partial trace) on a non-finite iterate.
inline Trace run(const QuadraticMinimaxProblem& problem, const WeightMatrix& w,
                 const AlgoConfig& cfg, const NoiseModel& noise, const Initialization& init,
                 const RunOptions& opts) {
  if (opts.trace_stride == 0) throw InvalidParameter("trace_stride must be positive");
  RunState s = init_state(problem, cfg, init, opts.seed);
  detail::check_dims(s, problem, w);
  TraceRecorder recorder(problem, cfg);
  Trace trace;
  trace.records.reserve(cfg.K / opts.trace_stride + 2);
  recorder.observe(s);
  trace.records.push_back(recorder.record(s));
  for (std::size_t it = 0; it < cfg.K; ++it) {
    step(s, problem, w, cfg, noise);
    if (auto bad = first_nonfinite_node(s)) throw NumericAbort(*bad, s.k, std::move(trace));
    recorder.observe(s);
    if (s.k % opts.trace_stride == 0) trace.records.push_back(recorder.record(s));
  }
  if (cfg.K > 0) trace.records.push_back(recorder.record(s));
  return trace;
}

/// Centralized TiAda on the averaged objective: a single node with W = [1].
inline Trace centralized_tiada(const QuadraticMinimaxProblem& problem, AlgoConfig cfg,
                               const NoiseModel& noise, const Vector& x0, const Vector& y0,
                               const RunOptions& opts) {
  const auto single = problem.collapsed();
  cfg.algo = Algorithm::DTiada;
  return run(single, WeightMatrix::identity(1), cfg, noise, Initialization::uniform(1, x0, y0),
             opts);
}

}  // namespace adast
