#pragma once

// Per-iteration evaluation quantities: stationarity of the averaged iterate,
// consensus error and stepsize inconsistency across nodes.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <tuple>
#include <utility>

#include "adast/errors.hpp"
#include "adast/problems.hpp"
#include "adast/state.hpp"

namespace adast {

struct TraceRecord {
  std::uint64_t k = 0;
  /// NaN when the dual set is constrained (no closed-form y*).
  double grad_phi_sq = std::numeric_limits<double>::quiet_NaN();
  double grad_xf_sq = 0.0;
  double consensus_x = 0.0;
  double consensus_y = 0.0;
  double zeta_v_inst = 0.0;
  double zeta_v_sup = 0.0;
  double zeta_u_inst = 0.0;
  double zeta_u_sup = 0.0;
  /// Within-node spread of coordinate-wise stepsizes; zero for scalar buffers.
  double zeta_hat_v = 0.0;
  double zeta_hat_u = 0.0;
  double avg_m_x = 0.0;
  double avg_m_y = 0.0;
  double global_m_x = 0.0;
  double global_m_y = 0.0;
  Vector xbar;
  Vector ybar;
};

/// ||grad Phi(xbar)||^2, unavailable for a constrained dual set.
inline std::optional<double> grad_phi_sq(const QuadraticMinimaxProblem& problem,
                                         const Vector& xbar,
                                         const ProjectionSet& set = ProjectionSet::all()) {
  if (!set.is_all()) return std::nullopt;
  return problem.grad_phi(xbar).squaredNorm();
}

namespace detail {
/// v^-e as a stepsize: an empty (zero) buffer means a zero step, as does +inf.
inline double stepsize_of(double v, double e) { return v > 0.0 ? std::pow(v, -e) : 0.0; }
}  // namespace detail

/// max_{i,j} (V_ij^-e - vbar^-e)^2 / (vbar^-e)^2 with vbar the mean of all
/// entries of V (rows are nodes; a single column for scalar buffers).
/// Zero while every buffer is still empty.
inline double inconsistency(const Matrix& v, double exponent) {
  if (v.size() == 0) return 0.0;
  const double ref = detail::stepsize_of(v.mean(), exponent);
  if (!(ref > 0.0)) return 0.0;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      const double r = (detail::stepsize_of(v(i, j), exponent) - ref) / ref;
      worst = std::max(worst, r * r);
    }
  return worst;
}

inline double inconsistency_v(const Matrix& v, double alpha) { return inconsistency(v, alpha); }
inline double inconsistency_u(const Matrix& u, double beta) { return inconsistency(u, beta); }

/// ||V^-e - (V J)^-e||^2 / (n p (vbar^-e)^2), where V J replaces each row by
/// its mean: the spread of stepsizes across coordinates of the same node.
inline double inconsistency_hat(const Matrix& v, double exponent) {
  if (v.size() == 0) return 0.0;
  const double ref = detail::stepsize_of(v.mean(), exponent);
  if (!(ref > 0.0)) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double row_pow = detail::stepsize_of(v.row(i).mean(), exponent);
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      const double diff = detail::stepsize_of(v(i, j), exponent) - row_pow;
      acc += diff * diff;
    }
  }
  return acc / (static_cast<double>(v.size()) * ref * ref);
}

/// (||X - 1 xbar'||^2, ||Y - 1 ybar'||^2), Frobenius over the node stacks.
inline std::pair<double, double> consensus_error(const Matrix& x, const Matrix& y) {
  auto spread = [](const Matrix& m) {
    if (m.rows() == 0) return 0.0;
    const Eigen::RowVectorXd mean = m.colwise().mean();
    return (m.rowwise() - mean).squaredNorm();
  };
  return {spread(x), spread(y)};
}

/// Line a x + b y = c in the (x, y) plane.
struct Line {
  double a;
  double b;
  double c;
};

inline double distance_to_line(double xbar, double ybar, const Line& line) {
  const double scale = std::hypot(line.a, line.b);
  if (!(scale > 0.0)) throw InvalidParameter("degenerate line: a = b = 0");
  return std::abs(line.a * xbar + line.b * ybar - line.c) / scale;
}

/// The stationary line 3y = 5x + 2 of the two-node case study.
inline constexpr Line case_study_line{-5.0, 3.0, 2.0};

/// Builds trace records and keeps the running suprema of the inconsistency.
class TraceRecorder {
 public:
  TraceRecorder(const QuadraticMinimaxProblem& problem, const AlgoConfig& cfg)
      : problem_(problem), cfg_(cfg) {}

  /// Fold the inconsistency of the current state into the running suprema.
  /// Call once per executed iteration (and once for the initial state).
  void observe(const RunState& s) {
    last_v_ = adaptive() ? inconsistency_v(s.v, cfg_.alpha) : 0.0;
    last_u_ = adaptive() ? inconsistency_u(s.u, cfg_.beta) : 0.0;
    sup_v_ = std::max(sup_v_, last_v_);
    sup_u_ = std::max(sup_u_, last_u_);
  }

  TraceRecord record(const RunState& s) const {
    TraceRecord r;
    r.k = s.k;
    r.xbar = s.x.colwise().mean().transpose();
    r.ybar = s.y.colwise().mean().transpose();
    if (auto g = grad_phi_sq(problem_, r.xbar, cfg_.projection)) r.grad_phi_sq = *g;
    r.grad_xf_sq = problem_.average_grad_x(r.xbar, r.ybar).squaredNorm();
    std::tie(r.consensus_x, r.consensus_y) = consensus_error(s.x, s.y);
    r.zeta_v_inst = last_v_;
    r.zeta_u_inst = last_u_;
    r.zeta_v_sup = sup_v_;
    r.zeta_u_sup = sup_u_;
    if (adaptive()) {
      r.zeta_hat_v = inconsistency_hat(s.v, cfg_.alpha);
      r.zeta_hat_u = inconsistency_hat(s.u, cfg_.beta);
    }
    r.avg_m_x = s.m_x.mean();
    r.avg_m_y = s.m_y.mean();
    r.global_m_x = s.global_m_x;
    r.global_m_y = s.global_m_y;
    return r;
  }

 private:
  bool adaptive() const { return is_adaptive(cfg_.algo); }

  const QuadraticMinimaxProblem& problem_;
  AlgoConfig cfg_;
  double last_v_ = 0.0, last_u_ = 0.0;
  double sup_v_ = 0.0, sup_u_ = 0.0;
};

}  // namespace adast
