#pragma once

// Quadratic nonconvex-strongly-concave minimax family
//   f_i(x, y) = -1/2 y'B_i y + x'A_i y - 1/2 x'C_i x + b_i'x + c_i'y,
// its exact and stochastic gradient oracles, best response and primal
// gradient, and projections onto the dual feasible set.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "adast/errors.hpp"
#include "adast/rng.hpp"

namespace adast {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct QuadraticLocal {
  Matrix B;  // d x d, symmetric positive definite
  Matrix A;  // p x d
  Matrix C;  // p x p, symmetric
  Vector b;  // p
  Vector c;  // d

  Eigen::Index p() const { return A.rows(); }
  Eigen::Index d() const { return A.cols(); }

  double value(const Vector& x, const Vector& y) const {
    return -0.5 * y.dot(B * y) + x.dot(A * y) - 0.5 * x.dot(C * x) + b.dot(x) + c.dot(y);
  }
  Vector grad_x(const Vector& x, const Vector& y) const { return A * y - C * x + b; }
  Vector grad_y(const Vector& x, const Vector& y) const {
    return -B * y + A.transpose() * x + c;
  }

  /// Scalar (p = d = 1) member.
  static QuadraticLocal scalar(double B, double A, double C, double b, double c) {
    return {Matrix::Constant(1, 1, B), Matrix::Constant(1, 1, A), Matrix::Constant(1, 1, C),
            Vector::Constant(1, b), Vector::Constant(1, c)};
  }
};

/// Convex closed set for the dual variable.
struct ProjectionSet {
  enum class Kind { All, Box, Ball };
  Kind kind = Kind::All;
  Vector lo, hi;    // Box
  Vector center;    // Ball
  double radius = 0.0;

  static ProjectionSet all() { return {}; }

  static ProjectionSet box(Vector lo, Vector hi) {
    if (lo.size() != hi.size()) throw InvalidParameter("box bounds differ in dimension");
    for (Eigen::Index j = 0; j < lo.size(); ++j)
      if (lo(j) > hi(j))
        throw InvalidParameter("invalid box: lo > hi in coordinate " + std::to_string(j));
    ProjectionSet s;
    s.kind = Kind::Box;
    s.lo = std::move(lo);
    s.hi = std::move(hi);
    return s;
  }

  static ProjectionSet ball(Vector center, double radius) {
    if (!(radius > 0.0)) throw InvalidParameter("ball radius must be positive");
    ProjectionSet s;
    s.kind = Kind::Ball;
    s.center = std::move(center);
    s.radius = radius;
    return s;
  }

  bool is_all() const noexcept { return kind == Kind::All; }
};

/// Euclidean projection onto `set`.
inline Vector project(const ProjectionSet& set, const Vector& y) {
  switch (set.kind) {
    case ProjectionSet::Kind::All:
      return y;
    case ProjectionSet::Kind::Box:
      if (set.lo.size() != y.size()) throw InvalidParameter("box dimension mismatch");
      return y.cwiseMax(set.lo).cwiseMin(set.hi);
    case ProjectionSet::Kind::Ball: {
      if (set.center.size() != y.size()) throw InvalidParameter("ball dimension mismatch");
      Vector diff = y - set.center;
      const double dist = diff.norm();
      if (dist <= set.radius) return y;
      return set.center + diff * (set.radius / dist);
    }
  }
  return y;
}

struct NoiseModel {
  enum class Kind { None, Gaussian, GaussianClipped };
  Kind kind = Kind::None;
  double sigma = 0.0;
  double clip = 0.0;

  static NoiseModel none() { return {}; }
  static NoiseModel gaussian(double sigma) { return {Kind::Gaussian, sigma, 0.0}; }
  static NoiseModel gaussian_clipped(double sigma, double clip) {
    if (!(clip > 0.0)) throw InvalidParameter("clipping bound must be positive");
    return {Kind::GaussianClipped, sigma, clip};
  }
};

struct GradientSample {
  Vector gx;
  Vector gy;
};

/// The averaged problem f = (1/n) sum_i f_i over n nodes.
class QuadraticMinimaxProblem {
 public:
  explicit QuadraticMinimaxProblem(std::vector<QuadraticLocal> locals, std::string name = "custom")
      : locals_(std::move(locals)), name_(std::move(name)) {
    if (locals_.empty()) throw InvalidParameter("problem needs at least one node");
    p_ = locals_.front().p();
    d_ = locals_.front().d();
    if (p_ == 0 || d_ == 0) throw InvalidParameter("dimensions must be positive");
    const double inv_n = 1.0 / static_cast<double>(locals_.size());
    avg_ = {Matrix::Zero(d_, d_), Matrix::Zero(p_, d_), Matrix::Zero(p_, p_),
            Vector::Zero(p_), Vector::Zero(d_)};
    mu_local_ = std::numeric_limits<double>::infinity();
    L_ = 0.0;
    for (std::size_t i = 0; i < locals_.size(); ++i) {
      const auto& f = locals_[i];
      if (f.B.rows() != d_ || f.B.cols() != d_ || f.A.rows() != p_ || f.A.cols() != d_ ||
          f.C.rows() != p_ || f.C.cols() != p_ || f.b.size() != p_ || f.c.size() != d_)
        throw InvalidParameter("node " + std::to_string(i) + " has inconsistent dimensions");
      if ((f.B - f.B.transpose()).cwiseAbs().maxCoeff() > 1e-12 ||
          (f.C - f.C.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw InvalidParameter("node " + std::to_string(i) + ": B and C must be symmetric");
      Eigen::SelfAdjointEigenSolver<Matrix> es(f.B, Eigen::EigenvaluesOnly);
      const double lmin = es.eigenvalues().minCoeff();
      if (!(lmin > 0.0))
        throw InvalidParameter("node " + std::to_string(i) +
                               ": B is not positive definite (not strongly concave in y)");
      mu_local_ = std::min(mu_local_, lmin);

      Matrix H(p_ + d_, p_ + d_);
      H << -f.C, f.A, f.A.transpose(), -f.B;
      Eigen::SelfAdjointEigenSolver<Matrix> hs(H, Eigen::EigenvaluesOnly);
      L_ = std::max(L_, hs.eigenvalues().cwiseAbs().maxCoeff());

      avg_.B += f.B * inv_n;
      avg_.A += f.A * inv_n;
      avg_.C += f.C * inv_n;
      avg_.b += f.b * inv_n;
      avg_.c += f.c * inv_n;
    }
    llt_.compute(avg_.B);
    if (llt_.info() != Eigen::Success)
      throw InvalidParameter("averaged B is not positive definite");
    Eigen::SelfAdjointEigenSolver<Matrix> es(avg_.B, Eigen::EigenvaluesOnly);
    mu_ = es.eigenvalues().minCoeff();
  }

  std::size_t n() const noexcept { return locals_.size(); }
  Eigen::Index p() const noexcept { return p_; }
  Eigen::Index d() const noexcept { return d_; }
  /// Strong-concavity modulus of the averaged B.
  double mu() const noexcept { return mu_; }
  /// Smallest strong-concavity modulus over the nodes.
  double mu_local() const noexcept { return mu_local_; }
  /// Largest spectral norm of the per-node Hessians.
  double smoothness() const noexcept { return L_; }
  const std::string& name() const noexcept { return name_; }
  const QuadraticLocal& local(std::size_t i) const { return locals_.at(i); }
  const std::vector<QuadraticLocal>& locals() const noexcept { return locals_; }
  const QuadraticLocal& average() const noexcept { return avg_; }

  // Provenance, serialized alongside runs.
  std::optional<std::uint64_t> seed;
  std::vector<double> drawn_L;

  double value(std::size_t i, const Vector& x, const Vector& y) const {
    check(x, y);
    return local(i).value(x, y);
  }
  Vector grad_x(std::size_t i, const Vector& x, const Vector& y) const {
    check(x, y);
    return local(i).grad_x(x, y);
  }
  Vector grad_y(std::size_t i, const Vector& x, const Vector& y) const {
    check(x, y);
    return local(i).grad_y(x, y);
  }

  double average_value(const Vector& x, const Vector& y) const {
    check(x, y);
    return avg_.value(x, y);
  }
  Vector average_grad_x(const Vector& x, const Vector& y) const {
    check(x, y);
    return avg_.grad_x(x, y);
  }
  Vector average_grad_y(const Vector& x, const Vector& y) const {
    check(x, y);
    return avg_.grad_y(x, y);
  }

  /// Best response of the averaged problem, B^-1 (A'x + c). Closed form only
  /// exists for an unconstrained dual set.
  Vector y_star(const Vector& x, const ProjectionSet& set = ProjectionSet::all()) const {
    require_unconstrained(set);
    if (x.size() != p_) throw InvalidParameter("x has wrong dimension");
    return llt_.solve(avg_.A.transpose() * x + avg_.c);
  }

  /// Gradient of Phi(x) = f(x, y*(x)), i.e. A y*(x) - C x + b.
  Vector grad_phi(const Vector& x, const ProjectionSet& set = ProjectionSet::all()) const {
    return avg_.grad_x(x, y_star(x, set));
  }

  double phi(const Vector& x, const ProjectionSet& set = ProjectionSet::all()) const {
    return avg_.value(x, y_star(x, set));
  }

  /// Single-node problem with the averaged coefficients.
  QuadraticMinimaxProblem collapsed() const {
    if (n() == 1) return *this;
    QuadraticMinimaxProblem out({avg_}, name_ + "-collapsed");
    out.seed = seed;
    return out;
  }

 private:
  void check(const Vector& x, const Vector& y) const {
    if (x.size() != p_ || y.size() != d_)
      throw InvalidParameter("gradient oracle called with mismatched dimensions");
  }
  static void require_unconstrained(const ProjectionSet& set) {
    if (!set.is_all())
      throw UnsupportedConfiguration("closed-form best response needs an unconstrained dual set");
  }

  std::vector<QuadraticLocal> locals_;
  std::string name_;
  Eigen::Index p_ = 0, d_ = 0;
  QuadraticLocal avg_;
  Eigen::LLT<Matrix> llt_;
  double mu_ = 0.0, mu_local_ = 0.0, L_ = 0.0;
};

/// Exact gradient plus noise, drawn from the streams of (node, iteration).
inline GradientSample sample_grad(const QuadraticMinimaxProblem& problem, std::size_t node,
                                  const Vector& x, const Vector& y, const NoiseModel& noise,
                                  const StreamFamily& streams, std::uint64_t iteration) {
  GradientSample g{problem.grad_x(node, x, y), problem.grad_y(node, x, y)};
  if (noise.kind == NoiseModel::Kind::None) return g;
  auto perturb = [&](Vector& v, Axis axis) {
    auto gen = streams.stream(node, iteration, axis);
    std::normal_distribution<double> normal(0.0, noise.sigma);
    for (Eigen::Index j = 0; j < v.size(); ++j) v(j) += normal(gen);
    if (noise.kind == NoiseModel::Kind::GaussianClipped) {
      const double norm = v.norm();
      if (norm > noise.clip) v *= noise.clip / norm;
    }
  };
  perturb(g.gx, Axis::X);
  perturb(g.gy, Axis::Y);
  return g;
}

/// Two-node case study: every point of the line 3y = 5x + 2 is stationary for
/// the average.
inline QuadraticMinimaxProblem make_two_node_case_study() {
  return QuadraticMinimaxProblem({QuadraticLocal::scalar(0.9, 1.0, 1.0, -1.0, 0.6),
                                  QuadraticLocal::scalar(0.9, 2.0, 4.0, -1.0, 0.6)},
                                 "case-study");
}

struct CounterexampleInstance {
  QuadraticMinimaxProblem problem;
  /// Initializing every node at (x0, slope * x0) freezes D-TiAda.
  double slope;
  double a;
  double b;
};

/// Three-node instance on which locally adaptive stepsizes cancel exactly.
/// Requires 0 < beta < 0.5 < alpha < 1.
inline CounterexampleInstance make_counterexample(double alpha, double beta) {
  if (!(alpha > 0.5 && alpha < 1.0))
    throw InvalidParameter("counterexample needs 0.5 < alpha < 1");
  if (!(beta > 0.0 && beta < 0.5)) throw InvalidParameter("counterexample needs 0 < beta < 0.5");
  const double a = std::pow(2.0, -1.0 / (2.0 * alpha - 1.0));
  const double b = std::pow(2.0, -1.0 / (2.0 * beta - 1.0));
  const double coupling = -(1.0 + 1.0 / a + 1.0 / b);
  QuadraticMinimaxProblem problem({QuadraticLocal::scalar(1.0, 1.0, 1.0, 0.0, 0.0),
                                   QuadraticLocal::scalar(1.0, coupling, 1.0, 0.0, 0.0),
                                   QuadraticLocal::scalar(1.0, coupling, 1.0, 0.0, 0.0)},
                                  "counterexample");
  const double slope = -(1.0 + a) / (a + a / b);
  return {std::move(problem), slope, a, b};
}

/// f_i = -1/2 y^2 + L_i x y - L_i^2/2 x^2 - 2 L_i x + L_i y.
inline QuadraticMinimaxProblem make_synthetic_from(const std::vector<double>& Ls) {
  std::vector<QuadraticLocal> locals;
  locals.reserve(Ls.size());
  for (double L : Ls) locals.push_back(QuadraticLocal::scalar(1.0, L, L * L, -2.0 * L, L));
  QuadraticMinimaxProblem problem(std::move(locals), "synthetic");
  problem.drawn_L = Ls;
  return problem;
}

/// Synthetic family with L_i ~ U(L_low, L_high) drawn from the seeded stream.
inline QuadraticMinimaxProblem make_synthetic(std::size_t n, std::uint64_t seed,
                                              double L_low = 1.5, double L_high = 2.5) {
  if (n == 0) throw InvalidParameter("synthetic problem needs n >= 1");
  if (!(L_low <= L_high)) throw InvalidParameter("L_low must not exceed L_high");
  StreamFamily streams(seed);
  std::vector<double> Ls(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto gen = streams.stream(i, 0, Axis::Instance);
    std::uniform_real_distribution<double> unif(L_low, L_high);
    Ls[i] = unif(gen);
  }
  auto problem = make_synthetic_from(Ls);
  problem.seed = seed;
  return problem;
}

/// Random p x d member of the family with lambda_min(B_i) >= mu_floor.
/// C_i is symmetric with eigenvalues of either sign (nonconvex in x).
inline QuadraticMinimaxProblem make_random(std::size_t n, Eigen::Index p, Eigen::Index d,
                                           std::uint64_t seed, double mu_floor = 0.5) {
  if (n == 0 || p <= 0 || d <= 0) throw InvalidParameter("random problem needs n, p, d >= 1");
  StreamFamily streams(seed);
  std::vector<QuadraticLocal> locals;
  locals.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto gen = streams.stream(i, 0, Axis::Instance);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto draw = [&](Eigen::Index r, Eigen::Index c) {
      Matrix m(r, c);
      for (Eigen::Index a = 0; a < r; ++a)
        for (Eigen::Index b = 0; b < c; ++b) m(a, b) = normal(gen);
      return m;
    };
    Matrix q = draw(d, d);
    Matrix B = q * q.transpose() / static_cast<double>(d) +
               mu_floor * Matrix::Identity(d, d);
    Matrix A = draw(p, d) / std::sqrt(static_cast<double>(d));
    Matrix s = draw(p, p);
    Matrix C = 0.5 * (s + s.transpose()) / std::sqrt(static_cast<double>(p));
    Vector b = draw(p, 1);
    Vector c = draw(d, 1);
    locals.push_back({B, A, C, b, c});
  }
  QuadraticMinimaxProblem problem(std::move(locals), "random");
  problem.seed = seed;
  return problem;
}

}  // namespace adast
