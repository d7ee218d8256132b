#include <gtest/gtest.h>

#include <cmath>

#include "adast/algorithms.hpp"
#include "oracles.hpp"

using namespace adast;

namespace {

GraphSpec ring(std::size_t n) { return {n, GraphKind::Ring, {}, false}; }

AlgoConfig config(Algorithm a, std::size_t K = 1000) {
  AlgoConfig c;
  c.algo = a;
  c.K = K;
  return c;
}

/// Plain per-node loops of the pseudo-code, exact gradients.
struct Reference {
  const QuadraticMinimaxProblem& prob;
  Matrix W;
  AlgoConfig cfg;
  Matrix x, y, mx, my;

  Reference(const QuadraticMinimaxProblem& p, const Matrix& w, const AlgoConfig& c,
            const Initialization& init)
      : prob(p), W(w), cfg(c), x(init.x0), y(init.y0) {
    const auto n = static_cast<Eigen::Index>(p.n());
    const bool coord = c.algo == Algorithm::DAdastCoordinate;
    mx = Matrix::Constant(n, coord ? p.p() : 1, c.c0);
    my = Matrix::Constant(n, coord ? p.d() : 1, c.c0);
  }

  void step() {
    const auto n = x.rows();
    Matrix nx = x, ny = y;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& f = prob.local(static_cast<std::size_t>(i));
      const Vector xi = x.row(i).transpose(), yi = y.row(i).transpose();
      const Vector gx = f.A * yi - f.C * xi + f.b;
      const Vector gy = -f.B * yi + f.A.transpose() * xi + f.c;
      switch (cfg.algo) {
        case Algorithm::DSgda:
          nx.row(i) = (xi - cfg.gamma_x * gx).transpose();
          ny.row(i) = (yi + cfg.gamma_y * gy).transpose();
          break;
        case Algorithm::DTiada: {
          mx(i, 0) += gx.squaredNorm();
          my(i, 0) += gy.squaredNorm();
          const double sx = cfg.gamma_x / std::pow(std::max(mx(i, 0), my(i, 0)), cfg.alpha);
          nx.row(i) = (xi - sx * gx).transpose();
          ny.row(i) = (yi + cfg.gamma_y / std::pow(my(i, 0), cfg.beta) * gy).transpose();
          break;
        }
        case Algorithm::DAdast: {
          mx(i, 0) += gx.squaredNorm();
          my(i, 0) += gy.squaredNorm();
          const double ax = std::pow(mx(i, 0), cfg.alpha), ay = std::pow(my(i, 0), cfg.alpha);
          const double psi = ax / std::max(ax, ay);
          nx.row(i) = (xi - cfg.gamma_x * psi / ax * gx).transpose();
          ny.row(i) = (yi + cfg.gamma_y / std::pow(my(i, 0), cfg.beta) * gy).transpose();
          break;
        }
        case Algorithm::DAdastCoordinate: {
          mx.row(i) += gx.cwiseAbs2().transpose();
          my.row(i) += gy.cwiseAbs2().transpose();
          const double ax = std::pow(mx.row(i).norm(), 2 * cfg.alpha);
          const double ay = std::pow(my.row(i).norm(), 2 * cfg.alpha);
          const double psi = ax / std::max(ax, ay);
          for (Eigen::Index j = 0; j < x.cols(); ++j)
            nx(i, j) = xi(j) - cfg.gamma_x * psi * std::pow(mx(i, j), -cfg.alpha) * gx(j);
          for (Eigen::Index j = 0; j < y.cols(); ++j)
            ny(i, j) = yi(j) + cfg.gamma_y * std::pow(my(i, j), -cfg.beta) * gy(j);
          break;
        }
      }
    }
    x = W * nx;
    y = W * ny;
    if (cfg.algo == Algorithm::DAdast || cfg.algo == Algorithm::DAdastCoordinate) {
      mx = W * mx;
      my = W * my;
    }
  }
};

double rel(const Matrix& a, const Matrix& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

}  // namespace

class AgainstReference : public ::testing::TestWithParam<Algorithm> {};

TEST_P(AgainstReference, TwoHundredSteps) {
  const auto prob = make_random(5, 3, 2, 4);
  const auto w = default_weights(ring(5));
  auto cfg = config(GetParam());
  cfg.gamma_x = 0.05;
  cfg.gamma_y = 0.05;
  Vector x0(3), y0(2);
  x0 << 0.5, -1.0, 0.25;
  y0 << 1.0, -0.5;
  const auto init = Initialization::with_offsets(5, x0, y0, 0.1);
  auto s = init_state(prob, cfg, init, 0);
  Reference ref(prob, w.matrix(), cfg, init);
  for (int k = 0; k < 200; ++k) {
    step(s, prob, w, cfg, NoiseModel::none());
    ref.step();
    ASSERT_LT(rel(s.x, ref.x), 1e-12) << "k=" << k;
    ASSERT_LT(rel(s.y, ref.y), 1e-12) << "k=" << k;
    ASSERT_LT(rel(s.m_x, ref.mx), 1e-12) << "k=" << k;
    ASSERT_LT(rel(s.m_y, ref.my), 1e-12) << "k=" << k;
  }
  EXPECT_EQ(s.k, 200u);
}

INSTANTIATE_TEST_SUITE_P(AllMethods, AgainstReference,
                         ::testing::Values(Algorithm::DSgda, Algorithm::DTiada, Algorithm::DAdast,
                                           Algorithm::DAdastCoordinate),
                         [](const auto& info) {
                           std::string s(to_string(info.param));
                           for (auto& ch : s)
                             if (ch == '-') ch = '_';
                           return s;
                         });

TEST(Steppers, DsgdaHandExample) {
  // f = -y^2/2 + x y - x^2/2 on one node: g = (y - x, x - y)
  const QuadraticMinimaxProblem prob({QuadraticLocal::scalar(1, 1, 1, 0, 0)});
  auto cfg = config(Algorithm::DSgda);
  cfg.gamma_x = 0.5;
  cfg.gamma_y = 0.25;
  auto s = init_state(prob, cfg, Initialization::uniform(1, Vector::Constant(1, 2.0),
                                                         Vector::Constant(1, 0.0)),
                      0);
  step(s, prob, WeightMatrix::identity(1), cfg, NoiseModel::none());
  EXPECT_DOUBLE_EQ(s.x(0, 0), 2.0 - 0.5 * (0.0 - 2.0));
  EXPECT_DOUBLE_EQ(s.y(0, 0), 0.0 + 0.25 * (2.0 - 0.0));
}

TEST(Steppers, TiadaHandExample) {
  // g = (-2, 2) at (2, 0); m_x = m_y = 1 + 4 = 5
  const QuadraticMinimaxProblem prob({QuadraticLocal::scalar(1, 1, 1, 0, 0)});
  auto cfg = config(Algorithm::DTiada);
  cfg.c0 = 1.0;
  cfg.gamma_x = 0.3;
  cfg.gamma_y = 0.7;
  auto s = init_state(prob, cfg, Initialization::uniform(1, Vector::Constant(1, 2.0),
                                                         Vector::Constant(1, 0.0)),
                      0);
  step(s, prob, WeightMatrix::identity(1), cfg, NoiseModel::none());
  EXPECT_DOUBLE_EQ(s.m_x(0, 0), 5.0);
  EXPECT_NEAR(s.x(0, 0), 2.0 + 0.3 * 2.0 * std::pow(5.0, -0.6), 1e-15);
  EXPECT_NEAR(s.y(0, 0), 0.0 + 0.7 * 2.0 * std::pow(5.0, -0.4), 1e-15);
}

TEST(Steppers, RatioEqualsMaxRule) {
  // gamma psi m_x^-a == gamma max(m_x, m_y)^-a
  for (double mx : {1e-6, 0.3, 1.0, 7.0, 1e6})
    for (double my : {1e-6, 0.3, 1.0, 7.0, 1e6}) {
      const double a = 0.6;
      const double psi = detail::stepsize_ratio(std::pow(mx, a), std::pow(my, a));
      EXPECT_LE(psi, 1.0);
      EXPECT_NEAR(psi * std::pow(mx, -a), std::pow(std::max(mx, my), -a),
                  1e-14 * std::pow(std::max(mx, my), -a));
    }
  EXPECT_EQ(detail::stepsize_ratio(0.0, 0.0), 1.0);
}

TEST(Steppers, OrderingsAgreeWithoutMixing) {
  const auto prob = make_random(3, 2, 2, 8);
  auto a = config(Algorithm::DAdast), b = a;
  b.ordering = Ordering::MixedAccumulators;
  const auto init = Initialization::with_offsets(3, Vector::Ones(2), Vector::Zero(2), 0.3);
  auto sa = init_state(prob, a, init, 0), sb = init_state(prob, b, init, 0);
  const auto id = WeightMatrix::identity(3);
  for (int k = 0; k < 20; ++k) {
    step(sa, prob, id, a, NoiseModel::none());
    step(sb, prob, id, b, NoiseModel::none());
  }
  EXPECT_EQ(sa.x, sb.x);
  EXPECT_EQ(sa.y, sb.y);
}

TEST(Steppers, OrderingsDivergeWithHeterogeneousNodes) {
  const auto prob = make_random(4, 2, 2, 8);
  auto a = config(Algorithm::DAdast), b = a;
  b.ordering = Ordering::MixedAccumulators;
  const auto init = Initialization::with_offsets(4, Vector::Ones(2), Vector::Zero(2), 0.3);
  auto sa = init_state(prob, a, init, 0), sb = init_state(prob, b, init, 0);
  const auto w = default_weights(ring(4));
  step(sa, prob, w, a, NoiseModel::none());
  step(sb, prob, w, b, NoiseModel::none());
  EXPECT_GT((sa.x - sb.x).norm(), 1e-6);
  // buffers end identical: both mix the same accumulated values once
  EXPECT_LT((sa.m_x - sb.m_x).norm(), 1e-12 * sa.m_x.norm());
}

TEST(Steppers, MixedAccumulatorOrderingMatchesHandLoop) {
  const auto prob = make_random(3, 1, 1, 2);
  auto cfg = config(Algorithm::DAdast);
  cfg.ordering = Ordering::MixedAccumulators;
  const auto w = default_weights(ring(3));
  const auto init = Initialization::with_offsets(3, Vector::Ones(1), Vector::Zero(1), 0.5);
  auto s = init_state(prob, cfg, init, 0);
  step(s, prob, w, cfg, NoiseModel::none());

  Vector mx(3), my(3), gx(3), gy(3);
  for (int i = 0; i < 3; ++i) {
    gx(i) = prob.grad_x(i, init.x0.row(i).transpose(), init.y0.row(i).transpose())(0);
    gy(i) = prob.grad_y(i, init.x0.row(i).transpose(), init.y0.row(i).transpose())(0);
    mx(i) = cfg.c0 + gx(i) * gx(i);
    my(i) = cfg.c0 + gy(i) * gy(i);
  }
  const Vector mxw = w.matrix() * mx, myw = w.matrix() * my;
  Vector nx(3);
  for (int i = 0; i < 3; ++i)
    nx(i) = init.x0(i, 0) - cfg.gamma_x * std::pow(std::max(mxw(i), myw(i)), -cfg.alpha) * gx(i);
  EXPECT_LT((s.x.col(0) - w.matrix() * nx).norm(), 1e-13);
}

TEST(Steppers, ConservationOfTrackedBuffers) {
  const auto prob = make_random(6, 2, 3, 9);
  const auto w = default_weights({6, GraphKind::Exponential, {}, false});
  for (auto algo : {Algorithm::DAdast, Algorithm::DAdastCoordinate}) {
    auto cfg = config(algo);
    auto s = init_state(prob, cfg, Initialization::uniform(6, Vector::Ones(2), Vector::Ones(3)), 3);
    for (int k = 0; k < 500; ++k) {
      step(s, prob, w, cfg, NoiseModel::gaussian(0.3));
      EXPECT_LE(std::abs(s.m_x.mean() - s.global_m_x) / s.m_x.mean(), 1e-12);
      EXPECT_LE(std::abs(s.m_y.mean() - s.global_m_y) / s.m_y.mean(), 1e-12);
    }
  }
}

TEST(Steppers, TrackingEqualisesBuffersOnCompleteGraph) {
  const auto prob = make_random(4, 2, 2, 9);
  auto cfg = config(Algorithm::DAdast);
  auto s = init_state(prob, cfg, Initialization::with_offsets(4, Vector::Ones(2), Vector::Ones(2), 1.0), 0);
  step(s, prob, WeightMatrix::averaging(4), cfg, NoiseModel::none());
  EXPECT_LT((s.m_x.array() - s.m_x.mean()).abs().maxCoeff(), 1e-12 * s.m_x.mean());
}

TEST(Steppers, ProjectionApplied) {
  const auto prob = make_random(3, 2, 2, 1);
  auto cfg = config(Algorithm::DAdast);
  cfg.gamma_y = 10.0;
  cfg.projection = ProjectionSet::ball(Vector::Zero(2), 0.1);
  auto s = init_state(prob, cfg, Initialization::uniform(3, Vector::Ones(2), Vector::Constant(2, 5.0)), 0);
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_LE(s.y.row(i).norm(), 0.1 + 1e-15);
  for (int k = 0; k < 10; ++k) {
    step(s, prob, default_weights(ring(3)), cfg, NoiseModel::none());
    for (Eigen::Index i = 0; i < 3; ++i) EXPECT_LE(s.y.row(i).norm(), 0.1 + 1e-12);
  }
}

TEST(Steppers, BufferShapeChecked) {
  const auto prob = make_random(2, 2, 2, 1);
  auto scalar = config(Algorithm::DAdast);
  auto s = init_state(prob, scalar, Initialization::uniform(2, Vector::Ones(2), Vector::Ones(2)), 0);
  EXPECT_THROW(step_dadast_coordinate(s, prob, default_weights(ring(2)), config(Algorithm::DAdastCoordinate),
                                      NoiseModel::none()),
               InvalidParameter);
  EXPECT_THROW(step(s, prob, default_weights(ring(3)), scalar, NoiseModel::none()), InvalidParameter);
}

TEST(Config, Validation) {
  auto c = config(Algorithm::DAdast);
  c.alpha = 0.4;
  c.beta = 0.6;
  EXPECT_THROW(c.validate(), InvalidParameter);
  c = config(Algorithm::DSgda);
  c.alpha = 0.4;
  c.beta = 0.6;
  EXPECT_NO_THROW(c.validate());
  c.gamma_x = 0.0;
  EXPECT_THROW(c.validate(), InvalidParameter);
  c = config(Algorithm::DTiada);
  c.c0 = -1.0;
  EXPECT_THROW(c.validate(), InvalidParameter);
}

TEST(Run, CountingRule) {
  const auto prob = make_two_node_case_study();
  const auto init = Initialization::with_offsets(2, Vector::Ones(1), Vector::Ones(1), 0.01);
  auto cfg = config(Algorithm::DAdast, 100);
  auto t = run(prob, WeightMatrix::averaging(2), cfg, NoiseModel::none(), init, {10, 0});
  ASSERT_EQ(t.records.size(), 12u);
  EXPECT_EQ(t.records.front().k, 0u);
  EXPECT_EQ(t.records[10].k, 100u);
  EXPECT_EQ(t.records[11].k, 100u);
  cfg.K = 105;
  t = run(prob, WeightMatrix::averaging(2), cfg, NoiseModel::none(), init, {10, 0});
  ASSERT_EQ(t.records.size(), 12u);
  EXPECT_EQ(t.records.back().k, 105u);
  cfg.K = 0;
  t = run(prob, WeightMatrix::averaging(2), cfg, NoiseModel::none(), init, {10, 0});
  EXPECT_EQ(t.records.size(), 1u);
  EXPECT_THROW(run(prob, WeightMatrix::averaging(2), cfg, NoiseModel::none(), init, {0, 0}),
               InvalidParameter);
}

TEST(Run, DeterministicGivenSeed) {
  const auto prob = make_random(4, 2, 2, 3);
  const auto w = default_weights(ring(4));
  const auto init = Initialization::uniform(4, Vector::Zero(2), Vector::Zero(2));
  const auto cfg = config(Algorithm::DAdast, 300);
  const auto a = run(prob, w, cfg, NoiseModel::gaussian(0.5), init, {7, 11});
  const auto b = run(prob, w, cfg, NoiseModel::gaussian(0.5), init, {7, 11});
  const auto c = run(prob, w, cfg, NoiseModel::gaussian(0.5), init, {7, 12});
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].xbar, b.records[i].xbar);
    EXPECT_EQ(a.records[i].grad_xf_sq, b.records[i].grad_xf_sq);
  }
  EXPECT_NE(a.records.back().xbar, c.records.back().xbar);
}

TEST(Run, NumericAbortCarriesPartialTrace) {
  // D-SGDA on the case study blows up: the GDA Jacobian has an eigenvalue 1.6 at gamma 1
  const auto prob = make_two_node_case_study();
  auto cfg = config(Algorithm::DSgda, 100000);
  cfg.gamma_x = cfg.gamma_y = 1.0;
  const auto init = Initialization::uniform(2, Vector::Ones(1), Vector::Ones(1));
  try {
    run(prob, WeightMatrix::averaging(2), cfg, NoiseModel::none(), init, {1, 0});
    FAIL() << "expected NumericAbort";
  } catch (const NumericAbort& e) {
    EXPECT_GT(e.iteration(), 0u);
    EXPECT_LT(e.node(), 2u);
    ASSERT_FALSE(e.partial_trace().records.empty());
    EXPECT_EQ(e.partial_trace().records.back().k + 1, e.iteration());
  }
}

TEST(Run, CentralizedLimitIsBitIdentical) {
  const auto prob = make_random(1, 3, 2, 17);
  auto cfg = config(Algorithm::DAdast, 1000);
  const Vector x0 = Vector::Constant(3, 0.4), y0 = Vector::Constant(2, -0.2);
  const auto a = run(prob, WeightMatrix::identity(1), cfg, NoiseModel::gaussian(0.1),
                     Initialization::uniform(1, x0, y0), {1, 5});
  const auto b = centralized_tiada(prob, cfg, NoiseModel::gaussian(0.1), x0, y0, {1, 5});
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    ASSERT_EQ(a.records[i].xbar, b.records[i].xbar) << i;
    ASSERT_EQ(a.records[i].ybar, b.records[i].ybar) << i;
  }
}

TEST(Run, CentralizedTiadaMatchesHandLoop) {
  // independent scalar TiAda on the averaged objective
  const auto prob = make_synthetic(5, 2);
  auto cfg = config(Algorithm::DTiada, 300);
  const auto t = centralized_tiada(prob, cfg, NoiseModel::none(), Vector::Zero(1), Vector::Zero(1), {1, 0});
  const auto& f = prob.average();
  double x = 0, y = 0, mx = cfg.c0, my = cfg.c0;
  for (int k = 0; k < 300; ++k) {
    const double gx = f.A(0, 0) * y - f.C(0, 0) * x + f.b(0);
    const double gy = -f.B(0, 0) * y + f.A(0, 0) * x + f.c(0);
    mx += gx * gx;
    my += gy * gy;
    x -= cfg.gamma_x * gx / std::pow(std::max(mx, my), cfg.alpha);
    y += cfg.gamma_y * gy / std::pow(my, cfg.beta);
  }
  EXPECT_NEAR(t.records.back().xbar(0), x, 1e-12 * std::max(1.0, std::abs(x)));
  EXPECT_NEAR(t.records.back().ybar(0), y, 1e-12 * std::max(1.0, std::abs(y)));
}
