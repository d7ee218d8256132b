#include <gtest/gtest.h>

#include <cmath>

#include "adast/algorithms.hpp"
#include "adast/metrics.hpp"

using namespace adast;

TEST(Inconsistency, TwoNodeExample) {
  Matrix v(2, 1);
  v << 1.0, 16.0;
  // vbar = 8.5; the node with v = 1 is furthest: (sqrt(8.5) - 1)^2
  const double want = std::pow(std::sqrt(8.5) - 1.0, 2);
  EXPECT_NEAR(inconsistency_v(v, 0.5), want, 1e-12);
  EXPECT_NEAR(inconsistency_v(v, 0.5), 3.6691, 1e-4);
}

TEST(Inconsistency, ZeroWhenEqual) {
  EXPECT_EQ(inconsistency_v(Matrix::Constant(5, 1, 3.7), 0.6), 0.0);
  EXPECT_EQ(inconsistency_u(Matrix::Constant(5, 3, 3.7), 0.4), 0.0);
  EXPECT_EQ(inconsistency_v(Matrix::Zero(4, 1), 0.6), 0.0);
}

TEST(Inconsistency, FlattenedMeanForCoordinateBuffers) {
  Matrix v(2, 2);
  v << 1.0, 2.0, 3.0, 6.0;
  const double ref = std::pow(3.0, -0.5);
  double want = 0.0;
  for (double e : {1.0, 2.0, 3.0, 6.0}) want = std::max(want, std::pow((std::pow(e, -0.5) - ref) / ref, 2));
  EXPECT_NEAR(inconsistency_v(v, 0.5), want, 1e-14);
}

TEST(Inconsistency, HatMeasuresWithinNodeSpread) {
  Matrix same_rows(3, 2);
  same_rows << 1.0, 1.0, 4.0, 4.0, 9.0, 9.0;
  EXPECT_NEAR(inconsistency_hat(same_rows, 0.5), 0.0, 1e-15);

  Matrix v(1, 2);
  v << 1.0, 9.0;
  // row mean 5; ref = 5^-1/2; entries 1 and 1/3 against 5^-1/2
  const double r = std::pow(5.0, -0.5);
  const double want = (std::pow(1.0 - r, 2) + std::pow(1.0 / 3.0 - r, 2)) / (2.0 * r * r);
  EXPECT_NEAR(inconsistency_hat(v, 0.5), want, 1e-14);
}

TEST(Consensus, FrobeniusSpread) {
  Matrix x(2, 1), y(2, 2);
  x << 1.0, 3.0;
  y << 0.0, 0.0, 2.0, 4.0;
  const auto [cx, cy] = consensus_error(x, y);
  EXPECT_DOUBLE_EQ(cx, 2.0);
  EXPECT_DOUBLE_EQ(cy, 1.0 + 1.0 + 4.0 + 4.0);
}

TEST(Line, Distance) {
  EXPECT_NEAR(distance_to_line(1.0, 7.0 / 3.0, case_study_line), 0.0, 1e-15);
  EXPECT_NEAR(distance_to_line(0.0, 0.0, case_study_line), 2.0 / std::sqrt(34.0), 1e-15);
  EXPECT_THROW(distance_to_line(0.0, 0.0, Line{0.0, 0.0, 1.0}), InvalidParameter);
}

TEST(GradPhi, UnavailableForConstrainedSet) {
  const auto prob = make_two_node_case_study();
  EXPECT_FALSE(grad_phi_sq(prob, Vector::Zero(1), ProjectionSet::ball(Vector::Zero(1), 1.0)));
  EXPECT_TRUE(grad_phi_sq(prob, Vector::Zero(1)));
}

TEST(Recorder, SupremumIsRunningMax) {
  const auto prob = make_two_node_case_study();
  AlgoConfig cfg;
  cfg.algo = Algorithm::DTiada;
  const auto init = Initialization::with_offsets(2, Vector::Ones(1), Vector::Ones(1), 0.01);
  const auto t = run(prob, WeightMatrix::averaging(2), cfg, NoiseModel::none(), init, {1, 0});
  double running = 0.0;
  for (const auto& r : t.records) {
    running = std::max(running, r.zeta_v_inst);
    EXPECT_EQ(r.zeta_v_sup, running);
    EXPECT_GE(r.zeta_u_sup, r.zeta_u_inst);
  }
  EXPECT_EQ(t.records.front().zeta_v_inst, 0.0);
  EXPECT_GT(t.records.back().zeta_v_inst, 0.0);
}

TEST(Recorder, DsgdaHasNoInconsistency) {
  const auto prob = make_random(3, 2, 2, 1);
  AlgoConfig cfg;
  cfg.algo = Algorithm::DSgda;
  cfg.K = 50;
  cfg.gamma_x = cfg.gamma_y = 0.01;
  const auto init = Initialization::with_offsets(3, Vector::Ones(2), Vector::Ones(2), 0.5);
  const auto t = run(prob, default_weights({3, GraphKind::Ring, {}, false}), cfg, NoiseModel::none(), init, {5, 0});
  for (const auto& r : t.records) {
    EXPECT_EQ(r.zeta_v_inst, 0.0);
    EXPECT_EQ(r.zeta_u_sup, 0.0);
  }
}

TEST(Recorder, RecordFields) {
  const auto prob = make_two_node_case_study();
  AlgoConfig cfg;
  const auto init = Initialization::with_offsets(2, Vector::Ones(1), Vector::Ones(1), 0.5);
  auto s = init_state(prob, cfg, init, 0);
  TraceRecorder rec(prob, cfg);
  rec.observe(s);
  const auto r = rec.record(s);
  EXPECT_EQ(r.k, 0u);
  EXPECT_DOUBLE_EQ(r.xbar(0), 1.25);
  EXPECT_DOUBLE_EQ(r.ybar(0), 0.75);
  EXPECT_DOUBLE_EQ(r.consensus_x, 0.125);
  EXPECT_NEAR(r.grad_xf_sq, prob.average_grad_x(r.xbar, r.ybar).squaredNorm(), 0.0);
  EXPECT_DOUBLE_EQ(r.avg_m_x, cfg.c0);
}
