#include <gtest/gtest.h>

#include <cmath>

#include "dtdl/gradcheck.hpp"
#include "dtdl/lstm_ae.hpp"
#include "oracles.hpp"

using namespace dtdl;

namespace {

double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST(LstmStep, ZeroParamsGiveHalfGatesAndZeroState) {
  const LstmAeParams p = LstmAeParams::zeros(3);
  const StepRecord r = lstm_step(p, 1.0, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3));
  for (Eigen::Index j = 0; j < 3; ++j) {
    EXPECT_DOUBLE_EQ(r.gates(j), 0.0);
    for (int g = 1; g < 4; ++g) EXPECT_DOUBLE_EQ(r.gates(g * 3 + j), 0.5);
  }
  EXPECT_TRUE(r.S.isZero(0.0));
  EXPECT_TRUE(r.h.isZero(0.0));
}

TEST(LstmStep, SaturatedGatesKeepCellBelowOne) {
  LstmAeParams p = LstmAeParams::zeros(1);
  p.b << 50.0, 50.0, 0.0, 0.0;
  const StepRecord r = lstm_step(p, 0.0, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1));
  EXPECT_LE(r.S(0), 1.0);
  EXPECT_GT(r.S(0), 0.99);
}

TEST(LstmStep, MatchesScalarRecurrence) {
  LstmAeParams p = LstmAeParams::zeros(1);
  p.W << 0.3, -0.2, 0.5, 0.1;
  p.U << 0.7, 0.4, -0.6, 0.2;
  p.b << 0.05, -0.1, 1.0, 0.3;
  const double x = 0.8, h0 = -0.25, s0 = 0.4;
  const double a = std::tanh(0.3 * x + 0.7 * h0 + 0.05);
  const double i = sig(-0.2 * x + 0.4 * h0 - 0.1);
  const double f = sig(0.5 * x - 0.6 * h0 + 1.0);
  const double o = sig(0.1 * x + 0.2 * h0 + 0.3);
  const double s = f * s0 + i * a;
  const double h = o * std::tanh(s);
  const StepRecord r = lstm_step(p, x, Eigen::VectorXd::Constant(1, h0), Eigen::VectorXd::Constant(1, s0));
  EXPECT_NEAR(r.S(0), s, 1e-15);
  EXPECT_NEAR(r.h(0), h, 1e-15);
}

TEST(LstmAe, GateRangesAlongTape) {
  Rng rng(4);
  const LstmAeParams p = LstmAeParams::initialize(5, rng, 1.0);
  Eigen::VectorXd y(14);
  for (Eigen::Index l = 0; l < 14; ++l) y(l) = rng.uniform(-2.0, 2.0);
  const ForwardTape tape = forward(p, y);
  ASSERT_EQ(tape.steps.size(), 28u);
  for (const auto& s : tape.steps) {
    EXPECT_TRUE((s.gates.head(5).array().abs() < 1.0).all());
    EXPECT_TRUE((s.gates.tail(15).array() > 0.0).all());
    EXPECT_TRUE((s.gates.tail(15).array() < 1.0).all());
  }
  EXPECT_TRUE(tape.steps.front().h_prev.isZero(0.0));
  EXPECT_TRUE(tape.steps.front().S_prev.isZero(0.0));
}

TEST(LstmAe, ZeroInputEncodesToZero) {
  const LstmAeParams p = LstmAeParams::initialize(4, Rng(2));
  EXPECT_TRUE(encode(p, Eigen::VectorXd::Zero(10)).feature.isZero(0.0));
}

TEST(LstmAe, DecoderDependsOnlyOnFeature) {
  const LstmAeParams p = LstmAeParams::initialize(3, Rng(8), 0.7);
  Eigen::VectorXd y(6);
  y << 0.1, 0.4, -0.2, 0.9, 0.0, 0.3;
  const ForwardTape tape = forward(p, y);
  const DecodeResult d = decode(p, tape.feature(), 6);
  EXPECT_EQ(d.reconstruction, tape.reconstruction);
}

TEST(LstmAe, InitializationFollowsRecipe) {
  const LstmAeParams p = LstmAeParams::initialize(6, Rng(1));
  EXPECT_LE(p.W.cwiseAbs().maxCoeff(), 0.1);
  EXPECT_LE(p.U.cwiseAbs().maxCoeff(), 0.1);
  EXPECT_TRUE(p.b.segment(0, 12).isZero(0.0));
  EXPECT_TRUE(p.b.segment(12, 6).isOnes(0.0));
  EXPECT_TRUE(p.b.segment(18, 6).isZero(0.0));
  const LstmAeParams q = LstmAeParams::initialize(6, Rng(1));
  EXPECT_EQ(p.flatten(), q.flatten());
}

TEST(LstmAe, FlattenRoundTrip) {
  const LstmAeParams p = LstmAeParams::initialize(4, Rng(12), 0.5);
  const Eigen::VectorXd flat = p.flatten();
  EXPECT_EQ(flat.size(), p.size());
  EXPECT_EQ(LstmAeParams::unflatten(4, flat).flatten(), flat);
}

TEST(LstmAeProperty, BackwardMatchesFiniteDifferences) {
  const Rng root(2024);
  for (int c = 0; c < 12; ++c) {
    Rng rng = root.split(static_cast<std::uint64_t>(c));
    const auto m = static_cast<Eigen::Index>(1 + rng.below(4));
    const auto omega = static_cast<Eigen::Index>(2 + rng.below(5));
    LstmAeParams p = LstmAeParams::initialize(m, rng.split("p"), 0.6);
    p.readout_c = rng.uniform(-1.0, 1.0);
    const Eigen::VectorXd y = oracle::random_matrix(omega, 1, rng).col(0);
    const Eigen::VectorXd target = oracle::random_matrix(m, 1, rng, 0.3).col(0);
    const LossWeights w{rng.uniform(0.2, 2.0), rng.uniform(0.0, 1.0)};
    const Eigen::VectorXd analytic = backward(p, forward(p, y), target, y, w).flatten();
    const Eigen::VectorXd numeric = oracle::numeric_gradient(
        [&](const Eigen::VectorXd& th) { return snippet_loss(LstmAeParams::unflatten(m, th), y, target, w); },
        p.flatten());
    EXPECT_LE(oracle::max_relative_error(analytic, numeric), 1e-4) << "case " << c;
  }
}

TEST(LstmAe, GradcheckHarnessPasses) {
  for (const auto& row : gradcheck_all(1, 5)) EXPECT_TRUE(row.pass) << row.name << " " << row.case_index << " " << row.max_rel_error;
}

TEST(LstmAe, RegularizerGradientIsLambdaTheta) {
  // with zero loss signal only the regularizer remains: grad = lambda4 * theta
  LstmAeParams p = LstmAeParams::initialize(2, Rng(3), 0.5);
  const Eigen::VectorXd y = Eigen::VectorXd::Zero(4);
  const ForwardTape tape = forward(p, y);
  const LossWeights w0{0.0, 0.0}, w1{0.0, 0.7};
  const Eigen::VectorXd g0 = backward(p, tape, tape.feature(), y, w0).flatten();
  const Eigen::VectorXd g1 = backward(p, tape, tape.feature(), y, w1).flatten();
  EXPECT_LE((g1 - g0 - 0.7 * p.flatten()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(LstmAe, DescendSnippetNeverIncreasesLoss) {
  Rng rng(77);
  LstmAeParams p = LstmAeParams::initialize(3, rng.split("p"), 0.5);
  const LossWeights w{1.2, 0.01};
  for (int s = 0; s < 30; ++s) {
    const Eigen::VectorXd y = oracle::random_matrix(8, 1, rng, 0.5).col(0);
    const Eigen::VectorXd t = oracle::random_matrix(3, 1, rng, 0.1).col(0);
    const DescentResult r = descend_snippet(p, y, t, w, 5.0);
    EXPECT_LE(r.loss_after, r.loss_before);
    EXPECT_NEAR(r.loss_after, snippet_loss(r.params, y, t, w), 1e-12);
    p = r.params;
  }
}

TEST(LstmAe, BackwardRejectsMismatchedTargets) {
  const LstmAeParams p = LstmAeParams::zeros(2);
  const Eigen::VectorXd y = Eigen::VectorXd::Zero(4);
  const ForwardTape tape = forward(p, y);
  EXPECT_THROW(backward(p, tape, Eigen::VectorXd::Zero(3), y, {}), DataError);
  EXPECT_THROW(backward(p, tape, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(5), {}), DataError);
}
