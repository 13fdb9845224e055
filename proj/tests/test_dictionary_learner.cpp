#include <gtest/gtest.h>

#include "dtdl/dictionary_learner.hpp"
#include "dtdl/gradcheck.hpp"
#include "oracles.hpp"

using namespace dtdl;

namespace {

/// Lagrangian of the norm-constrained fit at fixed multipliers.
double lagrangian(const Eigen::MatrixXd& D, const Eigen::MatrixXd& F, const Eigen::MatrixXd& A, const Eigen::VectorXd& phi) {
  return fit_value(D, F, A) + phi.dot((D.colwise().squaredNorm().transpose().array() - 1.0).matrix());
}

WindowedDataset tiny_dataset(Rng& rng, std::size_t K, std::size_t L, std::size_t omega) {
  std::vector<Signal> sig(L, Signal(K * omega));
  for (auto& s : sig)
    for (auto& v : s) v = rng.uniform(0.0, 50.0);
  return make_windows(sig, omega);
}

}  // namespace

TEST(CollectFeatures, ZeroParamsGiveZeroFeatures) {
  Rng rng(1);
  const WindowedDataset ds = tiny_dataset(rng, 3, 2, 5);
  EXPECT_TRUE(collect_features(LstmAeParams::zeros(4), ds).isZero(0.0));
}

TEST(CollectFeatures, ColumnLayoutMatchesDirectEncoding) {
  Rng rng(2);
  const WindowedDataset ds = tiny_dataset(rng, 4, 3, 6);
  const LstmAeParams p = LstmAeParams::initialize(3, rng.split("p"), 0.5);
  const Eigen::MatrixXd F = collect_features(p, ds);
  ASSERT_EQ(F.cols(), 12);
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t i = 0; i < 3; ++i)
      EXPECT_EQ(F.col(static_cast<Eigen::Index>(k * 3 + i)), encode(p, ds.normalized_device(k, i)).feature);
}

TEST(ClosedForm, IdentityCodesReturnFeatures) {
  Rng rng(3);
  const Eigen::MatrixXd F = oracle::random_matrix(4, 6, rng);
  const Dictionary d = closed_form_D(F, Eigen::MatrixXd::Identity(6, 6), Eigen::VectorXd::Zero(6), {3, 3});
  EXPECT_LE((d.D - F).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(ClosedForm, LargeMultipliersShrinkToZero) {
  Rng rng(4);
  const Eigen::MatrixXd F = oracle::random_matrix(4, 6, rng);
  const Eigen::MatrixXd A = oracle::random_matrix(3, 6, rng);
  const Dictionary d = closed_form_D(F, A, Eigen::VectorXd::Constant(3, 1e6), {3});
  EXPECT_LE(d.D.cwiseAbs().maxCoeff(), 1e-4);
}

TEST(ClosedFormProperty, MatchesNormalEquationsAndIsStationary) {
  Rng rng(5);
  for (int c = 0; c < 20; ++c) {
    const auto d = static_cast<Eigen::Index>(2 + rng.below(5));
    const auto N = static_cast<Eigen::Index>(1 + rng.below(8));
    const auto n = static_cast<Eigen::Index>(N + rng.below(6));
    const Eigen::MatrixXd F = oracle::random_matrix(d, n, rng);
    const Eigen::MatrixXd A = oracle::random_matrix(N, n, rng);
    Eigen::VectorXd phi(N);
    for (Eigen::Index j = 0; j < N; ++j) phi(j) = rng.uniform(0.0, 0.5);
    const Dictionary got = closed_form_D(F, A, phi, {N});
    // stationarity of the Lagrangian: D (A A^T / n + diag(phi)) = F A^T / n
    const Eigen::MatrixXd M = A * A.transpose() / static_cast<double>(n) + Eigen::MatrixXd(phi.asDiagonal());
    const Eigen::MatrixXd expect = (M.fullPivLu().solve(A * F.transpose() / static_cast<double>(n))).transpose();
    EXPECT_LE((got.D - expect).cwiseAbs().maxCoeff(), 1e-8) << "case " << c;
    const double base = lagrangian(got.D, F, A, phi);
    for (Eigen::Index r = 0; r < d; ++r)
      for (Eigen::Index j = 0; j < N; ++j)
        for (double h : {1e-4, -1e-4}) {
          Eigen::MatrixXd P = got.D;
          P(r, j) += h;
          EXPECT_GE(lagrangian(P, F, A, phi), base - 1e-12);
        }
  }
}

TEST(DualAscent, FeasibleUnconstrainedSolutionKeepsZeroMultipliers) {
  Rng rng(6);
  const Eigen::MatrixXd A = oracle::random_matrix(3, 10, rng);
  const Eigen::MatrixXd D0 = 0.2 * oracle::random_matrix(4, 3, rng);
  const DualAscentResult r = dual_ascent(D0 * A, A, {3});
  EXPECT_TRUE(r.converged);
  EXPECT_TRUE(r.phi.isZero(0.0));
  EXPECT_LE((r.dict.D - D0).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(DualAscent, GradientAtZeroIsNormMinusOne) {
  Rng rng(7);
  const Eigen::MatrixXd F = oracle::random_matrix(3, 8, rng);
  const Eigen::MatrixXd A = oracle::random_matrix(2, 8, rng);
  // one-sided difference at phi = 0, where the dual is still smooth from the right
  const Dictionary d0 = closed_form_D(F, A, Eigen::VectorXd::Zero(2), {2});
  const Eigen::VectorXd analytic = (d0.D.colwise().squaredNorm().transpose().array() - 1.0).matrix();
  const double g0 = dual_value(F, A, Eigen::VectorXd::Zero(2), d0.D);
  for (Eigen::Index j = 0; j < 2; ++j) {
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(2);
    phi(j) = 1e-7;
    const double numeric = (dual_value(F, A, phi, closed_form_D(F, A, phi, {2}).D) - g0) / 1e-7;
    EXPECT_NEAR(numeric, analytic(j), 1e-4 * std::max(1.0, std::abs(analytic(j))));
  }
}

TEST(DualAscentProperty, KktAtTermination) {
  Rng rng(8);
  for (int c = 0; c < 20; ++c) {
    const auto d = static_cast<Eigen::Index>(2 + rng.below(5));
    const auto N = static_cast<Eigen::Index>(1 + rng.below(8));
    const auto n = static_cast<Eigen::Index>(N + 1 + rng.below(12));
    const Eigen::MatrixXd A = oracle::random_matrix(N, n, rng, 0.3);
    const Eigen::MatrixXd F = oracle::random_matrix(d, n, rng, 2.0);
    const DualAscentResult r = dual_ascent(F, A, {N});
    EXPECT_TRUE(r.converged) << "case " << c;
    EXPECT_TRUE((r.phi.array() >= 0).all());
    const Eigen::ArrayXd g = r.dict.D.colwise().squaredNorm().transpose().array() - 1.0;
    EXPECT_LE(g.maxCoeff(), 1e-3);
    EXPECT_LE((r.phi.array() * g).abs().maxCoeff(), 1e-3);
    for (Eigen::Index j = 0; j < N; ++j)
      if (r.phi(j) > 1e-6) {
        EXPECT_NEAR(r.dict.D.col(j).norm(), 1.0, 1e-3);
      }
  }
}

TEST(Incoherence, Examples) {
  Eigen::MatrixXd D(3, 2);
  D << 1, 1, 0, 0, 0, 0;
  EXPECT_DOUBLE_EQ(incoherence_value(Dictionary(D, {1, 1})), 2.0);
  D << 1, 0, 0, 1, 0, 0;
  EXPECT_DOUBLE_EQ(incoherence_value(Dictionary(D, {1, 1})), 0.0);
}

TEST(Incoherence, MatchesDenseProductOracle) {
  Rng rng(9);
  const Dictionary dict(oracle::random_matrix(5, 7, rng), {2, 3, 2});
  double expect = 0.0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j) expect += (Eigen::MatrixXd(dict.block(i)).transpose() * Eigen::MatrixXd(dict.block(j))).squaredNorm();
  EXPECT_NEAR(incoherence_value(dict), expect, 1e-10 * expect);
}

TEST(IncoherenceGradient, ReducesToLeastSquaresAndVanishesForOrthogonalBlocks) {
  Rng rng(10);
  const Dictionary dict(oracle::random_matrix(4, 4, rng), {2, 2});
  const Eigen::MatrixXd F = oracle::random_matrix(4, 6, rng), A = oracle::random_matrix(4, 6, rng);
  const Eigen::MatrixXd ls = 2.0 / 6.0 * (dict.D * A - F) * A.transpose();
  EXPECT_LE((dictionary_gradient(dict, F, A, 0.0) - ls).cwiseAbs().maxCoeff(), 1e-12);
  const Dictionary ortho(Eigen::MatrixXd::Identity(4, 4), {2, 2});
  EXPECT_LE((dictionary_gradient(ortho, F, A, 0.9) - dictionary_gradient(ortho, F, A, 0.0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(IncoherenceGradientProperty, MatchesFiniteDifferences) {
  const Rng root(99);
  for (int c = 0; c < 20; ++c) {
    const GradCheckRow row = gradcheck_dictionary(root.split(static_cast<std::uint64_t>(c)), c);
    EXPECT_TRUE(row.pass) << "case " << c << " err " << row.max_rel_error;
  }
  Rng rng(100);
  const Dictionary dict(oracle::random_matrix(3, 4, rng), {1, 3});
  const Eigen::MatrixXd F = oracle::random_matrix(3, 4, rng), A = oracle::random_matrix(4, 4, rng);
  const Eigen::MatrixXd g = dictionary_gradient(dict, F, A, 0.7);
  Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(dict.D.data(), dict.D.size());
  const Eigen::VectorXd numeric = oracle::numeric_gradient(
      [&](const Eigen::VectorXd& x) {
        return dictionary_objective(Dictionary(Eigen::Map<const Eigen::MatrixXd>(x.data(), 3, 4), {1, 3}), F, A, 0.7);
      },
      flat);
  EXPECT_LE(oracle::max_relative_error(Eigen::Map<const Eigen::VectorXd>(g.data(), g.size()), numeric), 1e-4);
}

TEST(IncoherenceStep, NeverIncreasesObjectiveAndStaysFeasible) {
  Rng rng(11);
  for (int c = 0; c < 20; ++c) {
    Dictionary dict = project_columns(Dictionary(oracle::random_matrix(4, 6, rng), {3, 3}));
    const Eigen::MatrixXd F = oracle::random_matrix(4, 10, rng), A = oracle::random_matrix(6, 10, rng);
    const GradStepResult r = incoherence_grad_step(dict, F, A, 0.5, 10.0);
    EXPECT_LE(r.after, r.before);
    EXPECT_LE(r.dict.D.colwise().norm().maxCoeff(), 1.0 + 1e-9);
  }
}

TEST(ProjectColumns, Examples) {
  Eigen::MatrixXd D(2, 2);
  D << 2, 0.3, 0, 0.4;
  const Dictionary p = project_columns(Dictionary(D, {2}));
  EXPECT_NEAR(p.D.col(0).norm(), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(p.D(0, 0), 1.0);
  EXPECT_EQ(p.D.col(1), D.col(1));
}

TEST(ProjectColumnsProperty, BoundedAndIdempotent) {
  Rng rng(12);
  for (int c = 0; c < 20; ++c) {
    const Dictionary once = project_columns(Dictionary(oracle::random_matrix(5, 6, rng, 1.5), {6}));
    EXPECT_LE(once.D.colwise().norm().maxCoeff(), 1.0 + 1e-9);
    EXPECT_EQ(project_columns(once).D, once.D);
  }
}

TEST(InitDictionary, SamplesOwnDeviceFeatures) {
  Rng rng(13);
  const Eigen::MatrixXd F = oracle::random_matrix(3, 10 * 2, rng, 0.2);
  const Dictionary d = init_dictionary(F, 2, 4, Rng(1));
  EXPECT_EQ(d.N(), 8);
  for (std::size_t i = 0; i < 2; ++i)
    for (Eigen::Index a = 0; a < 4; ++a) {
      bool found = false;
      for (std::size_t k = 0; k < 10; ++k)
        found = found || (project_columns(Dictionary(F.col(static_cast<Eigen::Index>(k * 2 + i)), {1})).D.col(0) ==
                          d.D.col(d.offset(i) + a));
      EXPECT_TRUE(found);
    }
  EXPECT_EQ(init_dictionary(F, 2, 4, Rng(1)).D, d.D);
}
