#include <gtest/gtest.h>

#include "dtdl/model_io.hpp"
#include "dtdl/sweep.hpp"
#include "dtdl/trainer.hpp"
#include "oracles.hpp"

using namespace dtdl;

namespace {

std::vector<Signal> two_devices(std::size_t K, std::size_t omega) {
  Signal a(K * omega, 0.0), b(K * omega, 0.0);
  for (std::size_t t = 0; t < K * omega; ++t) {
    const std::size_t k = t / omega;
    if (k % 2 == 0) a[t] = 150.0;
    if (k % 3 == 1) b[t] = (t % omega) < omega / 2 ? 900.0 : 400.0;
  }
  return {a, b};
}

WindowedDataset small_set(std::size_t K = 10, std::size_t omega = 6) {
  return make_windows(two_devices(K, omega), omega, {"a", "b"});
}

HyperParams small_hyper() {
  HyperParams hp;
  hp.omega = 6;
  hp.m = 3;
  hp.N_i = 2;
  hp.lambda1 = 0.01;
  hp.lambda4 = 1e-3;
  hp.eta = 0.1;
  hp.init_scale = 0.8;
  hp.max_outer_iters = 3;
  hp.epsilon = 1e-9;
  hp.smoothness = SmoothnessMode::Penalty;
  hp.seed = 5;
  return hp;
}

}  // namespace

TEST(Objective, MatchesDirectSum) {
  const WindowedDataset ds = small_set();
  Rng rng(3);
  const LstmAeParams p = LstmAeParams::initialize(3, rng.split("p"), 0.7);
  const Dictionary dict(oracle::random_matrix(3, 4, rng), {2, 2});
  const Eigen::MatrixXd A = oracle::random_matrix(4, 20, rng, 0.5);
  const ObjectiveTerms t = evaluate_objective(p, dict, ds, A, 0.1, 0.4, 1.2, 0.6);

  double j1 = 0, j3 = 0, j2 = 0, smooth = 0;
  for (std::size_t k = 0; k < 10; ++k)
    for (std::size_t i = 0; i < 2; ++i) {
      const Eigen::VectorXd y = ds.normalized_device(k, i);
      const Eigen::VectorXd f = encode(p, y).feature;
      const Eigen::VectorXd a = A.col(static_cast<Eigen::Index>(k * 2 + i));
      j1 += (f - dict.D * a).squaredNorm() + 0.1 * a.cwiseAbs().sum();
      j3 += (decode(p, f, 6).reconstruction - y).squaredNorm();
      if (k + 1 < 10) smooth += std::abs(a.sum() - A.col(static_cast<Eigen::Index>((k + 1) * 2 + i)).sum());
    }
  j2 = 2.0 * (dict.block(0).transpose() * dict.block(1)).squaredNorm();
  EXPECT_NEAR(t.J1, j1 / 20.0, 1e-12);
  EXPECT_NEAR(t.J3, j3 / 20.0, 1e-12);
  EXPECT_NEAR(t.J2, j2, 1e-12);
  EXPECT_NEAR(t.J4, p.flatten().squaredNorm(), 1e-12);
  EXPECT_NEAR(t.J, t.J1 + 0.4 * t.J2 + 1.2 * t.J3 + 0.6 * t.J4, 1e-12);
  EXPECT_NEAR(t.smoothness_residual, smooth / 10.0, 1e-12);
  EXPECT_THROW(evaluate_objective(p, dict, ds, A.leftCols(19), 0.1, 0.4, 1.2, 0.6), DataError);
}

TEST(Objective, SmoothnessResidualExamples) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 6);  // K = 3, L = 2
  EXPECT_DOUBLE_EQ(smoothness_residual(A, 3, 2), 0.0);
  A(0, 2) = 1.0;  // window 1, device 0
  EXPECT_DOUBLE_EQ(smoothness_residual(A, 3, 2), 2.0 / 3.0);
}

TEST(Trainer, OneOuterIterationGivesOneLogEntry) {
  HyperParams hp = small_hyper();
  hp.max_outer_iters = 1;
  int seen = 0;
  TrainObserver obs;
  obs.on_iteration = [&](const TrainingLogEntry& e) { EXPECT_EQ(e.iter, ++seen); };
  const DtdlModel m = train(small_set(), hp, obs);
  EXPECT_EQ(m.training_log.size(), 1u);
  EXPECT_EQ(seen, 1);
  EXPECT_EQ(m.status, "max_iters");
  EXPECT_EQ(m.device_names, (std::vector<std::string>{"a", "b"}));
}

TEST(Trainer, StopsWhenDictionaryStopsMoving) {
  HyperParams hp = small_hyper();
  hp.epsilon = 1e9;
  const DtdlModel m = train(small_set(), hp);
  EXPECT_EQ(m.training_log.size(), 1u);
  EXPECT_EQ(m.status, "converged");
}

TEST(Trainer, BlocksNeverRaiseTheirObjective) {
  for (const auto mode : {SmoothnessMode::Penalty, SmoothnessMode::Hard}) {
    HyperParams hp = small_hyper();
    hp.smoothness = mode;
    hp.max_outer_iters = 4;
    const DtdlModel m = train(small_set(), hp);
    for (const auto& e : m.training_log) {
      EXPECT_LE(e.lstm_after, e.lstm_before) << "iter " << e.iter;
      EXPECT_LE(e.dict_after, e.dict_before + 1e-8) << "iter " << e.iter;
      if (mode == SmoothnessMode::Penalty) {
        EXPECT_LE(e.codes_after, e.codes_before) << "iter " << e.iter;
      }
      EXPECT_TRUE(std::isfinite(e.terms.J));
    }
  }
}

TEST(Trainer, ExactDictionaryBlockWhenIncoherenceIsOff) {
  HyperParams hp = small_hyper();
  hp.lambda2 = 0.0;
  const DtdlModel m = train(small_set(), hp);
  for (const auto& e : m.training_log) EXPECT_LE(e.dict_after, e.dict_before * (1 + 1e-8) + 1e-8);
  EXPECT_LE(m.dictionary.D.colwise().norm().maxCoeff(), 1.0 + 1e-9);
}

TEST(Trainer, SameSeedSameModel) {
  const HyperParams hp = small_hyper();
  const std::string a = model_to_json(train(small_set(), hp)).dump();
  const std::string b = model_to_json(train(small_set(), hp)).dump();
  EXPECT_EQ(a, b);
  HyperParams other = hp;
  other.seed = 6;
  EXPECT_NE(model_to_json(train(small_set(), other)).dump(), a);
}

TEST(Trainer, ThreadCountDoesNotChangeTheModel) {
  HyperParams hp = small_hyper();
  const std::string one = model_to_json(train(small_set(), hp)).dump();
  hp.threads = 3;
  DtdlModel m = train(small_set(), hp);
  m.hyper.threads = 1;
  EXPECT_EQ(model_to_json(m).dump(), one);
}

TEST(Trainer, DictDeltaIsMeanAbsoluteChange) {
  HyperParams hp = small_hyper();
  hp.max_outer_iters = 1;
  const WindowedDataset ds = small_set();
  const DtdlModel m = train(ds, hp);
  const Rng root(hp.seed);
  const LstmAeParams p0 = LstmAeParams::initialize(hp.m, root.split("lstm"), hp.init_scale);
  const Dictionary d0 = init_dictionary(collect_features(p0, ds), 2, hp.N_i, root.split("dictionary"));
  EXPECT_NEAR(m.training_log.front().dict_delta, (m.dictionary.D - d0.D).cwiseAbs().mean(), 1e-15);
}

TEST(Trainer, NonFiniteObjectiveNamesTheBlock) {
  HyperParams hp = small_hyper();
  hp.lambda4 = 1e308;
  try {
    train(small_set(), hp);
    FAIL() << "expected a numeric error";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.block(), "lstm");
    EXPECT_NE(std::string(e.what()).find("lstm"), std::string::npos);
  }
}

TEST(Trainer, RejectsBadInputs) {
  HyperParams hp = small_hyper();
  EXPECT_THROW(train(small_set(1), hp), DataError);
  hp.omega = 7;
  EXPECT_THROW(train(small_set(), hp), ConfigError);
  hp = small_hyper();
  hp.eta = 0.0;
  EXPECT_THROW(train(small_set(), hp), ConfigError);
}

TEST(LstmBlock, FallbackStillNeverRaisesLoss) {
  const WindowedDataset ds = small_set();
  Rng rng(2);
  const LstmAeParams p = LstmAeParams::initialize(3, rng.split("p"), 1.0);
  const Eigen::MatrixXd targets = oracle::random_matrix(3, 20, rng, 0.3);
  for (double eta : {1e-3, 0.1, 10.0, 1e3}) {
    const LstmBlockResult r = lstm_block_step(p, ds, targets, {1.2, 1e-3}, eta, 2);
    EXPECT_LE(r.after, r.before) << "eta " << eta;
    EXPECT_NEAR(r.after, lstm_block_loss(r.params, ds, targets, {1.2, 1e-3}), 1e-12);
  }
}

TEST(Sweep, CellsAreReproducible) {
  const auto signals = two_devices(20, 6);
  const std::vector<std::string> names = {"a", "b"};
  HyperParams hp = small_hyper();
  hp.max_outer_iters = 2;
  const auto cells = architecture_grid(hp, {2, 3}, {5, 6});
  ASSERT_EQ(cells.size(), 4u);
  const auto rows = validate_grid(signals, names, 0, hp, cells);
  const auto again = validate_grid(signals, names, 0, hp, cells);
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t c = 0; c < rows.size(); ++c) {
    EXPECT_EQ(rows[c].validation_acc, again[c].validation_acc);
    EXPECT_TRUE(std::isfinite(rows[c].validation_acc));
    EXPECT_LE(rows[c].validation_acc, 100.0);
  }
  EXPECT_EQ(weight_grid(hp, {0.0, 0.2}, {1.2}, {0.1, 0.2, 0.3}).size(), 6u);
}
