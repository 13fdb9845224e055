#pragma once

// Alternating minimization: LSTM block, dictionary block, sparse-code block,
// repeated until the dictionary stops moving.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "dtdl/dictionary_learner.hpp"
#include "dtdl/error.hpp"
#include "dtdl/lstm_ae.hpp"
#include "dtdl/model.hpp"
#include "dtdl/parallel.hpp"
#include "dtdl/rng.hpp"
#include "dtdl/signal_data.hpp"
#include "dtdl/sparse_coder.hpp"

namespace dtdl {

inline CodingOptions coding_options(const HyperParams& hp) {
  CodingOptions co;
  co.admm = hp.admm;
  co.mode = hp.smoothness;
  co.penalty_weight = hp.penalty_weight;
  co.threads = hp.threads;
  return co;
}

/// (1/K) sum_i sum_k |1^T a^i(k) - 1^T a^i(k+1)|.
inline double smoothness_residual(const Eigen::MatrixXd& A, std::size_t K, std::size_t L) {
  if (K == 0) return 0.0;
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < K; ++k)
    for (std::size_t i = 0; i < L; ++i)
      s += std::abs(A.col(static_cast<Eigen::Index>(k * L + i)).sum() - A.col(static_cast<Eigen::Index>((k + 1) * L + i)).sum());
  return s / static_cast<double>(K);
}

/// J = J1 + lambda2 J2 + lambda3 J3 + lambda4 J4 with
///   J1 = 1/(LK) sum ||F_enc(y_i(k)) - D_i a^i(k)||^2 + lambda1 ||a^i(k)||_1
///   J2 = sum_i sum_{j != i} ||D_i^T D_j||_F^2
///   J3 = 1/(LK) sum ||F_dec(F_enc(y_i(k))) - y_i(k)||^2
///   J4 = ||theta||^2.
inline ObjectiveTerms evaluate_objective(const LstmAeParams& p, const Dictionary& dict, const WindowedDataset& ds,
                                         const Eigen::MatrixXd& A, double lambda1, double lambda2, double lambda3,
                                         double lambda4) {
  const std::size_t K = ds.K(), L = ds.L();
  if (A.cols() != static_cast<Eigen::Index>(K * L) || A.rows() != dict.N())
    throw DataError("evaluate_objective: code matrix shape does not match the dataset");
  ObjectiveTerms t;
  const double lk = static_cast<double>(K * L);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t i = 0; i < L; ++i) {
      const Eigen::VectorXd y = ds.normalized_device(k, i);
      const ForwardTape tape = forward(p, y);
      const auto a = A.col(static_cast<Eigen::Index>(k * L + i));
      t.J1 += (tape.feature() - dict.D * a).squaredNorm() + lambda1 * a.lpNorm<1>();
      t.J3 += (tape.reconstruction - y).squaredNorm();
    }
  if (K > 0 && L > 0) {
    t.J1 /= lk;
    t.J3 /= lk;
  }
  t.J2 = incoherence_value(dict);
  t.J4 = p.squared_norm();
  t.J = t.J1 + lambda2 * t.J2 + lambda3 * t.J3 + lambda4 * t.J4;
  t.smoothness_residual = smoothness_residual(A, K, L);
  return t;
}

inline ObjectiveTerms evaluate_objective(const DtdlModel& model, const WindowedDataset& ds, const Eigen::MatrixXd& A) {
  const auto& h = model.hyper;
  return evaluate_objective(model.lstm, model.dictionary, ds, A, h.lambda1, h.lambda2, h.lambda3, h.lambda4);
}

// ---------------------------------------------------------------------------
// LSTM block

/// Mean over snippets of the per-snippet loss
///   ||F_enc(y) - D_i a^i(k)||^2 + lambda3 ||F_dec(F_enc(y)) - y||^2 + (lambda4/2) ||theta||^2.
inline double lstm_block_loss(const LstmAeParams& p, const WindowedDataset& ds, const Eigen::MatrixXd& targets,
                              const LossWeights& w, int threads = 1) {
  const std::size_t K = ds.K(), L = ds.L();
  std::vector<double> parts(K * L);
  parallel_for(K * L, threads, [&](std::size_t j) {
    const Eigen::VectorXd y = ds.normalized_device(j / L, j % L);
    const ForwardTape tape = forward(p, y);
    parts[j] = (tape.feature() - targets.col(static_cast<Eigen::Index>(j))).squaredNorm() +
               w.recon_weight * (tape.reconstruction - y).squaredNorm();
  });
  double s = 0.0;
  for (double v : parts) s += v;  // fixed order
  return s / static_cast<double>(K * L) + 0.5 * w.lambda4 * p.squared_norm();
}

inline ParamGradients lstm_block_gradient(const LstmAeParams& p, const WindowedDataset& ds,
                                          const Eigen::MatrixXd& targets, const LossWeights& w, int threads = 1) {
  const std::size_t K = ds.K(), L = ds.L();
  std::vector<ParamGradients> parts(K * L);
  const LossWeights no_reg{w.recon_weight, 0.0};
  parallel_for(K * L, threads, [&](std::size_t j) {
    const Eigen::VectorXd y = ds.normalized_device(j / L, j % L);
    parts[j] = backward(p, forward(p, y), targets.col(static_cast<Eigen::Index>(j)), y, no_reg);
  });
  ParamGradients g = ParamGradients::zeros(p.m);
  for (const auto& part : parts) g += part;
  g *= 1.0 / static_cast<double>(K * L);
  g.dW += w.lambda4 * p.W;
  g.dU += w.lambda4 * p.U;
  g.db += w.lambda4 * p.b;
  g.d_readout_v += w.lambda4 * p.readout_v;
  g.d_readout_c += w.lambda4 * p.readout_c;
  return g;
}

struct LstmBlockResult {
  LstmAeParams params;
  double before = 0.0, after = 0.0;
  bool fell_back = false;  // the per-snippet pass raised the block loss
};

/// epochs of per-snippet steps in (k, i) order, each guarded by halving. If
/// the pass raises the dataset loss it is discarded and replaced by
/// full-batch steps with the same halving guard.
inline LstmBlockResult lstm_block_step(const LstmAeParams& p, const WindowedDataset& ds, const Eigen::MatrixXd& targets,
                                       const LossWeights& w, double eta, int epochs, int threads = 1) {
  LstmBlockResult out;
  out.before = lstm_block_loss(p, ds, targets, w, threads);
  const std::size_t K = ds.K(), L = ds.L();
  LstmAeParams cur = p;
  for (int e = 0; e < epochs; ++e)
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t i = 0; i < L; ++i)
        cur = descend_snippet(cur, ds.normalized_device(k, i), targets.col(static_cast<Eigen::Index>(k * L + i)), w, eta)
                  .params;
  double after = lstm_block_loss(cur, ds, targets, w, threads);
  if (std::isfinite(after) && after <= out.before) {
    out.params = std::move(cur);
    out.after = after;
    return out;
  }
  out.fell_back = true;
  cur = p;
  after = out.before;
  for (int e = 0; e < epochs; ++e) {
    const ParamGradients g = lstm_block_gradient(cur, ds, targets, w, threads);
    double step = eta;
    for (int h = 0; h <= 20; ++h, step *= 0.5) {
      LstmAeParams cand = apply_update(cur, g, step);
      const double v = lstm_block_loss(cand, ds, targets, w, threads);
      if (std::isfinite(v) && v <= after) {
        cur = std::move(cand);
        after = v;
        break;
      }
    }
  }
  out.params = std::move(cur);
  out.after = after;
  return out;
}

// ---------------------------------------------------------------------------
// Dictionary block

struct DictBlockResult {
  Dictionary dict;
  double before = 0.0, after = 0.0;
  bool kept_previous = false;
};

/// lambda2 = 0: dual ascent on the norm constraints. lambda2 != 0: projected
/// gradient steps on Jbar. The previous dictionary is kept if the new one
/// would raise the block objective.
inline DictBlockResult dictionary_block_step(const Dictionary& dict, const Eigen::MatrixXd& F, const Eigen::MatrixXd& A,
                                             double lambda2, double step) {
  DictBlockResult out;
  if (lambda2 == 0.0) {
    out.before = fit_value(dict.D, F, A);
    DualAscentResult r = dual_ascent(F, A, dict.per_device_atoms);
    Dictionary cand = project_columns(std::move(r.dict));
    const double v = fit_value(cand.D, F, A);
    if (std::isfinite(v) && v <= out.before + 1e-8 * std::max(1.0, out.before)) {
      out.dict = std::move(cand);
      out.after = v;
    } else {
      out.dict = dict;
      out.after = out.before;
      out.kept_previous = true;
    }
    return out;
  }
  GradStepResult g = incoherence_grad_step(dict, F, A, lambda2, step);
  out.before = g.before;
  out.after = g.after;
  out.kept_previous = g.step == 0.0;
  out.dict = std::move(g.dict);
  return out;
}

// ---------------------------------------------------------------------------
// Outer loop

struct TrainObserver {
  std::function<void(const TrainingLogEntry&)> on_iteration;
};

inline Eigen::MatrixXd code_targets(const Dictionary& dict, const Eigen::MatrixXd& A) { return dict.D * A; }

struct TrainResult {
  DtdlModel model;
  Eigen::MatrixXd codes;  // final training codes
};

inline TrainResult train_full(const WindowedDataset& ds, const HyperParams& hp, const TrainObserver& obs = {}) {
  hp.validate();
  const std::size_t K = ds.K(), L = ds.L();
  if (K < 2) throw DataError("train: need at least 2 windows, got " + std::to_string(K));
  if (L == 0) throw DataError("train: dataset has no devices");
  if (ds.omega != hp.omega)
    throw ConfigError("train: dataset omega " + std::to_string(ds.omega) + " differs from hyperparameter omega " +
                      std::to_string(hp.omega));

  const Rng root(hp.seed);
  TrainResult res;
  DtdlModel& model = res.model;
  model.hyper = hp;
  model.scaler = ds.scaler;
  model.device_names = ds.device_names;
  model.lstm = LstmAeParams::initialize(hp.m, root.split("lstm"), hp.init_scale);

  const SmoothnessMatrix G = build_G(K, L);
  const CodingOptions co = coding_options(hp);
  const LossWeights w{hp.lambda3, hp.lambda4};

  Eigen::MatrixXd F = collect_features(model.lstm, ds);
  model.dictionary = init_dictionary(F, L, hp.N_i, root.split("dictionary"));
  Eigen::MatrixXd A = solve_training_codes(F, model.dictionary, hp.lambda1, G, co).A;

  auto check_finite = [](double v, const char* block) {
    if (!std::isfinite(v)) throw NumericError(block, std::string("non-finite objective after the ") + block + " step");
  };

  model.status = "max_iters";
  for (int it = 1; it <= hp.max_outer_iters; ++it) {
    TrainingLogEntry e;
    e.iter = it;

    // (a) LSTM
    const LstmBlockResult lb = lstm_block_step(model.lstm, ds, code_targets(model.dictionary, A), w, hp.eta,
                                               hp.epochs_per_block, hp.threads);
    if (!lb.params.all_finite()) throw NumericError("lstm", "non-finite LSTM parameters");
    check_finite(lb.after, "lstm");
    model.lstm = lb.params;
    e.lstm_before = lb.before;
    e.lstm_after = lb.after;

    // (b) dictionary
    F = collect_features(model.lstm, ds);
    const Eigen::MatrixXd D_old = model.dictionary.D;
    DictBlockResult db = dictionary_block_step(model.dictionary, F, A, hp.lambda2, hp.dict_step);
    check_finite(db.after, "dictionary");
    if (!db.dict.D.allFinite()) throw NumericError("dictionary", "non-finite dictionary entries");
    model.dictionary = std::move(db.dict);
    e.dict_before = db.before;
    e.dict_after = db.after;
    e.dict_delta = (model.dictionary.D - D_old).cwiseAbs().mean();

    // (c) sparse codes, warm-started; kept only if they do not raise the
    // block objective
    const AdmmProblem pb = training_code_problem(F, model.dictionary, hp.lambda1, G, co);
    e.codes_before = admm_objective(pb, A);
    AdmmResult ar = pjadmm_solve(pb, co.admm, &A, co.threads);
    e.admm_iterations = ar.iterations;
    e.codes_converged = ar.converged;
    e.admm_primal = ar.primal_residuals.empty() ? 0.0 : ar.primal_residuals.back();
    e.admm_dual = ar.dual_residuals.empty() ? 0.0 : ar.dual_residuals.back();
    check_finite(ar.objective, "sparse coding");
    if (ar.objective <= e.codes_before || hp.smoothness == SmoothnessMode::Hard) {
      A = std::move(ar.A);
      e.codes_after = ar.objective;
    } else {
      e.codes_after = e.codes_before;
    }

    e.terms = evaluate_objective(model, ds, A);
    check_finite(e.terms.J, "objective");
    model.training_log.push_back(e);
    if (obs.on_iteration) obs.on_iteration(e);
    if (e.dict_delta < hp.epsilon) {
      model.status = "converged";
      break;
    }
  }
  res.codes = std::move(A);
  return res;
}

inline DtdlModel train(const WindowedDataset& ds, const HyperParams& hp, const TrainObserver& obs = {}) {
  return train_full(ds, hp, obs).model;
}

}  // namespace dtdl
