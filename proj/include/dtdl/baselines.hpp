#pragma once

// Comparison methods: classic dictionary learning on raw snippets with
// binary codes (at most one atom per device), and simple mean prediction.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "dtdl/dictionary.hpp"
#include "dtdl/dictionary_learner.hpp"
#include "dtdl/error.hpp"
#include "dtdl/rng.hpp"
#include "dtdl/signal_data.hpp"

namespace dtdl {

/// Signal-space dictionary. Snippets are divided by `scale`, the largest
/// l2 norm of a training aggregate snippet, so every training window fits in
/// the unit ball.
struct CdlModel {
  Dictionary dict;  // omega x N
  double scale = 1.0;
  double lambda1 = 0.1;
  std::vector<std::string> device_names;
  std::vector<double> fit_history;  // 1/(LK) (||Y - D A||^2 + lambda1 ||A||_1) after each iteration
};

/// Greedy forward selection of (device, atom) pairs, one atom per device at
/// most, each selection charged lambda1. Returns the N-vector of 0/1 codes.
inline Eigen::VectorXd cdl_code(const Eigen::Ref<const Eigen::VectorXd>& y, const Dictionary& dict, double lambda1) {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(dict.N());
  Eigen::VectorXd r = y;
  std::vector<bool> used(dict.L(), false);
  double cost = r.squaredNorm();
  while (true) {
    double best = cost;
    Eigen::Index best_j = -1;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < dict.L(); ++i) {
      if (used[i]) continue;
      for (Eigen::Index c = 0; c < dict.atoms(i); ++c) {
        const Eigen::Index j = dict.offset(i) + c;
        const double v = (r - dict.D.col(j)).squaredNorm() + lambda1;
        if (v < best) {
          best = v;
          best_j = j;
          best_i = i;
        }
      }
    }
    if (best_j < 0) break;
    a(best_j) = 1.0;
    r -= dict.D.col(best_j);
    used[best_i] = true;
    cost = r.squaredNorm();
  }
  return a;
}

/// Exact binary code of a single device snippet against its own block:
/// the best atom or nothing.
inline Eigen::VectorXd cdl_code_device(const Eigen::Ref<const Eigen::VectorXd>& y, const Dictionary& dict, std::size_t i,
                                       double lambda1) {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(dict.N());
  double best = y.squaredNorm();
  Eigen::Index best_j = -1;
  for (Eigen::Index c = 0; c < dict.atoms(i); ++c) {
    const Eigen::Index j = dict.offset(i) + c;
    const double v = (y - dict.D.col(j)).squaredNorm() + lambda1;
    if (v < best) {
      best = v;
      best_j = j;
    }
  }
  if (best_j >= 0) a(best_j) = 1.0;
  return a;
}

inline double cdl_scale(const WindowedDataset& ds) {
  double s = 0.0;
  for (std::size_t k = 0; k < ds.K(); ++k) s = std::max(s, ds.aggregate_snippet(k).norm());
  return s > 0 ? s : 1.0;
}

/// Alternates exact per-snippet binary coding with the constrained
/// least-squares dictionary update (dual ascent on raw snippets).
inline CdlModel cdl_train(const WindowedDataset& ds, std::size_t atoms_per_device, double lambda1, int iters,
                          std::uint64_t seed) {
  const std::size_t K = ds.K(), L = ds.L();
  if (K == 0 || L == 0) throw DataError("cdl_train: empty dataset");
  CdlModel model;
  model.lambda1 = lambda1;
  model.scale = cdl_scale(ds);
  model.device_names = ds.device_names;
  Eigen::MatrixXd Y(static_cast<Eigen::Index>(ds.omega), static_cast<Eigen::Index>(K * L));
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t i = 0; i < L; ++i) Y.col(static_cast<Eigen::Index>(k * L + i)) = ds.device_snippet(k, i) / model.scale;
  model.dict = init_dictionary(Y, L, static_cast<Eigen::Index>(atoms_per_device), Rng(seed).split("cdl"));

  auto code_all = [&](const Dictionary& d) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d.N(), Y.cols());
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t i = 0; i < L; ++i) {
        const auto j = static_cast<Eigen::Index>(k * L + i);
        A.col(j) = cdl_code_device(Y.col(j), d, i, lambda1);
      }
    return A;
  };
  for (int it = 0; it < iters; ++it) {
    const Eigen::MatrixXd A = code_all(model.dict);
    const double before = fit_value(model.dict.D, Y, A);
    Dictionary cand = project_columns(dual_ascent(Y, A, model.dict.per_device_atoms).dict);
    // atoms no window selected keep their previous value
    for (Eigen::Index j = 0; j < A.rows(); ++j)
      if (A.row(j).isZero(0.0)) cand.D.col(j) = model.dict.D.col(j);
    if (fit_value(cand.D, Y, A) <= before) model.dict = std::move(cand);
    const Eigen::MatrixXd A_new = code_all(model.dict);
    model.fit_history.push_back(fit_value(model.dict.D, Y, A_new) + lambda1 * A_new.sum() / static_cast<double>(Y.cols()));
  }
  return model;
}

struct BaselineEstimate {
  std::vector<Eigen::MatrixXd> estimates;  // per device, omega x K watts
  std::vector<std::vector<bool>> on;       // K x L
};

inline BaselineEstimate cdl_predict(const CdlModel& model, const Eigen::MatrixXd& aggregate_windows) {
  BaselineEstimate out;
  const std::size_t L = model.dict.L();
  out.estimates.assign(L, Eigen::MatrixXd::Zero(aggregate_windows.rows(), aggregate_windows.cols()));
  for (Eigen::Index k = 0; k < aggregate_windows.cols(); ++k) {
    const Eigen::VectorXd a = cdl_code(aggregate_windows.col(k) / model.scale, model.dict, model.lambda1);
    std::vector<bool> on(L, false);
    for (std::size_t i = 0; i < L; ++i) {
      const Eigen::VectorXd ai = a.segment(model.dict.offset(i), model.dict.atoms(i));
      if (ai.isZero(0.0)) continue;
      on[i] = true;
      const Eigen::VectorXd est = model.dict.block(i) * ai * model.scale;
      out.estimates[i].col(k) = est.cwiseMax(0.0);
    }
    out.on.push_back(std::move(on));
  }
  return out;
}

struct SmpModel {
  std::vector<std::string> device_names;
  std::vector<Eigen::VectorXd> mean_snippet;  // watts
  std::vector<double> on_fraction;
};

/// `truth` is K x L (window-major) on/off flags of the training windows.
inline SmpModel smp_train(const WindowedDataset& ds, const std::vector<std::vector<bool>>& truth) {
  const std::size_t K = ds.K(), L = ds.L();
  if (K == 0) throw DataError("smp_train: empty dataset");
  if (truth.size() != K) throw DataError("smp_train: truth window count differs from the dataset");
  SmpModel m;
  m.device_names = ds.device_names;
  for (std::size_t i = 0; i < L; ++i) {
    m.mean_snippet.push_back(ds.device[i].rowwise().mean());
    double on = 0.0;
    for (std::size_t k = 0; k < K; ++k) on += truth[k].at(i) ? 1.0 : 0.0;
    m.on_fraction.push_back(on / static_cast<double>(K));
  }
  return m;
}

inline BaselineEstimate smp_predict(const SmpModel& model, std::size_t K) {
  BaselineEstimate out;
  std::vector<bool> on;
  for (std::size_t i = 0; i < model.mean_snippet.size(); ++i) {
    out.estimates.push_back(model.mean_snippet[i].replicate(1, static_cast<Eigen::Index>(K)));
    on.push_back(model.on_fraction[i] > 0.5);
  }
  out.on.assign(K, on);
  return out;
}

/// On/off flags derived from the snippets themselves: on when any sample
/// exceeds threshold_w.
inline std::vector<std::vector<bool>> threshold_truth(const WindowedDataset& ds, double threshold_w) {
  std::vector<std::vector<bool>> out(ds.K(), std::vector<bool>(ds.L(), false));
  for (std::size_t k = 0; k < ds.K(); ++k)
    for (std::size_t i = 0; i < ds.L(); ++i) out[k][i] = ds.device_snippet(k, i).maxCoeff() > threshold_w;
  return out;
}

}  // namespace dtdl
