#pragma once

// Finite-difference checks of the analytic LSTM and dictionary gradients.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dtdl/dictionary.hpp"
#include "dtdl/dictionary_learner.hpp"
#include "dtdl/lstm_ae.hpp"
#include "dtdl/rng.hpp"

namespace dtdl {

struct GradCheckRow {
  std::string name;
  int case_index = 0;
  Eigen::Index parameters = 0;
  double max_rel_error = 0.0;
  bool pass = false;
};

namespace detail {

inline double rel_err(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

inline Eigen::MatrixXd uniform_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double lo, double hi) {
  Eigen::MatrixXd M(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) M(i, j) = rng.uniform(lo, hi);
  return M;
}

inline Eigen::MatrixXd normal_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Eigen::MatrixXd M(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) M(i, j) = rng.normal();
  return M;
}

}  // namespace detail

/// Random instance with m <= 4 and omega <= 6, checked with step h.
inline GradCheckRow gradcheck_lstm(Rng rng, int case_index, double tol = 1e-4, double h = 1e-5) {
  const auto m = static_cast<Eigen::Index>(1 + rng.below(4));
  const auto omega = static_cast<Eigen::Index>(2 + rng.below(5));
  LstmAeParams p = LstmAeParams::initialize(m, rng.split("params"), 0.5);
  p.b = detail::uniform_matrix(rng, 4 * m, 1, -0.5, 0.5).col(0);
  p.readout_c = rng.uniform(-0.5, 0.5);
  const Eigen::VectorXd y = detail::uniform_matrix(rng, omega, 1, 0.0, 1.0).col(0);
  const Eigen::VectorXd target = detail::uniform_matrix(rng, m, 1, -0.5, 0.5).col(0);
  const LossWeights w{rng.uniform(0.5, 2.0), rng.uniform(0.0, 1.0)};

  const Eigen::VectorXd analytic = backward(p, forward(p, y), target, y, w).flatten();
  Eigen::VectorXd theta = p.flatten();
  GradCheckRow row{"lstm", case_index, theta.size(), 0.0, false};
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const double orig = theta(k);
    theta(k) = orig + h;
    const double up = snippet_loss(LstmAeParams::unflatten(m, theta), y, target, w);
    theta(k) = orig - h;
    const double down = snippet_loss(LstmAeParams::unflatten(m, theta), y, target, w);
    theta(k) = orig;
    row.max_rel_error = std::max(row.max_rel_error, detail::rel_err(analytic(k), (up - down) / (2 * h)));
  }
  row.pass = row.max_rel_error <= tol;
  return row;
}

/// Gradient of the dictionary objective with the incoherence term.
inline GradCheckRow gradcheck_dictionary(Rng rng, int case_index, double tol = 1e-4, double h = 1e-5) {
  const auto d = static_cast<Eigen::Index>(2 + rng.below(5));
  const std::size_t L = 2 + rng.below(2);
  std::vector<Eigen::Index> atoms(L);
  for (auto& a : atoms) a = static_cast<Eigen::Index>(1 + rng.below(3));
  Eigen::Index N = 0;
  for (auto a : atoms) N += a;
  const auto cols = static_cast<Eigen::Index>(L * (1 + rng.below(4)));
  auto normal = [&](Eigen::Index r, Eigen::Index c) { return detail::normal_matrix(rng, r, c); };
  Dictionary dict(0.5 * normal(d, N), atoms);
  const Eigen::MatrixXd F = normal(d, cols);
  const Eigen::MatrixXd A = normal(N, cols);
  const double lambda2 = rng.uniform(0.1, 1.5);
  const Eigen::MatrixXd analytic = dictionary_gradient(dict, F, A, lambda2);
  GradCheckRow row{"dictionary", case_index, d * N, 0.0, false};
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < N; ++c) {
      const double orig = dict.D(r, c);
      dict.D(r, c) = orig + h;
      const double up = dictionary_objective(dict, F, A, lambda2);
      dict.D(r, c) = orig - h;
      const double down = dictionary_objective(dict, F, A, lambda2);
      dict.D(r, c) = orig;
      row.max_rel_error = std::max(row.max_rel_error, detail::rel_err(analytic(r, c), (up - down) / (2 * h)));
    }
  row.pass = row.max_rel_error <= tol;
  return row;
}

inline std::vector<GradCheckRow> gradcheck_all(std::uint64_t seed, int cases) {
  const Rng root(seed);
  std::vector<GradCheckRow> rows;
  for (int c = 0; c < cases; ++c) rows.push_back(gradcheck_lstm(root.split("lstm").split(static_cast<std::uint64_t>(c)), c));
  for (int c = 0; c < cases; ++c)
    rows.push_back(gradcheck_dictionary(root.split("dictionary").split(static_cast<std::uint64_t>(c)), c));
  return rows;
}

}  // namespace dtdl
