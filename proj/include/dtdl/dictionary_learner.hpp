#pragma once

// Dictionary updates with the encoder and codes held fixed.
//
// Without the incoherence term the problem is a least-squares fit under unit
// column-norm constraints. For multipliers phi >= 0 the Lagrangian
//   1/(LK) ||F - D A||_F^2 + sum_j phi_j (||D_j||^2 - 1)
// is minimized by D = F A^T (A A^T + LK diag(phi))^-1, and the dual gradient
// with respect to phi_j is ||D_j||^2 - 1. dual_ascent climbs the dual with
// projected gradient steps.
//
// With the incoherence term (weight lambda2 > 0) the objective
//   Jbar(D) = 1/(LK) ||F - D A||_F^2 + lambda2 sum_i sum_{j != i} ||D_i^T D_j||_F^2
// is handled by projected gradient descent.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "dtdl/dictionary.hpp"
#include "dtdl/error.hpp"
#include "dtdl/lstm_ae.hpp"
#include "dtdl/rng.hpp"
#include "dtdl/signal_data.hpp"

namespace dtdl {

/// d x LK matrix whose column k*L + i is F_enc of device i's normalized
/// snippet in window k.
inline Eigen::MatrixXd collect_features(const LstmAeParams& p, const WindowedDataset& ds) {
  const std::size_t K = ds.K(), L = ds.L();
  Eigen::MatrixXd F(p.m, static_cast<Eigen::Index>(K * L));
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t i = 0; i < L; ++i)
      F.col(static_cast<Eigen::Index>(k * L + i)) = encode(p, ds.normalized_device(k, i)).feature;
  return F;
}

/// Rescales every column with norm above 1 onto the unit sphere. The 1e-12
/// slack keeps the map idempotent under rounding.
inline Dictionary project_columns(Dictionary dict) {
  for (Eigen::Index j = 0; j < dict.D.cols(); ++j) {
    const double n = dict.D.col(j).norm();
    if (n > 1.0 + 1e-12) dict.D.col(j) /= n;
  }
  return dict;
}

/// sum_i sum_{j != i} ||D_i^T D_j||_F^2 over ordered pairs.
inline double incoherence_value(const Dictionary& dict) {
  double v = 0.0;
  for (std::size_t i = 0; i < dict.L(); ++i)
    for (std::size_t j = 0; j < dict.L(); ++j)
      if (i != j) v += (dict.block(i).transpose() * dict.block(j)).squaredNorm();
  return v;
}

/// 1/(LK) ||F - D A||_F^2, the quadratic part of the dictionary cost.
inline double fit_value(const Eigen::MatrixXd& D, const Eigen::MatrixXd& F, const Eigen::MatrixXd& A) {
  return (F - D * A).squaredNorm() / static_cast<double>(F.cols());
}

/// Jbar(D) with the incoherence term.
inline double dictionary_objective(const Dictionary& dict, const Eigen::MatrixXd& F, const Eigen::MatrixXd& A,
                                   double lambda2) {
  return fit_value(dict.D, F, A) + lambda2 * incoherence_value(dict);
}

/// D = F A^T (A A^T + LK diag(phi) + 1e-10 I)^-1.
inline Dictionary closed_form_D(const Eigen::MatrixXd& F, const Eigen::MatrixXd& A, const Eigen::VectorXd& phi,
                                const std::vector<Eigen::Index>& per_device_atoms) {
  if (A.cols() != F.cols() || phi.size() != A.rows())
    throw DataError("closed_form_D: inconsistent shapes");
  const double lk = static_cast<double>(F.cols());
  Eigen::MatrixXd M = A * A.transpose();
  M.diagonal() += lk * phi;
  M.diagonal().array() += 1e-10;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
  if (ldlt.info() != Eigen::Success) throw NumericError("dictionary", "singular system in closed-form update");
  Eigen::MatrixXd Dt = ldlt.solve(A * F.transpose());
  if (!Dt.allFinite()) throw NumericError("dictionary", "singular system in closed-form update");
  return Dictionary(Dt.transpose(), per_device_atoms);
}

/// Dual function value at phi (with D the closed-form minimizer for phi).
inline double dual_value(const Eigen::MatrixXd& F, const Eigen::MatrixXd& A, const Eigen::VectorXd& phi,
                         const Eigen::MatrixXd& D) {
  const Eigen::VectorXd norms = D.colwise().squaredNorm().transpose();
  return fit_value(D, F, A) + phi.dot((norms.array() - 1.0).matrix());
}

struct DualAscentOptions {
  double step = 0.01;
  int max_iters = 1000;
  double tol = 1e-6;  // feasibility and complementary slackness
};

struct DualAscentResult {
  Eigen::VectorXd phi;
  Dictionary dict;
  int iterations = 0;
  bool converged = false;
  double feasibility = 0.0;  // max_j (||D_j||^2 - 1)_+
  double slackness = 0.0;    // max_j |phi_j (||D_j||^2 - 1)|
};

/// Projected gradient ascent on phi >= 0. The step starts at opts.step,
/// doubles after each accepted ascent step and halves on rejection.
inline DualAscentResult dual_ascent(const Eigen::MatrixXd& F, const Eigen::MatrixXd& A,
                                    const std::vector<Eigen::Index>& per_device_atoms,
                                    const DualAscentOptions& opts = {}) {
  const Eigen::Index N = A.rows();
  DualAscentResult res;
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(N);
  Dictionary dict = closed_form_D(F, A, phi, per_device_atoms);
  double value = dual_value(F, A, phi, dict.D);
  double step = opts.step;

  auto kkt = [&](const Dictionary& d, const Eigen::VectorXd& ph, double& feas, double& slack) {
    const Eigen::ArrayXd g = d.D.colwise().squaredNorm().transpose().array() - 1.0;
    feas = std::max(0.0, g.maxCoeff());
    slack = (ph.array() * g).abs().maxCoeff();
    return g;
  };

  int it = 0;
  for (; it < opts.max_iters; ++it) {
    double feas = 0.0, slack = 0.0;
    const Eigen::ArrayXd g = N ? kkt(dict, phi, feas, slack) : Eigen::ArrayXd();
    if (N == 0 || (feas <= opts.tol && slack <= opts.tol)) {
      res.converged = true;
      break;
    }
    bool moved = false;
    for (int h = 0; h < 60; ++h) {
      const Eigen::VectorXd cand = (phi.array() + step * g).max(0.0).matrix();
      if (cand == phi) break;
      Dictionary cd = closed_form_D(F, A, cand, per_device_atoms);
      const double cv = dual_value(F, A, cand, cd.D);
      if (std::isfinite(cv) && cv >= value - 1e-14 * std::max(1.0, std::abs(value))) {
        phi = cand;
        dict = std::move(cd);
        value = cv;
        step *= 2.0;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  res.iterations = it;
  res.phi = phi;
  if (N) kkt(dict, phi, res.feasibility, res.slackness);
  res.converged = res.converged || (res.feasibility <= opts.tol && res.slackness <= opts.tol);
  res.dict = std::move(dict);
  return res;
}

/// Exact gradient of Jbar with respect to D:
///   2/(LK) (D A - F) A^T  +  4 lambda2 (sum_{j != i} D_j D_j^T) D_i  for block i.
inline Eigen::MatrixXd dictionary_gradient(const Dictionary& dict, const Eigen::MatrixXd& F, const Eigen::MatrixXd& A,
                                           double lambda2) {
  Eigen::MatrixXd grad = 2.0 / static_cast<double>(F.cols()) * (dict.D * A - F) * A.transpose();
  if (lambda2 != 0.0) {
    const Eigen::MatrixXd P = dict.D * dict.D.transpose();
    for (std::size_t i = 0; i < dict.L(); ++i) {
      const auto Di = dict.block(i);
      const Eigen::MatrixXd others = P - Di * Di.transpose();
      grad.middleCols(dict.offset(i), dict.atoms(i)) += 4.0 * lambda2 * others * Di;
    }
  }
  return grad;
}

struct GradStepResult {
  Dictionary dict;
  double before = 0.0;
  double after = 0.0;
  double step = 0.0;  // 0 when every halving failed and D is unchanged
};

/// One projected gradient step on Jbar, halving the step (at most
/// max_halvings times) until Jbar does not increase.
inline GradStepResult incoherence_grad_step(const Dictionary& dict, const Eigen::MatrixXd& F, const Eigen::MatrixXd& A,
                                            double lambda2, double step, int max_halvings = 20) {
  GradStepResult out;
  out.before = dictionary_objective(dict, F, A, lambda2);
  const Eigen::MatrixXd grad = dictionary_gradient(dict, F, A, lambda2);
  for (int h = 0; h <= max_halvings; ++h, step *= 0.5) {
    Dictionary cand = project_columns(Dictionary(dict.D - step * grad, dict.per_device_atoms));
    const double v = dictionary_objective(cand, F, A, lambda2);
    if (std::isfinite(v) && v <= out.before) {
      out.dict = std::move(cand);
      out.after = v;
      out.step = step;
      return out;
    }
  }
  out.dict = dict;
  out.after = out.before;
  return out;
}

/// For each device, atoms_per_device of its training features (sampled
/// without replacement when possible), projected to the unit ball.
inline Dictionary init_dictionary(const Eigen::MatrixXd& F, std::size_t L, Eigen::Index atoms_per_device, Rng rng) {
  const std::size_t K = static_cast<std::size_t>(F.cols()) / L;
  if (K == 0) throw DataError("init_dictionary: no training windows");
  Dictionary dict(Eigen::MatrixXd::Zero(F.rows(), atoms_per_device * static_cast<Eigen::Index>(L)),
                  std::vector<Eigen::Index>(L, atoms_per_device));
  for (std::size_t i = 0; i < L; ++i) {
    std::vector<std::size_t> pool(K);
    for (std::size_t k = 0; k < K; ++k) pool[k] = k;
    Rng dev = rng.split(i);
    for (Eigen::Index a = 0; a < atoms_per_device; ++a) {
      std::size_t k;
      if (!pool.empty()) {
        const auto pick = static_cast<std::size_t>(dev.below(pool.size()));
        k = pool[pick];
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
      } else {
        k = static_cast<std::size_t>(dev.below(K));
      }
      dict.D.col(dict.offset(i) + a) = F.col(static_cast<Eigen::Index>(k * L + i));
    }
  }
  return project_columns(std::move(dict));
}

}  // namespace dtdl
