#pragma once

// Sparse coding by Proximal Jacobian ADMM.
//
// Each column x_j of the code matrix A carries a convex objective
//   f_j(x) = x^T Q_j x - 2 q_j^T x + c_j + l1_j ||x||_1
// restricted to a contiguous support block. Columns are coupled through the
// linear constraint A G = Z, where G is the window-to-window difference matrix
// and Z = 0 in hard mode. In penalty mode Z is an extra block carrying
// mu/K * sum_c |1^T z_c| (the code-mass smoothness measure).
//
// Every sweep updates all blocks from the previous iterate only (Jacobi), each
// through an exact proximal map with an added (tau/2)||x - x^k||^2 term, then
// takes a dual step lambda <- lambda - rho * (A G - Z).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dtdl/dictionary.hpp"
#include "dtdl/error.hpp"
#include "dtdl/parallel.hpp"

namespace dtdl {

inline double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

struct AdmmOptions {
  double rho = 1.0;
  double prox_weight = 1.0;
  int max_iters = 500;
  double primal_tol = 1e-6;
  double dual_tol = 1e-6;

  void validate() const {
    if (!(rho > 0) || !(prox_weight > 0) || max_iters <= 0 || !(primal_tol > 0) || !(dual_tol > 0))
      throw ConfigError("ADMM options must all be positive");
  }
};

enum class SmoothnessMode { Hard, Penalty };

/// KL x KL matrix with G(j, j) = 1 and G(j + L, j) = -1 for j < (K-1)L; the
/// last L columns are zero. Column j of A G is a^i(k) - a^i(k+1).
struct SmoothnessMatrix {
  struct Entry {
    std::size_t row, col;
    double value;
  };
  std::size_t K = 0, L = 0;
  std::vector<Entry> entries;

  std::size_t size() const { return K * L; }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(size()));
    for (const auto& e : entries) G(static_cast<Eigen::Index>(e.row), static_cast<Eigen::Index>(e.col)) = e.value;
    return G;
  }
};

inline SmoothnessMatrix build_G(std::size_t K, std::size_t L) {
  SmoothnessMatrix G;
  G.K = K;
  G.L = L;
  if (K < 1 || L < 1) throw ConfigError("build_G: K and L must be >= 1");
  for (std::size_t j = 0; j + L < K * L; ++j) {
    G.entries.push_back({j, j, 1.0});
    G.entries.push_back({j + L, j, -1.0});
  }
  return G;
}

/// Convex per-column objective x^T Q x - 2 q^T x + constant + l1 ||x||_1 over
/// the support rows [offset, offset + q.size()).
struct QuadL1Block {
  Eigen::MatrixXd Q;
  Eigen::VectorXd q;
  double constant = 0.0;
  double l1 = 0.0;
  Eigen::Index offset = 0;

  Eigen::Index dim() const { return q.size(); }

  double value(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return x.dot(Q * x) - 2.0 * q.dot(x) + constant + l1 * x.lpNorm<1>();
  }
};

struct AdmmProblem {
  Eigen::Index N = 0;
  std::vector<QuadL1Block> blocks;
  SmoothnessMatrix G;  // may be empty (no coupling)
  SmoothnessMode mode = SmoothnessMode::Hard;
  double penalty_weight = 0.0;  // mu, penalty mode only
};

struct AdmmResult {
  Eigen::MatrixXd A;  // N x blocks
  std::vector<double> primal_residuals;
  std::vector<double> dual_residuals;
  std::vector<double> lagrangian;  // augmented Lagrangian after each sweep
  int iterations = 0;
  bool converged = false;
  double objective = 0.0;  // sum of block objectives (+ penalty term)
};

namespace detail {

/// Coordinate descent for min x^T Q x - 2 q^T x + l1 ||x||_1, warm-started at x.
inline void quad_l1_minimize(const Eigen::MatrixXd& Q, const Eigen::VectorXd& q, double l1, Eigen::VectorXd& x,
                             int max_sweeps = 2000, double tol = 1e-15) {
  const Eigen::Index n = q.size();
  Eigen::VectorXd Qx = Q * x;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double change = 0.0, scale = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      const double qpp = Q(p, p);
      const double old = x(p);
      double next = 0.0;
      if (qpp > 0.0) {
        const double r = q(p) - (Qx(p) - qpp * old);
        next = soft_threshold(r, 0.5 * l1) / qpp;
      }
      if (next != old) {
        Qx += Q.col(p) * (next - old);
        x(p) = next;
        change = std::max(change, std::abs(next - old));
      }
      scale = std::max(scale, std::abs(next));
    }
    if (change <= tol * std::max(1.0, scale)) break;
  }
}

struct Constraint {
  std::vector<std::pair<std::size_t, double>> terms;  // (block, G value)
  Eigen::Index offset = 0, dim = 0;                    // support of the residual
};

}  // namespace detail

/// Objective of a code matrix, penalty term included in penalty mode.
inline double admm_objective(const AdmmProblem& pb, const Eigen::MatrixXd& A) {
  double obj = 0.0;
  for (std::size_t j = 0; j < pb.blocks.size(); ++j) {
    const auto& b = pb.blocks[j];
    obj += b.value(A.col(static_cast<Eigen::Index>(j)).segment(b.offset, b.dim()));
  }
  if (pb.mode == SmoothnessMode::Penalty && pb.G.K > 0) {
    for (std::size_t c = 0; c + pb.G.L < pb.G.size(); ++c) {
      const auto ci = static_cast<Eigen::Index>(c);
      const auto cn = static_cast<Eigen::Index>(c + pb.G.L);
      obj += pb.penalty_weight / static_cast<double>(pb.G.K) * std::abs(A.col(ci).sum() - A.col(cn).sum());
    }
  }
  return obj;
}

inline AdmmResult pjadmm_solve(const AdmmProblem& pb, const AdmmOptions& opts, const Eigen::MatrixXd* warm = nullptr,
                               int threads = 1) {
  opts.validate();
  const std::size_t n = pb.blocks.size();
  const double rho = opts.rho, tau = opts.prox_weight;
  const bool penalty = pb.mode == SmoothnessMode::Penalty;
  if (pb.G.K > 0 && pb.G.size() != n) throw DataError("pjadmm: G size does not match the number of blocks");

  // constraints and per-block incidence
  std::vector<detail::Constraint> cons;
  std::vector<std::vector<std::pair<std::size_t, double>>> incid(n);  // (constraint, G value)
  {
    std::vector<std::vector<std::pair<std::size_t, double>>> by_col(pb.G.size());
    for (const auto& e : pb.G.entries) by_col[e.col].push_back({e.row, e.value});
    for (auto& terms : by_col) {
      if (terms.empty()) continue;
      detail::Constraint c;
      c.terms = terms;
      const auto& b0 = pb.blocks[terms.front().first];
      c.offset = b0.offset;
      c.dim = b0.dim();
      for (const auto& [j, v] : terms)
        if (pb.blocks[j].offset != c.offset || pb.blocks[j].dim() != c.dim)
          throw DataError("pjadmm: coupled columns must share a support block");
      for (const auto& [j, v] : terms) incid[j].push_back({cons.size(), v});
      cons.push_back(std::move(c));
    }
  }
  const std::size_t nc = cons.size();

  AdmmResult res;
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(pb.N, static_cast<Eigen::Index>(n));
  if (warm && warm->rows() == pb.N && warm->cols() == static_cast<Eigen::Index>(n)) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto& b = pb.blocks[j];
      const auto jj = static_cast<Eigen::Index>(j);
      X.col(jj).segment(b.offset, b.dim()) = warm->col(jj).segment(b.offset, b.dim());
    }
  }
  std::vector<Eigen::VectorXd> Z(nc), Lam(nc), R(nc);
  auto residual = [&](std::size_t c, const Eigen::MatrixXd& Xm, const Eigen::VectorXd& z) {
    Eigen::VectorXd r = -z;
    for (const auto& [j, v] : cons[c].terms)
      r += v * Xm.col(static_cast<Eigen::Index>(j)).segment(cons[c].offset, cons[c].dim);
    return r;
  };
  for (std::size_t c = 0; c < nc; ++c) {
    Z[c] = Eigen::VectorXd::Zero(cons[c].dim);
    Lam[c] = Eigen::VectorXd::Zero(cons[c].dim);
  }
  if (penalty)
    for (std::size_t c = 0; c < nc; ++c) {
      Eigen::VectorXd zero = Eigen::VectorXd::Zero(cons[c].dim);
      Z[c] = residual(c, X, zero);  // start feasible
    }
  for (std::size_t c = 0; c < nc; ++c) R[c] = residual(c, X, Z[c]);

  // Proximal weights: prox_weight on top of the Jacobi convergence bound
  // rho * (blocks per constraint - 1) * (constraints touching the block).
  const double blocks_per_constraint = penalty ? 3.0 : 2.0;
  auto tau_x = [&](double deg) { return tau + rho * (blocks_per_constraint - 1.0) * deg; };
  const double tau_z = tau + rho * (blocks_per_constraint - 1.0);
  const double z_weight = penalty && pb.G.K > 0 ? pb.penalty_weight / static_cast<double>(pb.G.K) : 0.0;
  auto lagrangian = [&](const Eigen::MatrixXd& Xm, const std::vector<Eigen::VectorXd>& Zm) {
    double v = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const auto& b = pb.blocks[j];
      v += b.value(Xm.col(static_cast<Eigen::Index>(j)).segment(b.offset, b.dim()));
    }
    for (std::size_t c = 0; c < nc; ++c) {
      if (penalty) v += z_weight * std::abs(Zm[c].sum());
      v += -Lam[c].dot(R[c]) + 0.5 * rho * R[c].squaredNorm();
    }
    return v;
  };

  Eigen::MatrixXd Xn = X;
  std::vector<Eigen::VectorXd> Zn = Z;
  for (int it = 0; it < opts.max_iters; ++it) {
    // Jacobi sweep: every block reads only the previous iterate
    parallel_for(n, threads, [&](std::size_t j) {
      const auto& b = pb.blocks[j];
      const auto jj = static_cast<Eigen::Index>(j);
      const Eigen::VectorXd xk = X.col(jj).segment(b.offset, b.dim());
      const double deg = static_cast<double>(incid[j].size());
      const double tj = tau_x(deg);
      Eigen::MatrixXd Q = b.Q;
      Q.diagonal().array() += 0.5 * (rho * deg + tj);
      Eigen::VectorXd q = b.q + 0.5 * tj * xk;
      for (const auto& [c, v] : incid[j]) q += 0.5 * rho * (xk - v * (R[c] - Lam[c] / rho));
      Eigen::VectorXd x = xk;
      detail::quad_l1_minimize(Q, q, b.l1, x);
      Xn.col(jj).segment(b.offset, b.dim()) = x;
    });
    if (penalty) {
      parallel_for(nc, threads, [&](std::size_t c) {
        const Eigen::VectorXd gx = R[c] + Z[c];  // sum_j G_jc x_j at the previous iterate
        const Eigen::VectorXd v = (rho * (gx - Lam[c] / rho) + tau_z * Z[c]) / (rho + tau_z);
        const double dim = static_cast<double>(v.size());
        const double s = v.sum();
        const double u = soft_threshold(s, z_weight * dim / (rho + tau_z));
        Zn[c] = v.array() - (s - u) / dim;
      });
    }

    // residuals, dual residual, dual step
    std::vector<Eigen::VectorXd> Rn(nc), dR(nc);
    double primal2 = 0.0;
    for (std::size_t c = 0; c < nc; ++c) {
      Rn[c] = residual(c, Xn, Zn[c]);
      dR[c] = Rn[c] - R[c];
      primal2 += Rn[c].squaredNorm();
    }
    double dual2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const auto& b = pb.blocks[j];
      const auto jj = static_cast<Eigen::Index>(j);
      const Eigen::VectorXd dx = Xn.col(jj).segment(b.offset, b.dim()) - X.col(jj).segment(b.offset, b.dim());
      Eigen::VectorXd s = tau_x(static_cast<double>(incid[j].size())) * dx;
      for (const auto& [c, v] : incid[j]) s += rho * v * (v * dx - dR[c]);
      dual2 += s.squaredNorm();
    }
    if (penalty)
      for (std::size_t c = 0; c < nc; ++c) {
        const Eigen::VectorXd dz = Zn[c] - Z[c];
        const Eigen::VectorXd s = tau_z * dz - rho * (-dz - dR[c]);
        dual2 += s.squaredNorm();
      }
    for (std::size_t c = 0; c < nc; ++c) Lam[c] -= rho * Rn[c];

    X = Xn;
    Z = Zn;
    R = std::move(Rn);
    res.iterations = it + 1;
    res.primal_residuals.push_back(std::sqrt(primal2));
    res.dual_residuals.push_back(std::sqrt(dual2));
    res.lagrangian.push_back(lagrangian(X, Z));
    if (!X.allFinite()) throw NumericError("sparse coding", "non-finite code iterate");
    if (res.primal_residuals.back() <= opts.primal_tol && res.dual_residuals.back() <= opts.dual_tol) {
      res.converged = true;
      break;
    }
  }
  res.A = std::move(X);
  res.objective = admm_objective(pb, res.A);
  return res;
}

/// Code matrix with columns a^i(k) at j = k*L + i (0-based) and entries only in
/// device i's atom block.
struct SparseCodeMatrix {
  Eigen::MatrixXd A;  // N x KL
  std::size_t K = 0, L = 0;
  std::vector<Eigen::Index> per_device_atoms;
  AdmmResult solve;  // residual history of the producing solve (A not duplicated)

  std::size_t column(std::size_t k, std::size_t i) const { return k * L + i; }

  Eigen::VectorXd code(std::size_t k, std::size_t i) const {
    Eigen::Index off = 0;
    for (std::size_t d = 0; d < i; ++d) off += per_device_atoms[d];
    return A.col(static_cast<Eigen::Index>(column(k, i))).segment(off, per_device_atoms[i]);
  }

  /// True if every entry outside each column's support block is exactly zero.
  bool respects_support() const {
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t i = 0; i < L; ++i) {
        Eigen::Index off = 0;
        for (std::size_t d = 0; d < L; ++d) {
          if (d != i && !A.col(static_cast<Eigen::Index>(column(k, i))).segment(off, per_device_atoms[d]).isZero(0.0))
            return false;
          off += per_device_atoms[d];
        }
      }
    return true;
  }
};

struct CodingOptions {
  AdmmOptions admm;
  SmoothnessMode mode = SmoothnessMode::Hard;
  double penalty_weight = 1.0;
  int threads = 1;
};

/// Builds the per-column problems of the training codes:
///   sum_{i,k} ||F_enc(y_i(k)) - D_i a^i(k)||^2 + lambda1 ||a^i(k)||_1  s.t.  A G = Z.
inline AdmmProblem training_code_problem(const Eigen::MatrixXd& features, const Dictionary& dict, double lambda1,
                                         const SmoothnessMatrix& G, const CodingOptions& co) {
  const std::size_t L = dict.L();
  if (features.rows() != dict.d()) throw DataError("sparse coding: feature dimension does not match the dictionary");
  if (L == 0 || static_cast<std::size_t>(features.cols()) % L != 0)
    throw DataError("sparse coding: feature column count is not a multiple of L");
  const std::size_t K = static_cast<std::size_t>(features.cols()) / L;
  if (G.K != K || G.L != L) throw DataError("sparse coding: G does not match K and L");

  AdmmProblem pb;
  pb.N = dict.N();
  pb.G = G;
  pb.mode = co.mode;
  pb.penalty_weight = co.penalty_weight;
  std::vector<Eigen::MatrixXd> gram(L);
  for (std::size_t i = 0; i < L; ++i) gram[i] = dict.block(i).transpose() * dict.block(i);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t i = 0; i < L; ++i) {
      const auto f = features.col(static_cast<Eigen::Index>(k * L + i));
      QuadL1Block b;
      b.Q = gram[i];
      b.q = dict.block(i).transpose() * f;
      b.constant = f.squaredNorm();
      b.l1 = lambda1;
      b.offset = dict.offset(i);
      pb.blocks.push_back(std::move(b));
    }
  return pb;
}

inline SparseCodeMatrix solve_training_codes(const Eigen::MatrixXd& features, const Dictionary& dict, double lambda1,
                                             const SmoothnessMatrix& G, const CodingOptions& co = {},
                                             const Eigen::MatrixXd* warm = nullptr) {
  const AdmmProblem pb = training_code_problem(features, dict, lambda1, G, co);
  SparseCodeMatrix out;
  out.L = dict.L();
  out.K = static_cast<std::size_t>(features.cols()) / out.L;
  out.per_device_atoms = dict.per_device_atoms;
  out.solve = pjadmm_solve(pb, co.admm, warm, co.threads);
  out.A = std::move(out.solve.A);
  out.solve.A.resize(0, 0);
  return out;
}

/// Test-time options: a single uncoupled block, so the ADMM reduces to a
/// proximal-point loop and can be run to a much tighter tolerance.
inline AdmmOptions lasso_defaults() {
  AdmmOptions o;
  o.prox_weight = 1e-2;
  o.max_iters = 2000;
  o.primal_tol = 1e-9;
  o.dual_tol = 1e-9;
  return o;
}

struct LassoResult {
  Eigen::VectorXd a;
  bool converged = false;
  int iterations = 0;
};

/// min_a ||feature - D a||^2 + lambda1 ||a||_1 over the full dictionary.
inline LassoResult lasso_code(const Eigen::Ref<const Eigen::VectorXd>& feature, const Eigen::MatrixXd& D, double lambda1,
                              const AdmmOptions& opts = lasso_defaults()) {
  if (feature.size() != D.rows()) throw DataError("lasso_code: feature dimension does not match the dictionary");
  AdmmProblem pb;
  pb.N = D.cols();
  QuadL1Block b;
  b.Q = D.transpose() * D;
  b.q = D.transpose() * feature;
  b.constant = feature.squaredNorm();
  b.l1 = lambda1;
  // warm start from a coordinate-descent solve; the proximal loop then only
  // has to confirm the fixed point
  Eigen::MatrixXd warm = Eigen::MatrixXd::Zero(pb.N, 1);
  {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(pb.N);
    detail::quad_l1_minimize(b.Q, b.q, b.l1, x);
    warm.col(0) = x;
  }
  pb.blocks.push_back(std::move(b));
  const AdmmResult r = pjadmm_solve(pb, opts, &warm);
  return {r.A.col(0), r.converged, r.iterations};
}

}  // namespace dtdl
