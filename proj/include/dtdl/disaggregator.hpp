#pragma once

// Test-time pipeline: encode an aggregate window, lasso-code it against the
// whole dictionary, decode each device's share of the feature.

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <vector>

#include "dtdl/error.hpp"
#include "dtdl/lstm_ae.hpp"
#include "dtdl/model.hpp"
#include "dtdl/parallel.hpp"
#include "dtdl/sparse_coder.hpp"

namespace dtdl {

inline bool on_off(const Eigen::Ref<const Eigen::VectorXd>& a_i, double tau) {
  if (!(tau >= 0)) throw ConfigError("on_off: tau must be >= 0");
  return a_i.lpNorm<1>() > tau;
}

/// Relative threshold rel * max(1, ||a*||_1); rel defaults to 1e-4.
inline double default_tau(const Eigen::Ref<const Eigen::VectorXd>& codes, double rel = 1e-4) {
  return rel * std::max(1.0, codes.lpNorm<1>());
}

struct WindowEstimate {
  Eigen::VectorXd codes;                   // N
  std::vector<Eigen::VectorXd> estimates;  // L snippets in watts
  std::vector<bool> on;
  bool converged = true;
};

inline WindowEstimate disaggregate_window(const DtdlModel& model, const Eigen::Ref<const Eigen::VectorXd>& Y_k,
                                          double tau = -1.0) {
  const auto omega = static_cast<std::size_t>(Y_k.size());
  const Eigen::VectorXd y = (Y_k.array() - model.scaler.offset) / model.scaler.scale;
  const Eigen::VectorXd feature = encode(model.lstm, y).feature;
  const LassoResult lr = lasso_code(feature, model.dictionary.D, model.hyper.lambda1);
  WindowEstimate out;
  out.codes = lr.a;
  out.converged = lr.converged;
  const double t = tau >= 0 ? tau : default_tau(out.codes, model.hyper.on_tau_rel);
  const auto& dict = model.dictionary;
  for (std::size_t i = 0; i < dict.L(); ++i) {
    const Eigen::VectorXd a_i = out.codes.segment(dict.offset(i), dict.atoms(i));
    Eigen::VectorXd est = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(omega));
    if (!a_i.isZero(0.0)) {
      const Eigen::VectorXd rec = decode(model.lstm, dict.block(i) * a_i, omega).reconstruction;
      for (Eigen::Index l = 0; l < est.size(); ++l) est(l) = std::max(0.0, model.scaler.to_watts(rec(l)));
    }
    out.estimates.push_back(std::move(est));
    out.on.push_back(on_off(a_i, t));
  }
  return out;
}

struct DisaggregationReport {
  std::size_t omega = 0, K = 0;
  std::vector<std::string> device_names;
  std::vector<Eigen::VectorXd> codes;       // per window
  std::vector<Eigen::MatrixXd> estimates;   // per device, omega x K watts
  std::vector<std::vector<bool>> on;        // K x L
  std::vector<double> totals;               // per device, watt-samples
  std::size_t unconverged_windows = 0;
};

/// Splits Y into floor(len/omega) windows and disaggregates each.
inline DisaggregationReport disaggregate_signal(const DtdlModel& model, const Eigen::Ref<const Eigen::VectorXd>& Y,
                                                double tau = -1.0, int threads = 1) {
  const std::size_t omega = model.hyper.omega;
  if (static_cast<std::size_t>(Y.size()) < omega)
    throw DataError("disaggregate: signal shorter than one window (" + std::to_string(Y.size()) + " < " +
                    std::to_string(omega) + ")");
  DisaggregationReport rep;
  rep.omega = omega;
  rep.K = static_cast<std::size_t>(Y.size()) / omega;
  rep.device_names = model.device_names;
  std::vector<WindowEstimate> windows(rep.K);
  parallel_for(rep.K, threads, [&](std::size_t k) {
    windows[k] = disaggregate_window(model, Y.segment(static_cast<Eigen::Index>(k * omega), static_cast<Eigen::Index>(omega)), tau);
  });
  const std::size_t L = model.dictionary.L();
  rep.estimates.assign(L, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(omega), static_cast<Eigen::Index>(rep.K)));
  rep.totals.assign(L, 0.0);
  for (std::size_t k = 0; k < rep.K; ++k) {
    for (std::size_t i = 0; i < L; ++i) rep.estimates[i].col(static_cast<Eigen::Index>(k)) = windows[k].estimates[i];
    rep.on.push_back(windows[k].on);
    rep.codes.push_back(std::move(windows[k].codes));
    if (!windows[k].converged) ++rep.unconverged_windows;
  }
  for (std::size_t i = 0; i < L; ++i) rep.totals[i] = rep.estimates[i].sum();
  return rep;
}

}  // namespace dtdl
