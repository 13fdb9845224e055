#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <vector>

#include "dtdl/error.hpp"

namespace dtdl {

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct PrecisionRecall {
  double precision = 0.0;  // percent
  double recall = 0.0;     // percent
  Confusion confusion;
};

struct DeviceMetrics {
  double precision = 0.0, recall = 0.0, f_score = 0.0;
  Confusion confusion;
};

struct MetricSet {
  double acc = 0.0;
  std::vector<DeviceMetrics> devices;
  double precision = 0.0, recall = 0.0, f_score = 0.0;  // unweighted device means
};

/// acc = (1 - sum_k sum_i ||Yhat_i(k) - Y_i(k)||_1 / (2 sum_k ||Y(k)||_1)) * 100.
/// estimates[i] and truths[i] are omega x K; aggregates is omega x K.
inline double disagg_accuracy(const std::vector<Eigen::MatrixXd>& estimates, const std::vector<Eigen::MatrixXd>& truths,
                              const Eigen::MatrixXd& aggregates) {
  if (estimates.size() != truths.size()) throw DataError("accuracy: estimate and truth device counts differ");
  double err = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (estimates[i].rows() != truths[i].rows() || estimates[i].cols() != truths[i].cols() ||
        truths[i].rows() != aggregates.rows() || truths[i].cols() != aggregates.cols())
      throw DataError("accuracy: shape mismatch for device " + std::to_string(i));
    err += (estimates[i] - truths[i]).cwiseAbs().sum();
  }
  if ((aggregates.array() < 0).any()) throw DataError("accuracy: aggregate has negative entries");
  const double total = aggregates.cwiseAbs().sum();
  if (!(total > 0)) throw DataError("accuracy: total aggregate is zero, the metric is undefined");
  return (1.0 - err / (2.0 * total)) * 100.0;
}

/// P = tp/(tp+fp), R = tp/(tp+fn) in percent. An empty denominator gives 100
/// when the device is never on and never predicted on, else 0.
inline PrecisionRecall precision_recall(const std::vector<bool>& est, const std::vector<bool>& truth) {
  if (est.size() != truth.size()) throw DataError("precision_recall: flag sequences differ in length");
  PrecisionRecall out;
  auto& c = out.confusion;
  for (std::size_t k = 0; k < est.size(); ++k) {
    if (est[k] && truth[k]) ++c.tp;
    else if (est[k]) ++c.fp;
    else if (truth[k]) ++c.fn;
    else ++c.tn;
  }
  const bool never = c.tp + c.fp == 0 && c.tp + c.fn == 0;
  out.precision = c.tp + c.fp == 0 ? (never ? 100.0 : 0.0) : 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  out.recall = c.tp + c.fn == 0 ? (never ? 100.0 : 0.0) : 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  return out;
}

inline double f_score(double p, double r) {
  if (!(p + r > 0)) return 0.0;
  return 2.0 * p * r / (p + r);
}

/// flags are K x L (window-major), as produced by window_truth.
inline MetricSet compute_metrics(const std::vector<Eigen::MatrixXd>& estimates, const std::vector<Eigen::MatrixXd>& truths,
                                 const Eigen::MatrixXd& aggregates, const std::vector<std::vector<bool>>& est_flags,
                                 const std::vector<std::vector<bool>>& truth_flags) {
  MetricSet ms;
  ms.acc = disagg_accuracy(estimates, truths, aggregates);
  if (est_flags.size() != truth_flags.size()) throw DataError("metrics: flag window counts differ");
  const std::size_t L = truths.size();
  for (std::size_t i = 0; i < L; ++i) {
    std::vector<bool> e, t;
    for (std::size_t k = 0; k < est_flags.size(); ++k) {
      if (est_flags[k].size() != L || truth_flags[k].size() != L) throw DataError("metrics: flag device counts differ");
      e.push_back(est_flags[k][i]);
      t.push_back(truth_flags[k][i]);
    }
    const PrecisionRecall pr = precision_recall(e, t);
    DeviceMetrics dm{pr.precision, pr.recall, f_score(pr.precision, pr.recall), pr.confusion};
    ms.devices.push_back(dm);
  }
  if (L) {
    for (const auto& d : ms.devices) {
      ms.precision += d.precision;
      ms.recall += d.recall;
      ms.f_score += d.f_score;
    }
    ms.precision /= static_cast<double>(L);
    ms.recall /= static_cast<double>(L);
    ms.f_score /= static_cast<double>(L);
  }
  return ms;
}

}  // namespace dtdl
