#pragma once

// Validation grids over architecture (m, omega) and weights (lambda2..4).

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

#include "dtdl/disaggregator.hpp"
#include "dtdl/metrics.hpp"
#include "dtdl/model.hpp"
#include "dtdl/signal_data.hpp"
#include "dtdl/trainer.hpp"

namespace dtdl {

struct GridCell {
  Eigen::Index m = 7;
  std::size_t omega = 14;
  double lambda2 = 0.4, lambda3 = 1.2, lambda4 = 0.6;
};

struct GridRow {
  GridCell cell;
  double validation_acc = 0.0;
  std::string status;
  int outer_iters = 0;
};

inline std::vector<double> default_lambda_grid() { return {0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4}; }

/// m x omega cells with the base weights.
inline std::vector<GridCell> architecture_grid(const HyperParams& base, const std::vector<Eigen::Index>& ms,
                                               const std::vector<std::size_t>& omegas) {
  std::vector<GridCell> out;
  for (auto m : ms)
    for (auto w : omegas) out.push_back({m, w, base.lambda2, base.lambda3, base.lambda4});
  return out;
}

/// lambda2 x lambda3 x lambda4 cells with the base architecture.
inline std::vector<GridCell> weight_grid(const HyperParams& base, const std::vector<double>& l2,
                                         const std::vector<double>& l3, const std::vector<double>& l4) {
  std::vector<GridCell> out;
  for (double a : l2)
    for (double b : l3)
      for (double c : l4) out.push_back({base.m, base.omega, a, b, c});
  return out;
}

/// Windows for one omega, split at `boundary_samples` (half the windows when 0).
inline DatasetSplit split_for_omega(const std::vector<Signal>& signals, const std::vector<std::string>& names,
                                    std::size_t omega, std::size_t boundary_samples) {
  const WindowedDataset ds = make_windows(signals, omega, names);
  const std::size_t boundary = boundary_samples ? boundary_samples / omega : ds.K() / 2;
  return split_dataset(ds, boundary);
}

/// Trains one model per cell on the training partition and scores energy
/// accuracy on the validation partition.
inline GridRow evaluate_cell(const std::vector<Signal>& signals, const std::vector<std::string>& names,
                             std::size_t boundary_samples, HyperParams hp, const GridCell& cell) {
  hp.m = cell.m;
  hp.omega = cell.omega;
  hp.lambda2 = cell.lambda2;
  hp.lambda3 = cell.lambda3;
  hp.lambda4 = cell.lambda4;
  const DatasetSplit sp = split_for_omega(signals, names, cell.omega, boundary_samples);
  const DtdlModel model = train(sp.train, hp);
  const auto& v = sp.validation;
  std::vector<Eigen::MatrixXd> est(v.L(), Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(v.omega),
                                                                 static_cast<Eigen::Index>(v.K())));
  for (std::size_t k = 0; k < v.K(); ++k) {
    const WindowEstimate w = disaggregate_window(model, v.aggregate_snippet(k));
    for (std::size_t i = 0; i < v.L(); ++i) est[i].col(static_cast<Eigen::Index>(k)) = w.estimates[i];
  }
  GridRow row;
  row.cell = cell;
  row.validation_acc = disagg_accuracy(est, v.device, v.aggregate);
  row.status = model.status;
  row.outer_iters = static_cast<int>(model.training_log.size());
  return row;
}

inline std::vector<GridRow> validate_grid(const std::vector<Signal>& signals, const std::vector<std::string>& names,
                                          std::size_t boundary_samples, const HyperParams& base,
                                          const std::vector<GridCell>& cells) {
  std::vector<GridRow> rows;
  for (const auto& c : cells) rows.push_back(evaluate_cell(signals, names, boundary_samples, base, c));
  return rows;
}

}  // namespace dtdl
