#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "dtdl/dictionary.hpp"
#include "dtdl/error.hpp"
#include "dtdl/lstm_ae.hpp"
#include "dtdl/signal_data.hpp"
#include "dtdl/sparse_coder.hpp"

namespace dtdl {

struct HyperParams {
  double lambda1 = 0.1;
  double lambda2 = 0.4;
  double lambda3 = 1.2;
  double lambda4 = 0.6;
  double eta = 0.01;
  double epsilon = 0.05;
  std::size_t omega = 14;
  Eigen::Index m = 7;
  Eigen::Index N_i = 20;
  std::uint64_t seed = 1;
  int max_outer_iters = 200;
  int epochs_per_block = 1;
  double dict_step = 0.01;   // initial step of the lambda2 != 0 dictionary update
  double init_scale = 0.1;  // LSTM weights start uniform in [-init_scale, init_scale]
  SmoothnessMode smoothness = SmoothnessMode::Hard;
  double penalty_weight = 1.0;
  double on_tau_rel = 1e-4;  // on/off threshold tau = on_tau_rel * max(1, ||a*||_1)
  AdmmOptions admm;
  int threads = 1;

  void validate() const {
    if (!(lambda1 >= 0) || !(lambda2 >= 0) || !(lambda3 >= 0) || !(lambda4 >= 0))
      throw ConfigError("hyperparameters: lambda weights must be >= 0");
    if (!(eta > 0)) throw ConfigError("hyperparameters: eta must be > 0");
    if (!(epsilon > 0)) throw ConfigError("hyperparameters: epsilon must be > 0");
    if (omega < 2) throw ConfigError("hyperparameters: omega must be >= 2");
    if (m < 1) throw ConfigError("hyperparameters: m must be >= 1");
    if (N_i < 1) throw ConfigError("hyperparameters: N_i must be >= 1");
    if (max_outer_iters < 1) throw ConfigError("hyperparameters: max_outer_iters must be >= 1");
    if (epochs_per_block < 0) throw ConfigError("hyperparameters: epochs_per_block must be >= 0");
    if (!(init_scale >= 0)) throw ConfigError("hyperparameters: init_scale must be >= 0");
    if (!(dict_step > 0)) throw ConfigError("hyperparameters: dict_step must be > 0");
    if (!(on_tau_rel >= 0)) throw ConfigError("hyperparameters: on_tau_rel must be >= 0");
    if (!(penalty_weight >= 0)) throw ConfigError("hyperparameters: penalty_weight must be >= 0");
    if (threads < 1) throw ConfigError("hyperparameters: threads must be >= 1");
    admm.validate();
  }
};

/// Objective breakdown at one point of the alternation.
struct ObjectiveTerms {
  double J = 0, J1 = 0, J2 = 0, J3 = 0, J4 = 0;
  double smoothness_residual = 0;
};

/// One outer iteration. The *_before/*_after pairs are each block's own
/// sub-objective evaluated on entry and exit.
struct TrainingLogEntry {
  int iter = 0;
  ObjectiveTerms terms;
  double dict_delta = 0;
  double lstm_before = 0, lstm_after = 0;
  double dict_before = 0, dict_after = 0;
  double codes_before = 0, codes_after = 0;
  bool codes_converged = false;
  int admm_iterations = 0;
  double admm_primal = 0, admm_dual = 0;
};

struct DtdlModel {
  LstmAeParams lstm;
  Dictionary dictionary;
  Scaler scaler;
  HyperParams hyper;
  std::vector<std::string> device_names;
  std::vector<TrainingLogEntry> training_log;
  std::string status;  // "converged" or "max_iters"

  void check() const {
    if (dictionary.d() != lstm.m) throw DataError("model: dictionary dimension differs from the LSTM width");
    if (!(scaler.scale > 0)) throw DataError("model: scaler scale must be > 0");
  }
};

}  // namespace dtdl
