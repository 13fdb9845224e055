#pragma once

// JSON envelopes for trained models, the training log CSV and the
// disaggregation report.

#include <Eigen/Dense>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtdl/baselines.hpp"
#include "dtdl/disaggregator.hpp"
#include "dtdl/error.hpp"
#include "dtdl/model.hpp"
#include "dtdl/signal_data.hpp"

namespace dtdl {

using nlohmann::json;

namespace io {

inline json vec(const Eigen::Ref<const Eigen::VectorXd>& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

/// Row-major flattening.
inline json mat(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
  return a;
}

inline Eigen::VectorXd to_vec(const json& a, Eigen::Index n, const char* what) {
  if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != n)
    throw DataError(std::string("model file: '") + what + "' must be an array of " + std::to_string(n) + " numbers");
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = a[static_cast<std::size_t>(i)].get<double>();
  return v;
}

inline Eigen::MatrixXd to_mat(const json& a, Eigen::Index rows, Eigen::Index cols, const char* what) {
  const Eigen::VectorXd flat = to_vec(a, rows * cols, what);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat(r * cols + c);
  return m;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace io

inline const char* smoothness_name(SmoothnessMode m) { return m == SmoothnessMode::Hard ? "hard" : "penalty"; }

inline SmoothnessMode parse_smoothness(const std::string& s) {
  if (s == "hard") return SmoothnessMode::Hard;
  if (s == "penalty") return SmoothnessMode::Penalty;
  throw ConfigError("smoothness must be \"hard\" or \"penalty\", got \"" + s + "\"");
}

inline json hyper_to_json(const HyperParams& h) {
  return json{{"lambda1", h.lambda1},
              {"lambda2", h.lambda2},
              {"lambda3", h.lambda3},
              {"lambda4", h.lambda4},
              {"eta", h.eta},
              {"epsilon", h.epsilon},
              {"omega", h.omega},
              {"m", h.m},
              {"N_i", h.N_i},
              {"seed", h.seed},
              {"max_outer_iters", h.max_outer_iters},
              {"epochs_per_block", h.epochs_per_block},
              {"dict_step", h.dict_step},
              {"init_scale", h.init_scale},
              {"smoothness", smoothness_name(h.smoothness)},
              {"penalty_weight", h.penalty_weight},
              {"on_tau_rel", h.on_tau_rel},
              {"admm_rho", h.admm.rho},
              {"admm_prox_weight", h.admm.prox_weight},
              {"admm_max_iters", h.admm.max_iters},
              {"admm_primal_tol", h.admm.primal_tol},
              {"admm_dual_tol", h.admm.dual_tol}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline HyperParams hyper_from_json(const json& j, HyperParams h = {}) {
  if (!j.is_object()) throw ConfigError("hyperparameters must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    try {
      if (k == "lambda1") h.lambda1 = v.get<double>();
      else if (k == "lambda2") h.lambda2 = v.get<double>();
      else if (k == "lambda3") h.lambda3 = v.get<double>();
      else if (k == "lambda4") h.lambda4 = v.get<double>();
      else if (k == "eta") h.eta = v.get<double>();
      else if (k == "epsilon") h.epsilon = v.get<double>();
      else if (k == "omega") h.omega = v.get<std::size_t>();
      else if (k == "m") h.m = v.get<Eigen::Index>();
      else if (k == "N_i") h.N_i = v.get<Eigen::Index>();
      else if (k == "seed") h.seed = v.get<std::uint64_t>();
      else if (k == "max_outer_iters") h.max_outer_iters = v.get<int>();
      else if (k == "epochs_per_block") h.epochs_per_block = v.get<int>();
      else if (k == "dict_step") h.dict_step = v.get<double>();
      else if (k == "init_scale") h.init_scale = v.get<double>();
      else if (k == "smoothness") h.smoothness = parse_smoothness(v.get<std::string>());
      else if (k == "penalty_weight") h.penalty_weight = v.get<double>();
      else if (k == "on_tau_rel") h.on_tau_rel = v.get<double>();
      else if (k == "admm_rho") h.admm.rho = v.get<double>();
      else if (k == "admm_prox_weight") h.admm.prox_weight = v.get<double>();
      else if (k == "admm_max_iters") h.admm.max_iters = v.get<int>();
      else if (k == "admm_primal_tol") h.admm.primal_tol = v.get<double>();
      else if (k == "admm_dual_tol") h.admm.dual_tol = v.get<double>();
      else throw ConfigError("unknown hyperparameter '" + k + "'");
    } catch (const json::exception&) {
      throw ConfigError("hyperparameter '" + k + "' has the wrong type");
    }
  }
  return h;
}

inline json model_to_json(const DtdlModel& m) {
  const auto& p = m.lstm;
  return json{{"version", 1},
              {"kind", "dtdl"},
              {"status", m.status},
              {"hyper", hyper_to_json(m.hyper)},
              {"scaler", {{"scale", m.scaler.scale}, {"offset", m.scaler.offset}}},
              {"lstm",
               {{"m", p.m},
                {"omega", m.hyper.omega},
                {"gate_order", {"a", "i", "f", "o"}},
                {"W", io::vec(p.W)},
                {"U", io::mat(p.U)},
                {"b", io::vec(p.b)},
                {"readout_v", io::vec(p.readout_v)},
                {"readout_c", p.readout_c}}},
              {"dictionary",
               {{"d", m.dictionary.d()}, {"per_device_atoms", m.dictionary.per_device_atoms}, {"D", io::mat(m.dictionary.D)}}},
              {"device_names", m.device_names}};
}

inline void check_envelope(const json& j, const char* kind) {
  if (!j.is_object() || j.value("version", 0) != 1) throw DataError("model file: unsupported or missing version");
  if (j.value("kind", std::string()) != kind)
    throw DataError(std::string("model file: expected kind '") + kind + "', got '" + j.value("kind", std::string()) + "'");
}

inline DtdlModel model_from_json(const json& j) {
  check_envelope(j, "dtdl");
  try {
    DtdlModel m;
    m.status = j.value("status", std::string());
    m.hyper = hyper_from_json(j.at("hyper"));
    m.scaler.scale = j.at("scaler").at("scale").get<double>();
    m.scaler.offset = j.at("scaler").at("offset").get<double>();
    const json& l = j.at("lstm");
    const auto mm = l.at("m").get<Eigen::Index>();
    m.lstm = LstmAeParams::zeros(mm);
    m.lstm.W = io::to_vec(l.at("W"), 4 * mm, "W");
    m.lstm.U = io::to_mat(l.at("U"), 4 * mm, mm, "U");
    m.lstm.b = io::to_vec(l.at("b"), 4 * mm, "b");
    m.lstm.readout_v = io::to_vec(l.at("readout_v"), mm, "readout_v");
    m.lstm.readout_c = l.at("readout_c").get<double>();
    const json& d = j.at("dictionary");
    const auto atoms = d.at("per_device_atoms").get<std::vector<Eigen::Index>>();
    Eigen::Index N = 0;
    for (auto a : atoms) N += a;
    m.dictionary = Dictionary(io::to_mat(d.at("D"), d.at("d").get<Eigen::Index>(), N, "D"), atoms);
    m.device_names = j.at("device_names").get<std::vector<std::string>>();
    m.check();
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
}

inline void save_model(const std::filesystem::path& path, const DtdlModel& m) {
  io::write_text(path, model_to_json(m).dump(2) + "\n");
}

inline DtdlModel load_model(const std::filesystem::path& path) { return model_from_json(io::read_json(path)); }

inline json cdl_to_json(const CdlModel& m) {
  return json{{"version", 1},
              {"kind", "cdl"},
              {"scale", m.scale},
              {"lambda1", m.lambda1},
              {"dictionary",
               {{"d", m.dict.d()}, {"per_device_atoms", m.dict.per_device_atoms}, {"D", io::mat(m.dict.D)}}},
              {"device_names", m.device_names}};
}

inline CdlModel cdl_from_json(const json& j) {
  check_envelope(j, "cdl");
  try {
    CdlModel m;
    m.scale = j.at("scale").get<double>();
    m.lambda1 = j.at("lambda1").get<double>();
    const json& d = j.at("dictionary");
    const auto atoms = d.at("per_device_atoms").get<std::vector<Eigen::Index>>();
    Eigen::Index N = 0;
    for (auto a : atoms) N += a;
    m.dict = Dictionary(io::to_mat(d.at("D"), d.at("d").get<Eigen::Index>(), N, "D"), atoms);
    m.device_names = j.at("device_names").get<std::vector<std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
}

inline json smp_to_json(const SmpModel& m) {
  json means = json::array();
  for (const auto& v : m.mean_snippet) means.push_back(io::vec(v));
  return json{{"version", 1},
              {"kind", "smp"},
              {"mean_snippet", means},
              {"on_fraction", m.on_fraction},
              {"device_names", m.device_names}};
}

inline SmpModel smp_from_json(const json& j) {
  check_envelope(j, "smp");
  try {
    SmpModel m;
    for (const auto& v : j.at("mean_snippet")) m.mean_snippet.push_back(io::to_vec(v, static_cast<Eigen::Index>(v.size()), "mean_snippet"));
    m.on_fraction = j.at("on_fraction").get<std::vector<double>>();
    m.device_names = j.at("device_names").get<std::vector<std::string>>();
    if (m.on_fraction.size() != m.mean_snippet.size()) throw DataError("model file: smp field sizes differ");
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
}

inline std::string training_log_csv(const std::vector<TrainingLogEntry>& log) {
  std::ostringstream os;
  os << "iter,J,J1,J2,J3,J4,smoothness_residual,dict_delta\n";
  auto n = [](double v) { return detail::format_number(v); };
  for (const auto& e : log)
    os << e.iter << ',' << n(e.terms.J) << ',' << n(e.terms.J1) << ',' << n(e.terms.J2) << ',' << n(e.terms.J3) << ','
       << n(e.terms.J4) << ',' << n(e.terms.smoothness_residual) << ',' << n(e.dict_delta) << '\n';
  return os.str();
}

/// Wide CSV: window,device,estimate_watt_samples,truth_watt_samples,on_est,on_truth.
/// truth may be empty (columns left blank).
inline std::string report_csv(const std::vector<std::string>& names, const std::vector<Eigen::MatrixXd>& estimates,
                              const std::vector<std::vector<bool>>& on, std::size_t first_window,
                              const std::vector<Eigen::MatrixXd>* truth = nullptr,
                              const std::vector<std::vector<bool>>* truth_on = nullptr) {
  std::ostringstream os;
  os << "window,device,estimate_watt_samples,truth_watt_samples,on_est,on_truth\n";
  const std::size_t K = on.size();
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t i = 0; i < estimates.size(); ++i) {
      const auto kk = static_cast<Eigen::Index>(k);
      os << first_window + k << ',' << names.at(i) << ',' << detail::format_number(estimates[i].col(kk).sum()) << ',';
      if (truth) os << detail::format_number((*truth)[i].col(kk).sum());
      os << ',' << (on[k][i] ? 1 : 0) << ',';
      if (truth_on) os << ((*truth_on)[k][i] ? 1 : 0);
      os << '\n';
    }
  return os.str();
}

}  // namespace dtdl
