#pragma once

// Command-line front end. run_cli() is the whole program; the executable only
// forwards main() to it so tests can drive commands in-process.

#include <Eigen/Dense>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dtdl/baselines.hpp"
#include "dtdl/disaggregator.hpp"
#include "dtdl/error.hpp"
#include "dtdl/gradcheck.hpp"
#include "dtdl/metrics.hpp"
#include "dtdl/model.hpp"
#include "dtdl/model_io.hpp"
#include "dtdl/signal_data.hpp"
#include "dtdl/sweep.hpp"
#include "dtdl/trainer.hpp"

namespace dtdl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode { kOk = 0, kUnexpected = 1, kConfig = 2, kNumeric = 3 };

/// Every accepted key with its default. Hyperparameter keys come from
/// HyperParams so the defaults live in one place.
inline json default_config() {
  json c = hyper_to_json(HyperParams{});
  c["threads"] = 1;
  c["output_dir"] = "out";
  c["manifest"] = "";
  c["model"] = "";
  c["truth"] = "";
  c["split"] = "test";
  c["split_boundary_s"] = 0;
  c["source_rate_hz"] = 1;
  c["on_threshold_w"] = 10.0;
  c["method"] = "dtdl";
  c["cdl_iters"] = 20;
  c["compare_baselines"] = false;
  c["synthetic"] = nullptr;
  c["sweep"] = "architecture";
  c["sweep_m"] = {5, 7, 9, 11, 13};
  c["sweep_omega"] = {8, 10, 12, 14, 16};
  c["sweep_lambda2"] = default_lambda_grid();
  c["sweep_lambda3"] = default_lambda_grid();
  c["sweep_lambda4"] = default_lambda_grid();
  c["gradcheck_cases"] = 5;
  return c;
}

/// Overlays `layer` onto `base`, rejecting keys the base does not know.
inline void merge_config(json& base, const json& layer, const std::string& origin) {
  if (!layer.is_object()) throw ConfigError(origin + ": configuration must be a JSON object");
  for (auto it = layer.begin(); it != layer.end(); ++it) {
    if (!base.contains(it.key())) throw ConfigError(origin + ": unknown key '" + it.key() + "'");
    base[it.key()] = it.value();
  }
}

/// `key=value`; the value is read as JSON when it parses, else as a string.
inline std::pair<std::string, json> parse_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
  const std::string key = s.substr(0, eq), raw = s.substr(eq + 1);
  json v = json::parse(raw, nullptr, false);
  if (v.is_discarded()) v = raw;
  return {key, v};
}

template <class T>
T get(const json& c, const char* key) {
  try {
    return c.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

struct RunConfig {
  json raw;
  HyperParams hyper;
  fs::path output_dir;
  int threads = 1;
};

inline RunConfig resolve_config(const std::string& config_path, const std::vector<std::string>& sets, int threads_flag) {
  RunConfig rc;
  rc.raw = default_config();
  if (!config_path.empty()) merge_config(rc.raw, io::read_json(config_path), config_path);
  for (const auto& s : sets) {
    auto [k, v] = parse_assignment(s);
    json layer;
    layer[k] = v;
    merge_config(rc.raw, layer, "--set");
  }
  if (threads_flag > 0) rc.raw["threads"] = threads_flag;

  json hj;
  const json defaults = hyper_to_json(HyperParams{});
  for (auto it = defaults.begin(); it != defaults.end(); ++it) hj[it.key()] = rc.raw[it.key()];
  rc.hyper = hyper_from_json(hj);
  rc.threads = get<int>(rc.raw, "threads");
  if (rc.threads < 1) throw ConfigError("threads must be >= 1");
  rc.hyper.threads = rc.threads;
  rc.hyper.validate();
  rc.output_dir = get<std::string>(rc.raw, "output_dir");
  if (rc.output_dir.empty()) throw ConfigError("output_dir must not be empty");
  const auto split = get<std::string>(rc.raw, "split");
  if (split != "train" && split != "validation" && split != "test")
    throw ConfigError("split must be train, validation or test");
  const auto method = get<std::string>(rc.raw, "method");
  if (method != "dtdl" && method != "cdl" && method != "smp") throw ConfigError("method must be dtdl, cdl or smp");
  if (get<double>(rc.raw, "source_rate_hz") < 1) throw ConfigError("source_rate_hz must be >= 1");
  if (get<int>(rc.raw, "cdl_iters") < 0) throw ConfigError("cdl_iters must be >= 0");
  if (get<int>(rc.raw, "gradcheck_cases") < 1) throw ConfigError("gradcheck_cases must be >= 1");
  if (!(get<double>(rc.raw, "on_threshold_w") >= 0)) throw ConfigError("on_threshold_w must be >= 0");
  return rc;
}

inline std::string iso_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory '" + dir.string() + "'");
}

inline std::string file_safe(const std::string& name) {
  std::string s;
  for (char c : name) s += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return s.empty() ? "device" : s;
}

// ---------------------------------------------------------------------------
// Data plumbing shared by the commands

struct LoadedHouse {
  fs::path manifest;
  std::vector<Signal> signals;
  std::vector<std::string> names;
  std::vector<std::vector<bool>> active;  // per-sample truth when a truth file exists
};

inline json truth_to_json(const SyntheticHousehold& hh) {
  json devs = json::array();
  for (std::size_t i = 0; i < hh.active.size(); ++i) {
    json iv = json::array();
    const auto& a = hh.active[i];
    for (std::size_t t = 0; t < a.size();) {
      if (!a[t]) {
        ++t;
        continue;
      }
      std::size_t e = t;
      while (e < a.size() && a[e]) ++e;
      iv.push_back({t, e});
      t = e;
    }
    devs.push_back({{"name", hh.names[i]}, {"active_intervals", iv}});
  }
  return json{{"duration", hh.active.empty() ? 0 : hh.active.front().size()}, {"devices", devs}};
}

inline std::vector<std::vector<bool>> truth_from_json(const json& j, std::size_t expected_devices) {
  try {
    const auto T = j.at("duration").get<std::size_t>();
    std::vector<std::vector<bool>> out;
    for (const auto& d : j.at("devices")) {
      std::vector<bool> a(T, false);
      for (const auto& iv : d.at("active_intervals")) {
        const auto s = iv.at(0).get<std::size_t>(), e = iv.at(1).get<std::size_t>();
        if (s > e || e > T) throw DataError("truth file: interval out of range");
        for (std::size_t t = s; t < e; ++t) a[t] = true;
      }
      out.push_back(std::move(a));
    }
    if (out.size() != expected_devices) throw DataError("truth file: device count differs from the manifest");
    return out;
  } catch (const json::exception& e) {
    throw DataError(std::string("truth file: ") + e.what());
  }
}

inline LoadedHouse load_house(const RunConfig& rc) {
  const auto manifest = get<std::string>(rc.raw, "manifest");
  if (manifest.empty()) throw ConfigError("manifest is required");
  LoadedHouse lh;
  lh.manifest = manifest;
  if (!fs::exists(lh.manifest)) throw ConfigError("manifest not found: " + manifest);
  House h = load_house_csv(lh.manifest);
  const double rate = get<double>(rc.raw, "source_rate_hz");
  std::vector<RawChannel> chans;
  for (auto& d : h.devices) {
    lh.names.push_back(d.name);
    chans.push_back(rate == 1.0 ? d : resample_to_1hz(d, rate));
  }
  if (chans.empty()) throw DataError("manifest lists no devices");
  lh.signals = align_channels(chans);
  fs::path truth = get<std::string>(rc.raw, "truth");
  if (truth.empty() && fs::exists(lh.manifest.parent_path() / "truth.json")) truth = lh.manifest.parent_path() / "truth.json";
  if (!truth.empty()) {
    lh.active = truth_from_json(io::read_json(truth), lh.signals.size());
    for (auto& a : lh.active) a.resize(lh.signals.front().size(), false);
  }
  return lh;
}

inline DatasetSplit split_house(const LoadedHouse& lh, const RunConfig& rc) {
  return split_for_omega(lh.signals, lh.names, rc.hyper.omega, get<std::size_t>(rc.raw, "split_boundary_s"));
}

inline const WindowedDataset& pick_split(const DatasetSplit& sp, const std::string& which) {
  if (which == "train") return sp.train;
  if (which == "validation") return sp.validation;
  return sp.test;
}

/// K x L flags for a partition: from the truth file when present, else by
/// thresholding the metered snippets.
inline std::vector<std::vector<bool>> partition_truth(const LoadedHouse& lh, const WindowedDataset& part, double threshold_w) {
  if (!lh.active.empty()) return window_truth(lh.active, part.omega, part.first_window, part.K());
  return threshold_truth(part, threshold_w);
}

/// Estimates for one partition from whatever kind of model the file holds.
struct MethodOutput {
  std::string method;
  std::vector<Eigen::MatrixXd> estimates;
  std::vector<std::vector<bool>> on;
  std::vector<Eigen::VectorXd> codes;  // dtdl only
  std::size_t unconverged = 0;
};

inline MethodOutput run_dtdl(const DtdlModel& model, const WindowedDataset& part, int threads) {
  if (part.omega != model.hyper.omega) throw ConfigError("model omega differs from the configured omega");
  if (part.L() != model.dictionary.L()) throw DataError("model device count differs from the dataset");
  Eigen::VectorXd Y(part.aggregate.size());
  for (Eigen::Index k = 0; k < part.aggregate.cols(); ++k)
    Y.segment(k * part.aggregate.rows(), part.aggregate.rows()) = part.aggregate.col(k);
  DisaggregationReport rep = disaggregate_signal(model, Y, -1.0, threads);
  return {"dtdl", std::move(rep.estimates), std::move(rep.on), std::move(rep.codes), rep.unconverged_windows};
}

inline MethodOutput run_model_file(const json& j, const WindowedDataset& part, int threads) {
  const std::string kind = j.value("kind", std::string());
  if (kind == "dtdl") return run_dtdl(model_from_json(j), part, threads);
  if (kind == "cdl") {
    const CdlModel m = cdl_from_json(j);
    if (m.dict.d() != static_cast<Eigen::Index>(part.omega)) throw ConfigError("model omega differs from the configured omega");
    BaselineEstimate b = cdl_predict(m, part.aggregate);
    return {"cdl", std::move(b.estimates), std::move(b.on), {}, 0};
  }
  if (kind == "smp") {
    const SmpModel m = smp_from_json(j);
    if (m.mean_snippet.empty() || m.mean_snippet.front().size() != static_cast<Eigen::Index>(part.omega))
      throw ConfigError("model omega differs from the configured omega");
    BaselineEstimate b = smp_predict(m, part.K());
    return {"smp", std::move(b.estimates), std::move(b.on), {}, 0};
  }
  throw DataError("model file: unknown kind '" + kind + "'");
}

inline json metrics_to_json(const MetricSet& ms, const std::vector<std::string>& names) {
  json devs = json::array();
  for (std::size_t i = 0; i < ms.devices.size(); ++i) {
    const auto& d = ms.devices[i];
    devs.push_back({{"name", names.at(i)},
                    {"precision", d.precision},
                    {"recall", d.recall},
                    {"f_score", d.f_score},
                    {"tp", d.confusion.tp},
                    {"fp", d.confusion.fp},
                    {"fn", d.confusion.fn},
                    {"tn", d.confusion.tn}});
  }
  return json{{"acc", ms.acc}, {"precision", ms.precision}, {"recall", ms.recall}, {"f_score", ms.f_score}, {"devices", devs}};
}

inline fs::path model_path(const RunConfig& rc) {
  const auto m = get<std::string>(rc.raw, "model");
  return m.empty() ? rc.output_dir / "model.json" : fs::path(m);
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_synth(const RunConfig& rc, std::ostream& out) {
  SyntheticSpec spec = rc.raw["synthetic"].is_null() ? reference_house_spec(rc.hyper.seed)
                                                     : synthetic_spec_from_json(rc.raw["synthetic"]);
  const SyntheticHousehold hh = synth_household(spec);
  ensure_dir(rc.output_dir);
  json manifest{{"house_id", "synthetic"}, {"mains", "mains.csv"}, {"devices", json::array()}};
  write_channel_csv(rc.output_dir / "mains.csv", channel_from_signal(aggregate(hh.signals), 0, "mains"));
  for (std::size_t i = 0; i < hh.signals.size(); ++i) {
    const std::string file = std::to_string(i + 1) + "_" + file_safe(hh.names[i]) + ".csv";
    write_channel_csv(rc.output_dir / file, channel_from_signal(hh.signals[i], static_cast<int>(i + 1), hh.names[i]));
    manifest["devices"].push_back({{"name", hh.names[i]}, {"path", file}});
  }
  io::write_text(rc.output_dir / "manifest.json", manifest.dump(2) + "\n");
  json truth = truth_to_json(hh);
  truth["spec"] = synthetic_spec_to_json(spec);
  io::write_text(rc.output_dir / "truth.json", truth.dump(2) + "\n");
  out << "synth: " << hh.signals.size() << " devices, " << spec.duration << " samples -> " << rc.output_dir.string()
      << "\n";
  return kOk;
}

inline int cmd_train(const RunConfig& rc, std::ostream& out) {
  const LoadedHouse lh = load_house(rc);
  const DatasetSplit sp = split_house(lh, rc);
  const auto method = get<std::string>(rc.raw, "method");
  ensure_dir(rc.output_dir);
  if (method == "dtdl") {
    const DtdlModel model = train(sp.train, rc.hyper);
    save_model(rc.output_dir / "model.json", model);
    io::write_text(rc.output_dir / "training_log.csv", training_log_csv(model.training_log));
    out << "train: status=" << model.status << " outer_iters=" << model.training_log.size();
    if (!model.training_log.empty()) out << " J=" << model.training_log.back().terms.J;
    out << "\n";
  } else if (method == "cdl") {
    const CdlModel m = cdl_train(sp.train, static_cast<std::size_t>(rc.hyper.N_i), rc.hyper.lambda1,
                                 get<int>(rc.raw, "cdl_iters"), rc.hyper.seed);
    io::write_text(rc.output_dir / "model.json", cdl_to_json(m).dump(2) + "\n");
    out << "train: cdl iters=" << m.fit_history.size() << "\n";
  } else {
    const SmpModel m = smp_train(sp.train, partition_truth(lh, sp.train, get<double>(rc.raw, "on_threshold_w")));
    io::write_text(rc.output_dir / "model.json", smp_to_json(m).dump(2) + "\n");
    out << "train: smp\n";
  }
  return kOk;
}

inline int cmd_disaggregate(const RunConfig& rc, std::ostream& out) {
  const LoadedHouse lh = load_house(rc);
  const fs::path mp = model_path(rc);
  if (!fs::exists(mp)) throw ConfigError("model file not found: " + mp.string());
  const json mj = io::read_json(mp);
  const DatasetSplit sp = split_house(lh, rc);
  const WindowedDataset& part = pick_split(sp, get<std::string>(rc.raw, "split"));
  const MethodOutput mo = run_model_file(mj, part, rc.threads);
  const auto truth_on = partition_truth(lh, part, get<double>(rc.raw, "on_threshold_w"));

  json windows = json::array();
  for (std::size_t k = 0; k < part.K(); ++k) {
    json devs = json::array();
    for (std::size_t i = 0; i < part.L(); ++i)
      devs.push_back({{"name", lh.names[i]},
                      {"estimate_w", io::vec(mo.estimates[i].col(static_cast<Eigen::Index>(k)))},
                      {"on", static_cast<bool>(mo.on[k][i])}});
    json w{{"window", part.first_window + k}, {"devices", devs}};
    if (!mo.codes.empty()) w["codes"] = io::vec(mo.codes[k]);
    windows.push_back(std::move(w));
  }
  json totals = json::object();
  for (std::size_t i = 0; i < part.L(); ++i) totals[lh.names[i]] = mo.estimates[i].sum();
  ensure_dir(rc.output_dir);
  const json report{{"meta", {{"timestamp", iso_timestamp()}}},
                    {"method", mo.method},
                    {"omega", part.omega},
                    {"split", get<std::string>(rc.raw, "split")},
                    {"first_window", part.first_window},
                    {"unconverged_windows", mo.unconverged},
                    {"totals_watt_samples", totals},
                    {"windows", windows}};
  io::write_text(rc.output_dir / "report.json", report.dump(2) + "\n");
  io::write_text(rc.output_dir / "report.csv",
                 report_csv(lh.names, mo.estimates, mo.on, part.first_window, &part.device, &truth_on));
  out << "disaggregate: " << mo.method << " windows=" << part.K() << "\n";
  return kOk;
}

inline int cmd_eval(const RunConfig& rc, std::ostream& out) {
  const LoadedHouse lh = load_house(rc);
  const fs::path mp = model_path(rc);
  if (!fs::exists(mp)) throw ConfigError("model file not found: " + mp.string());
  const json mj = io::read_json(mp);
  const DatasetSplit sp = split_house(lh, rc);
  const WindowedDataset& part = pick_split(sp, get<std::string>(rc.raw, "split"));
  const double thr = get<double>(rc.raw, "on_threshold_w");
  const auto truth_on = partition_truth(lh, part, thr);

  const MethodOutput mo = run_model_file(mj, part, rc.threads);
  const MetricSet ms = compute_metrics(mo.estimates, part.device, part.aggregate, mo.on, truth_on);
  json result{{"meta", {{"timestamp", iso_timestamp()}}},
              {"method", mo.method},
              {"split", get<std::string>(rc.raw, "split")},
              {"windows", part.K()},
              {"config", rc.raw},
              {"metrics", metrics_to_json(ms, lh.names)}};
  if (mj.contains("hyper")) result["model_hyper"] = mj["hyper"];
  std::ostringstream csv;
  csv << "method,acc,precision,recall,f_score\n";
  auto row = [&](const std::string& name, const MetricSet& m) {
    csv << name << ',' << detail::format_number(m.acc) << ',' << detail::format_number(m.precision) << ','
        << detail::format_number(m.recall) << ',' << detail::format_number(m.f_score) << '\n';
  };
  row(mo.method, ms);
  out << "eval: " << mo.method << " acc=" << ms.acc << " F=" << ms.f_score << "\n";

  if (get<bool>(rc.raw, "compare_baselines")) {
    json base = json::object();
    const CdlModel cdl = cdl_train(sp.train, static_cast<std::size_t>(rc.hyper.N_i), rc.hyper.lambda1,
                                   get<int>(rc.raw, "cdl_iters"), rc.hyper.seed);
    const BaselineEstimate ce = cdl_predict(cdl, part.aggregate);
    const MetricSet cm = compute_metrics(ce.estimates, part.device, part.aggregate, ce.on, truth_on);
    const SmpModel smp = smp_train(sp.train, partition_truth(lh, sp.train, thr));
    const BaselineEstimate se = smp_predict(smp, part.K());
    const MetricSet sm = compute_metrics(se.estimates, part.device, part.aggregate, se.on, truth_on);
    base["cdl"] = metrics_to_json(cm, lh.names);
    base["smp"] = metrics_to_json(sm, lh.names);
    result["baselines"] = base;
    row("cdl", cm);
    row("smp", sm);
    out << "eval: cdl acc=" << cm.acc << " F=" << cm.f_score << "\n";
    out << "eval: smp acc=" << sm.acc << " F=" << sm.f_score << "\n";
  }
  ensure_dir(rc.output_dir);
  io::write_text(rc.output_dir / "metrics.json", result.dump(2) + "\n");
  io::write_text(rc.output_dir / "metrics.csv", csv.str());
  return kOk;
}

inline int cmd_sweep(const RunConfig& rc, std::ostream& out) {
  const LoadedHouse lh = load_house(rc);
  const auto kind = get<std::string>(rc.raw, "sweep");
  std::vector<GridCell> cells;
  if (kind == "architecture") {
    const auto ms = get<std::vector<Eigen::Index>>(rc.raw, "sweep_m");
    const auto ws = get<std::vector<std::size_t>>(rc.raw, "sweep_omega");
    for (auto m : ms)
      if (m < 1) throw ConfigError("sweep_m entries must be >= 1");
    for (auto w : ws)
      if (w < 2) throw ConfigError("sweep_omega entries must be >= 2");
    cells = architecture_grid(rc.hyper, ms, ws);
  } else if (kind == "weights") {
    auto l2 = get<std::vector<double>>(rc.raw, "sweep_lambda2"), l3 = get<std::vector<double>>(rc.raw, "sweep_lambda3"),
         l4 = get<std::vector<double>>(rc.raw, "sweep_lambda4");
    for (const auto* v : {&l2, &l3, &l4})
      for (double x : *v)
        if (!(x >= 0)) throw ConfigError("sweep lambda entries must be >= 0");
    cells = weight_grid(rc.hyper, l2, l3, l4);
  } else {
    throw ConfigError("sweep must be \"architecture\" or \"weights\"");
  }
  if (cells.empty()) throw ConfigError("sweep grid is empty");
  const auto boundary = get<std::size_t>(rc.raw, "split_boundary_s");
  ensure_dir(rc.output_dir);
  std::ostringstream csv;
  csv << "m,omega,lambda2,lambda3,lambda4,validation_acc,status,outer_iters\n";
  for (const auto& c : cells) {
    const GridRow r = evaluate_cell(lh.signals, lh.names, boundary, rc.hyper, c);
    csv << c.m << ',' << c.omega << ',' << detail::format_number(c.lambda2) << ',' << detail::format_number(c.lambda3)
        << ',' << detail::format_number(c.lambda4) << ',' << detail::format_number(r.validation_acc) << ',' << r.status
        << ',' << r.outer_iters << '\n';
    out << "sweep: m=" << c.m << " omega=" << c.omega << " lambda=(" << c.lambda2 << "," << c.lambda3 << ","
        << c.lambda4 << ") acc=" << r.validation_acc << "\n";
  }
  io::write_text(rc.output_dir / "sweep.csv", csv.str());
  return kOk;
}

inline int cmd_gradcheck(const RunConfig& rc, std::ostream& out) {
  const auto rows = gradcheck_all(rc.hyper.seed, get<int>(rc.raw, "gradcheck_cases"));
  bool ok = true;
  std::ostringstream csv;
  csv << "check,case,parameters,max_rel_error,pass\n";
  for (const auto& r : rows) {
    ok = ok && r.pass;
    out << std::left << std::setw(11) << r.name << " case " << std::setw(3) << r.case_index << " params "
        << std::setw(4) << r.parameters << " max_rel_err " << std::scientific << std::setprecision(3)
        << r.max_rel_error << std::defaultfloat << "  " << (r.pass ? "PASS" : "FAIL") << "\n";
    csv << r.name << ',' << r.case_index << ',' << r.parameters << ',' << detail::format_number(r.max_rel_error) << ','
        << (r.pass ? 1 : 0) << '\n';
  }
  ensure_dir(rc.output_dir);
  io::write_text(rc.output_dir / "gradcheck.csv", csv.str());
  out << (ok ? "gradcheck: all checks passed\n" : "gradcheck: some checks failed\n");
  return ok ? kOk : kNumeric;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Deep temporal dictionary learning for energy disaggregation"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::vector<std::string> sets;
  int threads = 0;
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--set", sets, "Override a configuration key (key=value), repeatable");
  app.add_option("--threads", threads, "Worker threads (default 1)");
  struct Cmd {
    const char* name;
    const char* help;
    int (*fn)(const RunConfig&, std::ostream&);
  };
  const Cmd cmds[] = {{"synth", "Write a synthetic household (CSV channels, manifest, truth)", cmd_synth},
                      {"train", "Train a model (method dtdl, cdl or smp)", cmd_train},
                      {"disaggregate", "Disaggregate a partition with a trained model", cmd_disaggregate},
                      {"eval", "Accuracy, precision, recall and F-score of a trained model", cmd_eval},
                      {"sweep", "Validation accuracy over an architecture or weight grid", cmd_sweep},
                      {"gradcheck", "Finite-difference checks of the analytic gradients", cmd_gradcheck}};
  for (const auto& c : cmds) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--set", sets, "Override a configuration key (key=value), repeatable");
    sub->add_option("--threads", threads, "Worker threads (default 1)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfig;
  }
  const auto* chosen = app.get_subcommands().front();
  try {
    const RunConfig rc = resolve_config(config_path, sets, threads);
    for (const auto& c : cmds)
      if (chosen->get_name() == c.name) return c.fn(rc, out);
    return kUnexpected;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kConfig;
  } catch (const NumericError& e) {
    err << "numeric failure in " << e.block() << ": " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUnexpected;
  }
}

}  // namespace dtdl::cli
