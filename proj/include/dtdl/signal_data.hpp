#pragma once

// Appliance-level electricity signals: loading, resampling, windowing into
// fixed-length snippets, chronological splitting, and a finite-state
// synthetic household generator with exact ground truth.

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dtdl/error.hpp"
#include "dtdl/rng.hpp"

namespace dtdl {

using Signal = std::vector<double>;

struct Sample {
  double timestamp;  // seconds since epoch
  double watts;
};

/// One metered channel. device_id 0 is the mains, 1..L the appliances.
struct RawChannel {
  int device_id = 0;
  std::string name;
  std::vector<Sample> samples;

  void validate() const {
    for (std::size_t t = 0; t < samples.size(); ++t) {
      const auto& s = samples[t];
      if (!std::isfinite(s.timestamp) || !std::isfinite(s.watts))
        throw DataError("channel '" + name + "': non-finite value at sample " + std::to_string(t));
      if (s.watts < 0.0)
        throw DataError("channel '" + name + "': negative power at sample " + std::to_string(t));
      if (t > 0 && !(s.timestamp > samples[t - 1].timestamp))
        throw DataError("channel '" + name + "': timestamps not strictly increasing at sample " +
                        std::to_string(t));
    }
  }
};

/// Affine normalization: normalized = (watts - offset) / scale.
struct Scaler {
  double scale = 1.0;
  double offset = 0.0;

  double normalize(double watts) const { return (watts - offset) / scale; }
  double to_watts(double v) const { return v * scale + offset; }
};

/// Per-device and aggregate snippets of length omega, stored in watts.
/// Column k of device[i] is y_i(k); column k of aggregate is the window sum.
struct WindowedDataset {
  std::size_t omega = 0;
  std::vector<std::string> device_names;
  std::vector<Eigen::MatrixXd> device;  // L matrices, omega x K
  Eigen::MatrixXd aggregate;            // omega x K
  Scaler scaler;
  std::size_t first_window = 0;  // index of column 0 in the source windowing

  std::size_t K() const { return static_cast<std::size_t>(aggregate.cols()); }
  std::size_t L() const { return device.size(); }

  Eigen::VectorXd device_snippet(std::size_t k, std::size_t i) const { return device[i].col(k); }
  Eigen::VectorXd aggregate_snippet(std::size_t k) const { return aggregate.col(k); }

  Eigen::VectorXd normalized_device(std::size_t k, std::size_t i) const {
    return (device[i].col(k).array() - scaler.offset) / scaler.scale;
  }
  Eigen::VectorXd normalized_aggregate(std::size_t k) const {
    return (aggregate.col(k).array() - scaler.offset) / scaler.scale;
  }

  /// Windows [begin, end) as a new dataset sharing the scaler.
  WindowedDataset slice(std::size_t begin, std::size_t end) const {
    WindowedDataset out;
    out.omega = omega;
    out.device_names = device_names;
    out.scaler = scaler;
    out.first_window = first_window + begin;
    const auto n = static_cast<Eigen::Index>(end - begin);
    out.aggregate = aggregate.middleCols(static_cast<Eigen::Index>(begin), n);
    for (const auto& d : device) out.device.push_back(d.middleCols(static_cast<Eigen::Index>(begin), n));
    return out;
  }
};

/// Scale = largest aggregate sample over the given windows; offset 0.
inline Scaler fit_scaler(const Eigen::MatrixXd& aggregate) {
  Scaler s;
  const double peak = aggregate.size() ? aggregate.maxCoeff() : 0.0;
  s.scale = peak > 0.0 ? peak : 1.0;
  return s;
}

/// Elementwise sum over devices.
inline Signal aggregate(const std::vector<Signal>& device_signals) {
  if (device_signals.empty()) return {};
  const std::size_t T = device_signals.front().size();
  Signal out(T, 0.0);
  for (std::size_t i = 0; i < device_signals.size(); ++i) {
    const auto& s = device_signals[i];
    if (s.size() != T)
      throw DataError("aggregate: device " + std::to_string(i) + " has length " + std::to_string(s.size()) +
                      ", expected " + std::to_string(T));
    for (std::size_t t = 0; t < T; ++t) {
      if (!std::isfinite(s[t])) throw DataError("aggregate: device " + std::to_string(i) + " has a non-finite sample");
      out[t] += s[t];
    }
  }
  return out;
}

/// Mean-decimates a channel sampled at an integer rate down to 1 Hz.
/// Sample t falls in bin floor(timestamp - first_timestamp).
inline RawChannel resample_to_1hz(const RawChannel& channel, double source_rate) {
  if (!(source_rate >= 1.0) || std::floor(source_rate) != source_rate)
    throw DataError("resample: source rate " + std::to_string(source_rate) + " Hz is not an integer multiple of 1 Hz");
  channel.validate();
  RawChannel out;
  out.device_id = channel.device_id;
  out.name = channel.name;
  if (channel.samples.empty()) return out;

  constexpr double slack = 1e-9;
  std::vector<std::string> gaps;
  for (std::size_t t = 1; t < channel.samples.size(); ++t) {
    const double dt = channel.samples[t].timestamp - channel.samples[t - 1].timestamp;
    if (dt > 1.0 + slack) {
      std::ostringstream os;
      os << "[" << channel.samples[t - 1].timestamp << ", " << channel.samples[t].timestamp << "]";
      gaps.push_back(os.str());
    }
  }
  if (!gaps.empty()) {
    std::string msg = "resample: channel '" + channel.name + "' has gaps longer than one bin:";
    for (const auto& g : gaps) msg += " " + g;
    throw DataError(msg);
  }

  const double t0 = channel.samples.front().timestamp;
  long current = -1;
  double sum = 0.0;
  std::size_t count = 0;
  auto flush = [&] {
    if (count) out.samples.push_back({t0 + static_cast<double>(current), sum / static_cast<double>(count)});
  };
  for (const auto& s : channel.samples) {
    const long bin = static_cast<long>(std::floor(s.timestamp - t0 + slack));
    if (bin != current) {
      flush();
      current = bin;
      sum = 0.0;
      count = 0;
    }
    sum += s.watts;
    ++count;
  }
  flush();
  return out;
}

/// Cuts L equal-length signals into floor(T / omega) windows; the trailing
/// partial window is dropped. The scaler is fitted to all windows; split_dataset
/// refits it to the training partition.
inline WindowedDataset make_windows(const std::vector<Signal>& device_signals, std::size_t omega,
                                    std::vector<std::string> names = {}) {
  if (omega < 2) throw DataError("make_windows: omega must be >= 2");
  const Signal total = aggregate(device_signals);
  const std::size_t T = device_signals.empty() ? 0 : total.size();
  if (T < omega)
    throw DataError("make_windows: signal length " + std::to_string(T) + " is shorter than omega " +
                    std::to_string(omega));
  const std::size_t K = T / omega;
  const std::size_t L = device_signals.size();
  if (names.empty())
    for (std::size_t i = 0; i < L; ++i) names.push_back("device" + std::to_string(i + 1));
  if (names.size() != L) throw DataError("make_windows: name count does not match device count");

  WindowedDataset ds;
  ds.omega = omega;
  ds.device_names = std::move(names);
  const auto w = static_cast<Eigen::Index>(omega);
  const auto k_count = static_cast<Eigen::Index>(K);
  for (const auto& s : device_signals)
    ds.device.push_back(Eigen::Map<const Eigen::MatrixXd>(s.data(), w, k_count));
  ds.aggregate = Eigen::Map<const Eigen::MatrixXd>(total.data(), w, k_count);
  ds.scaler = fit_scaler(ds.aggregate);
  return ds;
}

struct DatasetSplit {
  WindowedDataset train;
  WindowedDataset validation;
  WindowedDataset test;
};

/// Windows before `boundary` (week one) are split 80/20 chronologically into
/// train/validation; the rest form the test set. All three share a scaler
/// fitted on the training windows.
inline DatasetSplit split_dataset(const WindowedDataset& ds, std::size_t boundary) {
  const std::size_t K = ds.K();
  if (boundary == 0 || boundary >= K)
    throw DataError("split_dataset: boundary " + std::to_string(boundary) + " leaves an empty partition (K=" +
                    std::to_string(K) + ")");
  const std::size_t n_train = (4 * boundary) / 5;
  if (n_train == 0 || n_train == boundary)
    throw DataError("split_dataset: " + std::to_string(boundary) +
                    " week-one windows are too few for an 80/20 split");
  DatasetSplit out;
  out.train = ds.slice(0, n_train);
  const Scaler scaler = fit_scaler(out.train.aggregate);
  out.train.scaler = scaler;
  out.validation = ds.slice(n_train, boundary);
  out.validation.scaler = scaler;
  out.test = ds.slice(boundary, K);
  out.test.scaler = scaler;
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic households

struct DwellModel {
  enum class Kind { Geometric, Fixed };
  Kind kind = Kind::Geometric;
  double mean = 1.0;  // samples
};

struct ApplianceState {
  double power_w = 0.0;
  DwellModel dwell;
};

/// Appliance as a cyclic finite-state machine: state s hands over to s+1 mod n.
struct DeviceModel {
  std::string name;
  std::vector<ApplianceState> states;
};

struct SyntheticSpec {
  std::vector<DeviceModel> devices;
  std::size_t duration = 0;  // samples at 1 Hz
  double noise_std = 0.0;    // watts
  std::uint64_t seed = 0;

  void validate() const {
    for (const auto& d : devices) {
      if (d.states.empty()) throw ConfigError("synthetic device '" + d.name + "' has no states");
      for (const auto& s : d.states) {
        if (!(s.power_w >= 0.0) || !std::isfinite(s.power_w))
          throw ConfigError("synthetic device '" + d.name + "': power levels must be >= 0");
        if (!(s.dwell.mean >= 1.0)) throw ConfigError("synthetic device '" + d.name + "': dwell times must be >= 1");
      }
    }
    if (!(noise_std >= 0.0)) throw ConfigError("synthetic spec: noise_std must be >= 0");
  }
};

struct SyntheticHousehold {
  std::vector<std::string> names;
  std::vector<Signal> signals;             // L x T watts, noisy
  std::vector<std::vector<bool>> active;   // L x T, state power > 0
};

inline SyntheticHousehold synth_household(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticHousehold out;
  const Rng root(spec.seed);
  for (std::size_t i = 0; i < spec.devices.size(); ++i) {
    const auto& dev = spec.devices[i];
    Rng states = root.split("states").split(i);
    Rng noise = root.split("noise").split(i);
    Signal sig(spec.duration, 0.0);
    std::vector<bool> act(spec.duration, false);
    auto draw = [&](std::size_t st) -> std::uint64_t {
      const auto& dw = dev.states[st].dwell;
      const std::uint64_t n = dw.kind == DwellModel::Kind::Fixed ? static_cast<std::uint64_t>(std::llround(dw.mean))
                                                                 : states.geometric(dw.mean);
      return std::max<std::uint64_t>(n, 1);
    };
    std::size_t state = 0;
    std::uint64_t left = draw(state);
    for (std::size_t t = 0; t < spec.duration; ++t) {
      const double p = dev.states[state].power_w;
      act[t] = p > 0.0;
      const double n = spec.noise_std > 0.0 ? spec.noise_std * noise.normal() : 0.0;
      sig[t] = std::max(0.0, p + n);
      if (--left == 0) {
        state = (state + 1) % dev.states.size();
        left = draw(state);
      }
    }
    out.names.push_back(dev.name.empty() ? "device" + std::to_string(i + 1) : dev.name);
    out.signals.push_back(std::move(sig));
    out.active.push_back(std::move(act));
  }
  return out;
}

/// Per-window ground truth: window k is "on" for device i if any of its
/// samples has an active state. Result is K x L.
inline std::vector<std::vector<bool>> window_truth(const std::vector<std::vector<bool>>& active, std::size_t omega,
                                                   std::size_t first_window = 0, std::size_t count = SIZE_MAX) {
  std::vector<std::vector<bool>> out;
  if (active.empty() || omega == 0) return out;
  const std::size_t K = active.front().size() / omega;
  const std::size_t end = count == SIZE_MAX ? K : std::min(K, first_window + count);
  for (std::size_t k = first_window; k < end; ++k) {
    std::vector<bool> row(active.size(), false);
    for (std::size_t i = 0; i < active.size(); ++i)
      for (std::size_t t = k * omega; t < (k + 1) * omega; ++t)
        if (active[i][t]) {
          row[i] = true;
          break;
        }
    out.push_back(std::move(row));
  }
  return out;
}

inline SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> top = {"devices", "duration", "noise_std", "seed"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(top.begin(), top.end(), it.key()) == top.end())
      throw ConfigError("synthetic spec: unknown key '" + it.key() + "'");
  SyntheticSpec spec;
  try {
    spec.duration = j.at("duration").get<std::size_t>();
    spec.noise_std = j.value("noise_std", 0.0);
    spec.seed = j.value("seed", std::uint64_t{0});
    for (const auto& jd : j.at("devices")) {
      DeviceModel d;
      d.name = jd.value("name", std::string{});
      for (const auto& js : jd.at("states")) {
        ApplianceState s;
        s.power_w = js.at("power_w").get<double>();
        const auto& dw = js.at("dwell");
        const std::string kind = dw.value("kind", std::string("geometric"));
        if (kind == "geometric")
          s.dwell.kind = DwellModel::Kind::Geometric;
        else if (kind == "fixed")
          s.dwell.kind = DwellModel::Kind::Fixed;
        else
          throw ConfigError("synthetic spec: unknown dwell kind '" + kind + "'");
        s.dwell.mean = dw.at("mean").get<double>();
        d.states.push_back(s);
      }
      spec.devices.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

inline nlohmann::json synthetic_spec_to_json(const SyntheticSpec& spec) {
  nlohmann::json j;
  j["duration"] = spec.duration;
  j["noise_std"] = spec.noise_std;
  j["seed"] = spec.seed;
  j["devices"] = nlohmann::json::array();
  for (const auto& d : spec.devices) {
    nlohmann::json jd;
    jd["name"] = d.name;
    jd["states"] = nlohmann::json::array();
    for (const auto& s : d.states)
      jd["states"].push_back({{"power_w", s.power_w},
                              {"dwell",
                               {{"kind", s.dwell.kind == DwellModel::Kind::Fixed ? "fixed" : "geometric"},
                                {"mean", s.dwell.mean}}}});
    j["devices"].push_back(jd);
  }
  return j;
}

/// The three-appliance house used by the end-to-end checks: a cycling
/// refrigerator, a two-stage washer and a short high-power kettle.
inline SyntheticSpec reference_house_spec(std::uint64_t seed = 7, std::size_t duration = 2800) {
  using K = DwellModel::Kind;
  SyntheticSpec spec;
  spec.duration = duration;
  spec.noise_std = 2.0;
  spec.seed = seed;
  spec.devices = {
      {"fridge", {{0.0, {K::Geometric, 60.0}}, {150.0, {K::Geometric, 45.0}}}},
      {"washer", {{0.0, {K::Geometric, 150.0}}, {500.0, {K::Geometric, 30.0}}, {250.0, {K::Geometric, 30.0}}}},
      {"kettle", {{0.0, {K::Geometric, 120.0}}, {1500.0, {K::Geometric, 20.0}}}},
  };
  return spec;
}

// ---------------------------------------------------------------------------
// CSV channels and house manifests

namespace detail {

inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline bool parse_number(std::string_view s, double& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace detail

/// Reads header-less `timestamp_s,watts` rows.
inline RawChannel read_channel_csv(const std::filesystem::path& path, int device_id = 0, std::string name = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open channel file '" + path.string() + "'");
  RawChannel ch;
  ch.device_id = device_id;
  ch.name = name.empty() ? path.stem().string() : std::move(name);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto comma = line.find(',');
    double ts = 0.0, w = 0.0;
    if (comma == std::string::npos || !detail::parse_number(std::string_view(line).substr(0, comma), ts) ||
        !detail::parse_number(std::string_view(line).substr(comma + 1), w))
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed row '" + line + "'");
    if (!std::isfinite(ts) || !std::isfinite(w))
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": non-finite value");
    if (w < 0.0) throw DataError(path.string() + ":" + std::to_string(lineno) + ": negative power");
    if (!ch.samples.empty() && !(ts > ch.samples.back().timestamp))
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": timestamp not strictly increasing");
    ch.samples.push_back({ts, w});
  }
  return ch;
}

inline void write_channel_csv(const std::filesystem::path& path, const RawChannel& ch) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write channel file '" + path.string() + "'");
  for (const auto& s : ch.samples)
    out << detail::format_number(s.timestamp) << ',' << detail::format_number(s.watts) << '\n';
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

/// 1 Hz channel with timestamps start, start+1, ...
inline RawChannel channel_from_signal(const Signal& s, int device_id, std::string name, double start = 0.0) {
  RawChannel ch;
  ch.device_id = device_id;
  ch.name = std::move(name);
  ch.samples.reserve(s.size());
  for (std::size_t t = 0; t < s.size(); ++t) ch.samples.push_back({start + static_cast<double>(t), s[t]});
  return ch;
}

struct House {
  std::string house_id;
  RawChannel mains;
  std::vector<RawChannel> devices;  // device_id 1..L in manifest order
};

/// Manifest: {"house_id": str, "mains": path, "devices": [{"name": str, "path": path}]}.
/// Relative paths resolve against the manifest's directory.
inline House load_house_csv(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open manifest '" + manifest_path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest '" + manifest_path.string() + "': " + e.what());
  }
  const auto base = manifest_path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path q(p);
    return q.is_absolute() ? q : base / q;
  };
  House h;
  try {
    h.house_id = j.at("house_id").get<std::string>();
    h.mains = read_channel_csv(resolve(j.at("mains").get<std::string>()), 0, "mains");
    int id = 1;
    for (const auto& d : j.at("devices"))
      h.devices.push_back(read_channel_csv(resolve(d.at("path").get<std::string>()), id++, d.at("name").get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest '" + manifest_path.string() + "': " + e.what());
  }
  return h;
}

/// Aligns 1 Hz channels on their common time span. Each channel must be
/// contiguous (one sample per second).
inline std::vector<Signal> align_channels(const std::vector<RawChannel>& channels) {
  if (channels.empty()) return {};
  double start = -INFINITY, end = INFINITY;
  for (const auto& c : channels) {
    if (c.samples.empty()) throw DataError("channel '" + c.name + "' is empty");
    start = std::max(start, c.samples.front().timestamp);
    end = std::min(end, c.samples.back().timestamp);
  }
  if (end < start) throw DataError("channels do not overlap in time");
  const auto T = static_cast<std::size_t>(std::llround(end - start)) + 1;
  std::vector<Signal> out;
  for (const auto& c : channels) {
    const auto offset = static_cast<std::size_t>(std::llround(start - c.samples.front().timestamp));
    if (offset + T > c.samples.size())
      throw DataError("channel '" + c.name + "' is not contiguous at 1 Hz");
    Signal s(T);
    for (std::size_t t = 0; t < T; ++t) {
      const auto& smp = c.samples[offset + t];
      if (std::abs(smp.timestamp - (start + static_cast<double>(t))) > 1e-6)
        throw DataError("channel '" + c.name + "' is not contiguous at 1 Hz");
      s[t] = smp.watts;
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace dtdl
