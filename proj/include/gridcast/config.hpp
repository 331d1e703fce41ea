#pragma once

// Flat key=value run configuration shared by every CLI command. Files hold one
// key per line, '#' starts a comment, and unknown keys are rejected.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "gridcast/adaptive.hpp"
#include "gridcast/error.hpp"
#include "gridcast/numfmt.hpp"
#include "gridcast/quality.hpp"
#include "gridcast/recurrent.hpp"
#include "gridcast/synthgen.hpp"
#include "gridcast/time_grid.hpp"

namespace gridcast {

struct RunConfig {
  // tau_d / tau_w of 0 mean one day / one week of steps; monitor_lag of 0
  // means horizon - 1.
  SmoothingParams params{};
  ValidityStats validity{};
  GeneratorConfig gen{};
  std::int64_t step = 300;
  std::int64_t origin = 0;
  int lines = 1;
  double split = 0.75;
  unsigned jobs = 1;
  int n_days = 7;
  double intensity = 0.05;
  std::uint64_t scenario_seed = 1;

  RunConfig() {
    params.tau_d = 0;
    params.tau_w = 0;
    params.monitor_lag = 0;
  }

  int steps_per_day() const {
    if (step <= 0 || 86400 % step != 0) throw Error(ErrorCode::ConfigError, "step must divide 86400");
    return static_cast<int>(86400 / step);
  }

  TimeGrid grid() const {
    TimeGrid g{origin, step};
    g.validate();
    return g;
  }

  SmoothingParams smoothing() const {
    SmoothingParams p = params;
    if (p.tau_d == 0) p.tau_d = steps_per_day();
    if (p.tau_w == 0) p.tau_w = 7 * p.tau_d;
    if (p.monitor_lag == 0) p.monitor_lag = std::max(1, p.horizon - 1);
    p.validate();
    return p;
  }

  RecurrentConfig recurrent() const {
    RecurrentConfig r{n_days, smoothing().tau_d, params.horizon, true};
    r.validate();
    return r;
  }

  GeneratorConfig generator() const {
    GeneratorConfig g = gen;
    g.step_s = step;
    g.start_index = 0;
    g.validate();
    return g;
  }

  void validate() const {
    smoothing();
    validity.validate();
    generator();
    if (lines < 1) throw Error(ErrorCode::ConfigError, "lines must be >= 1");
    if (!(split >= 0.0 && split < 1.0)) throw Error(ErrorCode::ConfigError, "split must lie in [0, 1)");
    if (jobs < 1) throw Error(ErrorCode::ConfigError, "jobs must be >= 1");
    if (!(intensity >= 0.0 && intensity <= 1.0))
      throw Error(ErrorCode::ConfigError, "intensity must lie in [0, 1]");
  }
};

struct ConfigKey {
  std::string name;
  std::string doc;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

namespace config_detail {

inline double to_double(std::string_view key, std::string_view v) {
  auto d = parse_double(v);
  if (!d) throw Error(ErrorCode::ConfigError, std::string(key) + ": not a number: " + std::string(v));
  return *d;
}

inline std::int64_t to_int(std::string_view key, std::string_view v) {
  auto i = parse_int(v);
  if (!i) throw Error(ErrorCode::ConfigError, std::string(key) + ": not an integer: " + std::string(v));
  return *i;
}

inline bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error(ErrorCode::ConfigError, std::string(key) + ": expected true or false");
}

template <class T>
ConfigKey real(std::string name, std::string doc, T RunConfig::*group, double T::*field) {
  return {name, std::move(doc),
          [group, field, name](RunConfig& c, std::string_view v) { (c.*group).*field = to_double(name, v); },
          [group, field](const RunConfig& c) { return format_double((c.*group).*field); }};
}

template <class T, class I>
ConfigKey integer(std::string name, std::string doc, T RunConfig::*group, I T::*field) {
  return {name, std::move(doc),
          [group, field, name](RunConfig& c, std::string_view v) {
            (c.*group).*field = static_cast<I>(to_int(name, v));
          },
          [group, field](const RunConfig& c) { return std::to_string((c.*group).*field); }};
}

template <class T>
ConfigKey top(std::string name, std::string doc, T RunConfig::*field) {
  return {name, std::move(doc),
          [field, name](RunConfig& c, std::string_view v) {
            if constexpr (std::is_floating_point_v<T>)
              c.*field = to_double(name, v);
            else {
              const auto i = to_int(name, v);
              if (std::is_unsigned_v<T> && i < 0) throw Error(ErrorCode::ConfigError, name + " must be >= 0");
              c.*field = static_cast<T>(i);
            }
          },
          [field](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return format_double(c.*field);
            else
              return std::to_string(c.*field);
          }};
}

}  // namespace config_detail

/// Every accepted key, in documentation order.
inline const std::vector<ConfigKey>& config_keys() {
  using namespace config_detail;
  using R = RunConfig;
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    k.push_back(top("step", "grid step in seconds (must divide one day)", &R::step));
    k.push_back(top("origin", "epoch seconds of grid index 0", &R::origin));
    k.push_back(integer("horizon", "forecast horizon in steps", &R::params, &SmoothingParams::horizon));
    k.push_back(integer("monitor_lag", "lag of the blend/gate monitors; 0 means horizon - 1", &R::params,
                        &SmoothingParams::monitor_lag));
    k.push_back(integer("tau_d", "steps per day; 0 derives it from step", &R::params, &SmoothingParams::tau_d));
    k.push_back(integer("tau_w", "steps per week; 0 means 7 x tau_d", &R::params, &SmoothingParams::tau_w));
    k.push_back(real("r_d", "daily fluctuation smoothing rate", &R::params, &SmoothingParams::r_d));
    k.push_back(real("r_w", "weekly fluctuation smoothing rate", &R::params, &SmoothingParams::r_w));
    k.push_back(real("r_g", "blend fit smoothing rate", &R::params, &SmoothingParams::r_g));
    k.push_back(real("r_e", "model/persistence error smoothing rate", &R::params, &SmoothingParams::r_e));
    k.push_back(real("r_m", "moving-average rate", &R::params, &SmoothingParams::r_m));
    k.push_back(real("r_o", "mean-reversion fit smoothing rate", &R::params, &SmoothingParams::r_o));
    k.push_back(real("saturation_scale", "K_s; 0 derives it per line, inf disables damping", &R::params,
                     &SmoothingParams::saturation_scale));
    k.push_back(real("increment_threshold_factor", "valid change limit in units of global RMS",
                     &R::validity, &ValidityStats::increment_threshold_factor));
    k.push_back(integer("zero_run_min", "exact zeros in a row that mark an outage", &R::validity,
                        &ValidityStats::zero_run_min));
    k.push_back(real("outlier_factor", "valid magnitude limit in units of global RMS", &R::validity,
                     &ValidityStats::outlier_factor));
    k.push_back(top("n_days", "days averaged by the recurrent forecaster", &R::n_days));
    k.push_back(top("split", "fraction of each line streamed before scoring", &R::split));
    k.push_back(top("jobs", "worker threads", &R::jobs));
    k.push_back(top("lines", "lines produced by generate", &R::lines));
    k.push_back(top("intensity", "stress scenario intensity in [0, 1]", &R::intensity));
    k.push_back(top("scenario_seed", "stress scenario seed", &R::scenario_seed));
    k.push_back(integer("seed", "generator seed", &R::gen, &GeneratorConfig::seed));
    k.push_back(integer("days", "generated days", &R::gen, &GeneratorConfig::days));
    k.push_back(real("daily_amp", "generator daily amplitude", &R::gen, &GeneratorConfig::daily_amp));
    k.push_back(real("weekly_amp", "generator weekly amplitude", &R::gen, &GeneratorConfig::weekly_amp));
    k.push_back(real("offset", "generator offset", &R::gen, &GeneratorConfig::offset));
    k.push_back(real("noise_scale", "random-walk innovation scale", &R::gen, &GeneratorConfig::noise_scale));
    k.push_back(real("spike_prob", "spike probability per step", &R::gen, &GeneratorConfig::spike_prob));
    k.push_back(real("spike_scale", "spike size", &R::gen, &GeneratorConfig::spike_scale));
    k.push_back(real("outage_prob", "outage start probability per step", &R::gen, &GeneratorConfig::outage_prob));
    k.push_back(real("outage_mean_len", "mean outage length in steps", &R::gen, &GeneratorConfig::outage_mean_len));
    k.push_back(real("missing_prob", "missing-sample probability per step", &R::gen, &GeneratorConfig::missing_prob));
    k.push_back({"sign_flip", "negate the generated series",
                 [](RunConfig& c, std::string_view v) { c.gen.sign_flip = to_bool("sign_flip", v); },
                 [](const RunConfig& c) { return std::string(c.gen.sign_flip ? "true" : "false"); }});
    return k;
  }();
  return keys;
}

inline void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& k : config_keys())
    if (k.name == key) {
      k.set(cfg, trim(value));
      return;
    }
  throw Error(ErrorCode::ConfigError, "unknown config key '" + std::string(key) + "'");
}

/// Applies key=value lines on top of cfg.
inline void apply_config_text(RunConfig& cfg, std::string_view text) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::ConfigError, "config line " + std::to_string(line_no) + ": expected key=value");
    set_config_value(cfg, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

inline void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str());
}

/// The configuration as a loadable file, one documented key per line.
inline std::string describe_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : config_keys()) out += "# " + k.doc + "\n" + k.name + "=" + k.get(cfg) + "\n";
  return out;
}

}  // namespace gridcast
