#pragma once

// Batch recurrent-fluctuation forecaster: the expected one-step increment at a
// given clock time is the validity-masked mean of the same increment on the
// previous N days, and a forecast composes those increments over the horizon.

#include <cstddef>

#include "gridcast/error.hpp"
#include "gridcast/quality.hpp"
#include "gridcast/time_grid.hpp"

namespace gridcast {

struct RecurrentConfig {
  int n_days = 7;
  int tau_d = 288;
  int horizon = 12;
  // false reproduces the unfiltered average (every indicator forced to 1).
  bool filtered = true;

  void validate() const {
    if (n_days < 1) throw Error(ErrorCode::ConfigError, "n_days must be >= 1");
    if (tau_d < 2) throw Error(ErrorCode::ConfigError, "tau_d must be >= 2");
    if (horizon < 1) throw Error(ErrorCode::ConfigError, "horizon must be >= 1");
    if (horizon > tau_d)
      throw Error(ErrorCode::ConfigError, "horizon beyond one day would read future samples");
  }
};

struct FluctuationEstimate {
  double value = 0.0;
  int count = 0;
};

/// Mean increment into position t over the previous n_days days. Only
/// positions < visible_end are consulted for validity decisions.
inline FluctuationEstimate expected_fluctuation(const SeriesWindow& w, std::size_t t,
                                                const RecurrentConfig& cfg,
                                                const ValidityStats& stats,
                                                std::size_t visible_end = std::size_t(-1)) {
  const auto span = static_cast<std::ptrdiff_t>(cfg.n_days) * cfg.tau_d;
  if (static_cast<std::ptrdiff_t>(t) - span < 1)
    throw Error(ErrorCode::InsufficientHistory,
                "expected_fluctuation needs " + std::to_string(span + 1) + " prior positions");
  double sum = 0.0;
  int count = 0;
  for (int n = 1; n <= cfg.n_days; ++n) {
    const std::size_t k = t - static_cast<std::size_t>(n) * static_cast<std::size_t>(cfg.tau_d);
    if (k >= w.size()) continue;
    bool use;
    if (cfg.filtered) {
      use = increment_validity(w, k, k - 1, stats, visible_end);
    } else {
      use = w.values[k].is_present() && w.values[k - 1].is_present();
    }
    if (!use) continue;
    sum += w.values[k].value - w.values[k - 1].value;
    ++count;
  }
  if (count == 0) return {};
  return {sum / count, count};
}

/// y_t if it is a valid point (judged only on samples up to t), otherwise the
/// most recent earlier valid value, otherwise 0.
inline double repaired_terminal_value(const SeriesWindow& w, std::size_t t,
                                      const ValidityStats& stats) {
  for (std::size_t k = t + 1; k-- > 0;)
    if (point_validity(w, k, stats, t + 1).point_valid) return w.values[k].value;
  return 0.0;
}

/// y_t + sum_{j=1..horizon} <dy_{t+j}>. Reads no sample after t.
inline double compose_recurrent_forecast(const SeriesWindow& w, std::size_t t,
                                         const RecurrentConfig& cfg,
                                         const ValidityStats& stats) {
  cfg.validate();
  if (t >= w.size()) throw Error(ErrorCode::InsufficientHistory, "origin outside window");
  double y = repaired_terminal_value(w, t, stats);
  for (int j = 1; j <= cfg.horizon; ++j)
    y += expected_fluctuation(w, t + static_cast<std::size_t>(j), cfg, stats, t + 1).value;
  return y;
}

}  // namespace gridcast
