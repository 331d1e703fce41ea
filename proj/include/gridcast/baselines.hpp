#pragma once

// Reference predictors. They are strict: any missing lag is an error, never a
// silent fallback, so they can serve as clean oracles.

#include <cstddef>
#include <string>

#include "gridcast/error.hpp"
#include "gridcast/time_grid.hpp"

namespace gridcast {

/// Convex daily/weekly weight, 0 <= g <= 1.
class BlendWeight {
 public:
  constexpr BlendWeight() = default;
  explicit BlendWeight(double g) : g_(g) {
    if (!(g >= 0.0 && g <= 1.0))
      throw Error(ErrorCode::ConfigError, "blend weight must lie in [0, 1]");
  }
  constexpr double value() const noexcept { return g_; }

 private:
  double g_ = 0.0;
};

namespace detail {

inline double require_value(const SeriesWindow& w, std::ptrdiff_t pos, ErrorCode code,
                            const char* what) {
  if (pos < 0 || static_cast<std::size_t>(pos) >= w.size() || !w.values[pos].is_present())
    throw Error(code, std::string(what) + " at position " + std::to_string(pos));
  return w.values[pos].value;
}

inline std::ptrdiff_t lagged(std::size_t t, int i, int lag) {
  if (i > lag)
    throw Error(ErrorCode::InsufficientHistory, "horizon exceeds seasonal lag (would read the future)");
  return static_cast<std::ptrdiff_t>(t) + i - lag;
}

}  // namespace detail

inline double persistence_forecast(const SeriesWindow& w, std::size_t t, int /*i*/) {
  return detail::require_value(w, static_cast<std::ptrdiff_t>(t), ErrorCode::NoTerminalValue,
                               "no terminal value");
}

/// y_t plus yesterday's change over the same horizon.
inline double seasonal_daily_forecast(const SeriesWindow& w, std::size_t t, int i, int tau_d) {
  const double yt = detail::require_value(w, static_cast<std::ptrdiff_t>(t),
                                          ErrorCode::InsufficientHistory, "missing y_t");
  const auto ahead = detail::lagged(t, i, tau_d);
  const auto base = static_cast<std::ptrdiff_t>(t) - tau_d;
  const double a = detail::require_value(w, ahead, ErrorCode::InsufficientHistory, "missing daily lag");
  const double b = detail::require_value(w, base, ErrorCode::InsufficientHistory, "missing daily lag");
  return yt + a - b;
}

inline double seasonal_blend_forecast(const SeriesWindow& w, std::size_t t, int i, int tau_d,
                                      int tau_w, BlendWeight g) {
  const double yt = detail::require_value(w, static_cast<std::ptrdiff_t>(t),
                                          ErrorCode::InsufficientHistory, "missing y_t");
  const auto req = [&](std::ptrdiff_t p) {
    return detail::require_value(w, p, ErrorCode::InsufficientHistory, "missing seasonal lag");
  };
  const auto st = static_cast<std::ptrdiff_t>(t);
  const double daily = req(detail::lagged(t, i, tau_d)) - req(st - tau_d);
  const double weekly = req(detail::lagged(t, i, tau_w)) - req(st - tau_w);
  return yt + (1.0 - g.value()) * daily + g.value() * weekly;
}

}  // namespace gridcast
