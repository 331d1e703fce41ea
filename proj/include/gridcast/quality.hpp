#pragma once

// Validity indicators for points and increments, and the pooled RMS statistic
// their thresholds are expressed in.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string_view>

#include "gridcast/error.hpp"
#include "gridcast/time_grid.hpp"

namespace gridcast {

struct ValidityStats {
  double global_rms = 0.0;
  double increment_threshold_factor = 2.0;
  int zero_run_min = 2;
  // Point-level outlier bound, in units of global_rms.
  double outlier_factor = 10.0;

  void validate() const {
    if (!(global_rms >= 0.0) || !std::isfinite(global_rms))
      throw Error(ErrorCode::ConfigError, "global_rms must be finite and >= 0");
    if (!(increment_threshold_factor > 0.0))
      throw Error(ErrorCode::ConfigError, "increment_threshold_factor must be > 0");
    if (zero_run_min < 2) throw Error(ErrorCode::ConfigError, "zero_run_min must be >= 2");
    if (!(outlier_factor > 0.0)) throw Error(ErrorCode::ConfigError, "outlier_factor must be > 0");
  }

  double increment_threshold() const { return increment_threshold_factor * global_rms; }
  double outlier_threshold() const { return outlier_factor * global_rms; }

  friend bool operator==(const ValidityStats&, const ValidityStats&) = default;
};

enum class ValidityReason { Ok, Missing, NonNumeric, ZeroRun, Outlier };

constexpr std::string_view to_string(ValidityReason r) noexcept {
  switch (r) {
    case ValidityReason::Ok: return "Ok";
    case ValidityReason::Missing: return "Missing";
    case ValidityReason::NonNumeric: return "NonNumeric";
    case ValidityReason::ZeroRun: return "ZeroRun";
    case ValidityReason::Outlier: return "Outlier";
  }
  return "?";
}

struct ValidityVerdict {
  bool point_valid = false;
  ValidityReason reason = ValidityReason::Missing;

  static constexpr ValidityVerdict ok() { return {true, ValidityReason::Ok}; }
  static constexpr ValidityVerdict bad(ValidityReason r) { return {false, r}; }
};

/// Pooled RMS over every Present sample of every window.
inline ValidityStats compute_global_rms(std::span<const SeriesWindow> windows,
                                        ValidityStats base = {}) {
  double sum_sq = 0.0;
  std::size_t n = 0;
  for (const auto& w : windows)
    for (const auto& s : w.values)
      if (s.is_present()) {
        sum_sq += s.value * s.value;
        ++n;
      }
  if (n == 0) throw Error(ErrorCode::NoData, "no present numeric samples for global RMS");
  base.global_rms = std::sqrt(sum_sq / static_cast<double>(n));
  if (!std::isfinite(base.global_rms))
    throw Error(ErrorCode::NoData, "global RMS overflowed");
  base.validate();
  return base;
}

/// Verdict for a single sample given the length of the exact-zero run it sits
/// in. The batch path passes the full run length; the streaming path passes
/// the run length observed so far, which keeps it causal.
inline ValidityVerdict classify_sample(const Sample& s, std::size_t zero_run_length,
                                       const ValidityStats& stats) {
  switch (s.flag) {
    case SampleFlag::Missing: return ValidityVerdict::bad(ValidityReason::Missing);
    case SampleFlag::NonNumeric: return ValidityVerdict::bad(ValidityReason::NonNumeric);
    case SampleFlag::Present: break;
  }
  if (!std::isfinite(s.value)) return ValidityVerdict::bad(ValidityReason::NonNumeric);
  if (s.value == 0.0 && zero_run_length >= static_cast<std::size_t>(stats.zero_run_min))
    return ValidityVerdict::bad(ValidityReason::ZeroRun);
  if (std::abs(s.value) > stats.outlier_threshold())
    return ValidityVerdict::bad(ValidityReason::Outlier);
  return ValidityVerdict::ok();
}

namespace detail {
inline bool is_exact_zero(const Sample& s) { return s.is_present() && s.value == 0.0; }
}  // namespace detail

/// I_t over a dense window. Zero runs are judged in both directions, but
/// never past visible_end (exclusive), so callers forecasting from an origin
/// can hide everything after it.
inline ValidityVerdict point_validity(const SeriesWindow& window, std::size_t k,
                                      const ValidityStats& stats,
                                      std::size_t visible_end = std::size_t(-1)) {
  const auto& s = window.values.at(k);
  const std::size_t end = std::min(visible_end, window.size());
  std::size_t run = 0;
  if (detail::is_exact_zero(s)) {
    run = 1;
    for (std::size_t j = k; j > 0 && detail::is_exact_zero(window.values[j - 1]); --j) ++run;
    for (std::size_t j = k + 1; j < end && detail::is_exact_zero(window.values[j]); ++j) ++run;
  }
  return classify_sample(s, run, stats);
}

/// Increment test shared by the batch and streaming paths.
inline bool increment_ok(bool valid_now, double now, bool valid_prev, double prev,
                         const ValidityStats& stats) {
  return valid_now && valid_prev && std::abs(now - prev) <= stats.increment_threshold();
}

/// I_{t,t'} over a dense window: both endpoints valid and the change within
/// the threshold. Gaps surface as Missing samples, so a lag-1 increment across
/// a gap is always rejected; longer lags do not inspect the samples between.
inline bool increment_validity(const SeriesWindow& window, std::size_t k, std::size_t k_prev,
                               const ValidityStats& stats,
                               std::size_t visible_end = std::size_t(-1)) {
  if (k <= k_prev || k >= window.size()) return false;
  const auto& a = window.values[k];
  const auto& b = window.values[k_prev];
  if (a.index - b.index != static_cast<GridIndex>(k - k_prev)) return false;
  return increment_ok(point_validity(window, k, stats, visible_end).point_valid, a.value,
                      point_validity(window, k_prev, stats, visible_end).point_valid, b.value,
                      stats);
}

}  // namespace gridcast
