#pragma once

// Streaming forecaster built from exponentially smoothed recurrent
// fluctuations.
//
// Per update the engine keeps:
//   daily  D_t = r_D I1 (y_t - y_{t-1}) + (1 - r_D I1) D_{t-tau_D}
//   weekly W_t, same recursion at lag tau_W
//   g      least-squares daily/weekly blend fitted on the monitor-lag error
//   eM/eP  moving squared error of the model and of persistence
//   m, o   moving average and the mean-reversion coefficient
// and a forecast composes them as
//   p1 = y_t + (1-g) sum_j D_{t-tau_D+j} + g sum_j W_{t-tau_W+j}
//   p2 = p1 if eM <= eP else y_t
//   p3 = p2 + o (m - y_t) i
//   out = y_t + (p3 - y_t) / (1 + |p3 - y_t| / K_s)
//
// Accumulators are frozen bit-for-bit whenever their governing indicator is 0.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "gridcast/error.hpp"
#include "gridcast/quality.hpp"
#include "gridcast/time_grid.hpp"

namespace gridcast {

struct SmoothingParams {
  double r_d = 0.15;
  double r_w = 0.15;
  double r_g = 0.02;
  double r_e = 0.02;
  double r_m = 0.01;
  double r_o = 0.02;
  int horizon = 12;
  int monitor_lag = 11;
  int tau_d = 288;
  int tau_w = 2016;
  // Maximum forecast change K_s. <= 0 means "derive per line from training
  // data"; +inf disables damping.
  double saturation_scale = 0.0;

  void validate() const {
    for (double r : {r_d, r_w, r_g, r_e, r_m, r_o})
      if (!(r > 0.0 && r <= 1.0))
        throw Error(ErrorCode::ConfigError, "smoothing rates must lie in (0, 1]");
    if (tau_d < 2) throw Error(ErrorCode::ConfigError, "tau_d must be >= 2");
    if (tau_w < tau_d) throw Error(ErrorCode::ConfigError, "tau_w must be >= tau_d");
    if (horizon < 1) throw Error(ErrorCode::ConfigError, "horizon must be >= 1");
    if (monitor_lag < 1 || monitor_lag > horizon)
      throw Error(ErrorCode::ConfigError, "monitor_lag must lie in [1, horizon]");
    if (horizon > tau_d)
      throw Error(ErrorCode::ConfigError, "horizon must not exceed tau_d");
    if (std::isnan(saturation_scale))
      throw Error(ErrorCode::ConfigError, "saturation_scale must not be NaN");
  }

  friend bool operator==(const SmoothingParams&, const SmoothingParams&) = default;
};

/// Validity indicators driving one update.
struct Indicators {
  bool point = false;      // I_t
  bool step = false;       // I_{t,t-1}
  bool monitor = false;    // I_{t,t-monitor_lag}
};

struct RecentValue {
  double value = 0.0;  // repaired
  bool valid = false;  // raw point validity
  friend bool operator==(const RecentValue&, const RecentValue&) = default;
};

/// Prediction made monitor_lag steps ago for the current step, with the two
/// seasonal sums it was built from.
struct PredictionSlot {
  double pred = 0.0;
  double sum_daily = 0.0;
  double sum_weekly = 0.0;
  friend bool operator==(const PredictionSlot&, const PredictionSlot&) = default;
};

/// Every value the engine carries between updates. Plain data so that it can
/// be checkpointed exactly.
struct AdaptiveFields {
  SmoothingParams params;
  double saturation_scale = std::numeric_limits<double>::infinity();

  std::vector<double> daily;                // D, slot s mod tau_d
  std::vector<double> weekly;               // W, slot s mod tau_w
  std::vector<RecentValue> recent;          // monitor_lag + 1 values, slot s mod size
  std::vector<PredictionSlot> predictions;  // monitor_lag slots

  double g_num = 0.0, g_den = 0.0;
  double o_num = 0.0, o_den = 0.0;
  double err_model = 0.0, err_persist = 0.0;
  double mean = 0.0;
  double g = 0.0;      // effective blend (clamped, 0 during weekly warmup)
  double g_raw = 0.0;  // g_num / g_den before clamping
  double o = 0.0;

  double y = 0.0;  // current repaired terminal value
  std::optional<double> last_valid;

  std::uint64_t steps_seen = 0;  // since construction or the last recover
  std::uint64_t zero_run = 0;
  std::uint64_t fault_count = 0;
  bool fault_flag = false;
  std::optional<GridIndex> last_index;

  friend bool operator==(const AdaptiveFields&, const AdaptiveFields&) = default;
};

/// Intermediate values of one forecast, for instrumentation.
struct ForecastTrace {
  double terminal = 0.0;
  double pred1 = 0.0;
  double pred2 = 0.0;
  double pred3 = 0.0;
  double value = 0.0;
  bool persistence_gate = false;  // eM > eP
  bool warming_up = false;        // persistence emitted unconditionally
};

/// Damped change: strictly increasing, odd, and bounded by (-k_s, k_s).
inline double saturate(double delta, double k_s) {
  if (std::isinf(k_s)) return delta;
  return delta / (1.0 + std::abs(delta) / k_s);
}

class AdaptiveState {
 public:
  static constexpr double kRatioEpsilon = 1e-12;

  explicit AdaptiveState(SmoothingParams params,
                         double saturation_scale = std::numeric_limits<double>::infinity()) {
    params.validate();
    f_.params = params;
    if (params.saturation_scale > 0.0) saturation_scale = params.saturation_scale;
    set_saturation_scale(saturation_scale);
    f_.daily.assign(static_cast<std::size_t>(params.tau_d), 0.0);
    f_.weekly.assign(static_cast<std::size_t>(params.tau_w), 0.0);
    f_.recent.assign(static_cast<std::size_t>(params.monitor_lag) + 1, RecentValue{});
    f_.predictions.assign(static_cast<std::size_t>(params.monitor_lag), PredictionSlot{});
  }

  /// Rebuilds a state from checkpointed fields, checking their shape.
  static AdaptiveState from_fields(AdaptiveFields fields) {
    fields.params.validate();
    const auto& p = fields.params;
    if (fields.daily.size() != static_cast<std::size_t>(p.tau_d) ||
        fields.weekly.size() != static_cast<std::size_t>(p.tau_w) ||
        fields.recent.size() != static_cast<std::size_t>(p.monitor_lag) + 1 ||
        fields.predictions.size() != static_cast<std::size_t>(p.monitor_lag))
      throw Error(ErrorCode::Format, "adaptive state rings do not match parameters");
    if (!(fields.saturation_scale > 0.0))
      throw Error(ErrorCode::Format, "saturation scale must be positive");
    AdaptiveState s(p, fields.saturation_scale);
    s.f_ = std::move(fields);
    return s;
  }

  const AdaptiveFields& fields() const noexcept { return f_; }
  const SmoothingParams& params() const noexcept { return f_.params; }
  double saturation_scale() const noexcept { return f_.saturation_scale; }

  void set_saturation_scale(double k_s) {
    if (!(k_s > 0.0)) throw Error(ErrorCode::ConfigError, "saturation scale must be > 0");
    f_.saturation_scale = k_s;
  }

  double terminal_value() const noexcept { return f_.y; }
  std::uint64_t steps_seen() const noexcept { return f_.steps_seen; }
  std::uint64_t fault_count() const noexcept { return f_.fault_count; }
  bool fault_flag() const noexcept { return f_.fault_flag; }
  double blend() const noexcept { return f_.g; }
  double blend_raw() const noexcept { return f_.g_raw; }
  double reversion() const noexcept { return f_.o; }
  std::optional<GridIndex> last_index() const noexcept { return f_.last_index; }

  /// Persistence is emitted until one full week of updates has been seen.
  bool warming_up() const noexcept {
    return f_.steps_seen < static_cast<std::uint64_t>(f_.params.tau_w);
  }

  /// Causal indicators for the next sample: zero runs are measured backwards
  /// only and the lagged endpoints come from the recent-value ring.
  Indicators indicators_for(const Sample& s, const ValidityStats& stats) const {
    const std::uint64_t run = (s.is_present() && s.value == 0.0) ? f_.zero_run + 1 : 0;
    Indicators ind;
    ind.point = classify_sample(s, run, stats).point_valid;
    const double v = s.value;
    if (f_.steps_seen >= 1) {
      const auto& prev = recent_at(1);
      ind.step = increment_ok(ind.point, v, prev.valid, prev.value, stats);
    }
    const auto lag = static_cast<std::uint64_t>(f_.params.monitor_lag);
    if (f_.steps_seen >= lag) {
      const auto& old = recent_at(lag);
      ind.monitor = increment_ok(ind.point, v, old.valid, old.value, stats);
    }
    return ind;
  }

  /// One step with indicators computed from the stream itself.
  void update(const Sample& s, const ValidityStats& stats) { update(s, indicators_for(s, stats)); }

  /// One step with caller-supplied indicators. Samples are assumed to be
  /// consecutive; Missing samples still advance the clock.
  void update(const Sample& s, const Indicators& ind) {
    const auto& p = f_.params;
    const std::uint64_t t = f_.steps_seen;
    f_.zero_run = (s.is_present() && s.value == 0.0) ? f_.zero_run + 1 : 0;
    f_.last_index = s.index;

    const double y = repair_terminal_value(s, ind.point);
    const double y_prev = f_.steps_seen >= 1 ? recent_at(1).value : 0.0;
    const auto lag = static_cast<std::uint64_t>(p.monitor_lag);
    const double y_lag = f_.steps_seen >= lag ? recent_at(lag).value : 0.0;

    double& d_slot = f_.daily[t % f_.daily.size()];
    double& w_slot = f_.weekly[t % f_.weekly.size()];
    if (ind.step) {
      const double inc = y - y_prev;
      d_slot = p.r_d * inc + (1.0 - p.r_d) * d_slot;
      w_slot = p.r_w * inc + (1.0 - p.r_w) * w_slot;
    }

    auto& slot = f_.predictions[t % f_.predictions.size()];
    const double sum_d = slot.sum_daily;
    const double sum_w = slot.sum_weekly;
    if (ind.monitor) {
      const double a = y - y_lag - sum_d;
      const double b = sum_w - sum_d;
      f_.g_num = p.r_g * a * b + (1.0 - p.r_g) * f_.g_num;
      f_.g_den = p.r_g * b * b + (1.0 - p.r_g) * f_.g_den;
    }
    f_.g_raw = f_.g_den > kRatioEpsilon ? f_.g_num / f_.g_den : 0.0;
    f_.g = std::clamp(f_.g_raw, 0.0, 1.0);
    if (t + 1 < static_cast<std::uint64_t>(p.tau_w)) f_.g = 0.0;

    if (ind.monitor) {
      const double em = y - slot.pred;
      const double ep = y - y_lag;
      f_.err_model = p.r_e * em * em + (1.0 - p.r_e) * f_.err_model;
      f_.err_persist = p.r_e * ep * ep + (1.0 - p.r_e) * f_.err_persist;
    }

    if (ind.point) f_.mean = p.r_m * y + (1.0 - p.r_m) * f_.mean;

    if (ind.monitor) {
      const double resid = y - y_lag - (1.0 - f_.g) * sum_d - f_.g * sum_w;
      const double dev = f_.mean - y;
      f_.o_num = p.r_o * (resid / p.monitor_lag) * dev + (1.0 - p.r_o) * f_.o_num;
      f_.o_den = p.r_o * dev * dev + (1.0 - p.r_o) * f_.o_den;
    }
    f_.o = f_.o_den > kRatioEpsilon ? f_.o_num / f_.o_den : 0.0;

    f_.recent[t % f_.recent.size()] = RecentValue{y, ind.point};
    f_.steps_seen = t + 1;

    // Prediction for t + monitor_lag, read back monitor_lag updates from now.
    const double fd = forward_sum(f_.daily, p.monitor_lag);
    const double fw = forward_sum(f_.weekly, p.monitor_lag);
    slot = PredictionSlot{y + (1.0 - f_.g) * fd + f_.g * fw, fd, fw};

    f_.fault_flag = false;
    if (!finite_after_step(d_slot, w_slot, slot)) {
      recover();
      f_.fault_flag = true;
      ++f_.fault_count;
    }
  }

  /// Streams a sample that may skip ahead; gaps are filled with Missing
  /// updates. Returns false (and does nothing) for stale indices.
  bool ingest(const Sample& s, const ValidityStats& stats) {
    if (f_.last_index) {
      if (s.index <= *f_.last_index) return false;
      for (GridIndex i = *f_.last_index + 1; i < s.index; ++i) update(Sample::missing(i), stats);
    }
    update(s, stats);
    return true;
  }

  /// Holds the last valid value; zero when none has ever been seen.
  double repair_terminal_value(const Sample& s, bool point_valid) {
    if (point_valid) {
      f_.last_valid = s.value;
      f_.y = s.value;
    } else {
      f_.y = f_.last_valid.value_or(0.0);
    }
    return f_.y;
  }

  /// Forgets every learned quantity; keeps the terminal and last valid value.
  /// Forecasts fall back to persistence for the next tau_W updates.
  void recover() {
    std::fill(f_.daily.begin(), f_.daily.end(), 0.0);
    std::fill(f_.weekly.begin(), f_.weekly.end(), 0.0);
    std::fill(f_.recent.begin(), f_.recent.end(), RecentValue{});
    std::fill(f_.predictions.begin(), f_.predictions.end(), PredictionSlot{});
    f_.g_num = f_.g_den = f_.o_num = f_.o_den = 0.0;
    f_.err_model = f_.err_persist = 0.0;
    f_.mean = f_.g = f_.g_raw = f_.o = 0.0;
    f_.steps_seen = 0;
    f_.zero_run = 0;
    f_.fault_flag = false;
  }

  ForecastTrace trace(int i) const {
    ForecastTrace tr;
    const double y = f_.y;
    tr.terminal = y;
    if (i < 1 || i > f_.params.horizon)
      throw Error(ErrorCode::ConfigError, "forecast horizon outside [1, horizon]");
    if (warming_up() || f_.fault_flag) {
      tr.warming_up = true;
      tr.pred1 = tr.pred2 = tr.pred3 = tr.value = y;
      return tr;
    }
    tr.pred1 = y + (1.0 - f_.g) * forward_sum(f_.daily, i) + f_.g * forward_sum(f_.weekly, i);
    tr.persistence_gate = f_.err_model > f_.err_persist;
    tr.pred2 = tr.persistence_gate ? y : tr.pred1;
    tr.pred3 = tr.pred2 + f_.o * (f_.mean - y) * i;
    tr.value = y + saturate(tr.pred3 - y, f_.saturation_scale);
    if (!std::isfinite(tr.value)) tr.value = y;
    return tr;
  }

  double forecast(int i) const { return trace(i).value; }

  /// Bytes held by the rings; fixed at construction.
  std::size_t footprint_bytes() const noexcept {
    return sizeof(AdaptiveFields) + f_.daily.capacity() * sizeof(double) +
           f_.weekly.capacity() * sizeof(double) + f_.recent.capacity() * sizeof(RecentValue) +
           f_.predictions.capacity() * sizeof(PredictionSlot);
  }

 private:
  // Value stored `back` updates ago (1 = previous step).
  const RecentValue& recent_at(std::uint64_t back) const {
    const auto n = static_cast<std::uint64_t>(f_.recent.size());
    return f_.recent[(f_.steps_seen - back) % n];
  }

  // sum_{j=1..i} X_{t - tau + j}, where t is the last completed step.
  double forward_sum(const std::vector<double>& ring, int i) const {
    const auto n = static_cast<std::uint64_t>(ring.size());
    const std::uint64_t t = f_.steps_seen - 1;  // steps_seen >= 1 whenever this runs
    double s = 0.0;
    for (int j = 1; j <= i; ++j) s += ring[(t + static_cast<std::uint64_t>(j)) % n];
    return s;
  }

  bool finite_after_step(double d, double w, const PredictionSlot& slot) const {
    for (double v : {d, w, f_.g_num, f_.g_den, f_.o_num, f_.o_den, f_.err_model, f_.err_persist,
                     f_.mean, f_.g, f_.o, slot.pred, slot.sum_daily, slot.sum_weekly})
      if (!std::isfinite(v)) return false;
    return true;
  }

  AdaptiveFields f_;
};

/// K_s rule: 99.5th percentile of |y_{t+h} - y_t| over pairs of valid points,
/// or 4 x global RMS when fewer than kMinPairs pairs exist.
inline double estimate_saturation_scale(const SeriesWindow& w, int horizon,
                                        const ValidityStats& stats) {
  constexpr std::size_t kMinPairs = 100;
  std::vector<double> changes;
  const auto h = static_cast<std::size_t>(horizon);
  if (w.size() > h) {
    std::vector<char> ok(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) ok[k] = point_validity(w, k, stats).point_valid;
    for (std::size_t k = 0; k + h < w.size(); ++k)
      if (ok[k] && ok[k + h]) changes.push_back(std::abs(w.values[k + h].value - w.values[k].value));
  }
  double k_s = 0.0;
  if (changes.size() >= kMinPairs) {
    const auto rank = static_cast<std::size_t>(std::ceil(0.995 * changes.size())) - 1;
    std::nth_element(changes.begin(), changes.begin() + static_cast<std::ptrdiff_t>(rank),
                     changes.end());
    k_s = changes[rank];
  }
  if (!(k_s > 0.0)) k_s = 4.0 * stats.global_rms;
  if (!(k_s > 0.0)) k_s = 1.0;
  return k_s;
}

/// Fresh state for one line with K_s resolved from its training window.
inline AdaptiveState make_state_for_line(const SmoothingParams& params, const SeriesWindow& training,
                                         const ValidityStats& stats) {
  const double k_s = params.saturation_scale > 0.0
                         ? params.saturation_scale
                         : estimate_saturation_scale(training, params.horizon, stats);
  return AdaptiveState(params, k_s);
}

}  // namespace gridcast
