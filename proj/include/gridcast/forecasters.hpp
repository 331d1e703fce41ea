#pragma once

// Streaming adapters that put every predictor behind one interface for the
// evaluation harness: samples arrive one at a time through observe(), and
// predict() may only use what has been observed.

#include <functional>
#include <memory>
#include <string>
#include <utility>

#include "gridcast/adaptive.hpp"
#include "gridcast/baselines.hpp"
#include "gridcast/quality.hpp"
#include "gridcast/recurrent.hpp"
#include "gridcast/time_grid.hpp"

namespace gridcast {

class Forecaster {
 public:
  virtual ~Forecaster() = default;
  /// Next sample of the line, in index order (gaps arrive as Missing).
  virtual void observe(const Sample& s) = 0;
  /// Forecast `horizon` steps after the last observed sample.
  virtual double predict(int horizon) = 0;
};

/// What a forecaster may look at before streaming starts.
struct LineContext {
  const SeriesWindow& training;
  const ValidityStats& stats;
};

using ForecasterFactory = std::function<std::unique_ptr<Forecaster>(const LineContext&)>;

struct NamedForecaster {
  std::string name;
  ForecasterFactory make;
};

/// y_t; a Missing or non-numeric terminal falls back to the last observed value.
class PersistenceForecaster final : public Forecaster {
 public:
  void observe(const Sample& s) override {
    if (s.is_present()) last_ = s.value;
  }
  double predict(int) override { return last_; }

 private:
  double last_ = 0.0;
};

/// Keeps the observed history as a window for the batch predictors.
class HistoryForecaster : public Forecaster {
 public:
  void observe(const Sample& s) override {
    if (history_.empty()) history_.start_index = s.index;
    history_.values.push_back(s);
    if (s.is_present()) last_present_ = s.value;
  }

 protected:
  std::size_t origin() const { return history_.size() - 1; }
  SeriesWindow history_;
  double last_present_ = 0.0;
};

/// Strict daily-seasonal baseline, falling back to persistence whenever a
/// required lag is unavailable.
class SeasonalDailyForecaster final : public HistoryForecaster {
 public:
  explicit SeasonalDailyForecaster(int tau_d) : tau_d_(tau_d) {}
  double predict(int horizon) override {
    if (history_.empty()) return 0.0;
    try {
      return seasonal_daily_forecast(history_, origin(), horizon, tau_d_);
    } catch (const Error&) {
      return last_present_;
    }
  }

 private:
  int tau_d_;
};

/// Batch recurrent-fluctuation composition over the observed history.
class RecurrentForecaster final : public HistoryForecaster {
 public:
  RecurrentForecaster(RecurrentConfig cfg, ValidityStats stats) : cfg_(cfg), stats_(stats) {
    cfg_.validate();
  }
  double predict(int horizon) override {
    if (history_.empty()) return 0.0;
    RecurrentConfig c = cfg_;
    c.horizon = horizon;
    try {
      return compose_recurrent_forecast(history_, origin(), c, stats_);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientHistory) throw;
      return repaired_terminal_value(history_, origin(), stats_);
    }
  }

 private:
  RecurrentConfig cfg_;
  ValidityStats stats_;
};

class AdaptiveForecaster final : public Forecaster {
 public:
  AdaptiveForecaster(AdaptiveState state, ValidityStats stats)
      : state_(std::move(state)), stats_(stats) {}
  void observe(const Sample& s) override { state_.ingest(s, stats_); }
  double predict(int horizon) override { return state_.forecast(horizon); }
  const AdaptiveState& state() const { return state_; }

 private:
  AdaptiveState state_;
  ValidityStats stats_;
};

inline NamedForecaster persistence_entry() {
  return {"persistence", [](const LineContext&) { return std::make_unique<PersistenceForecaster>(); }};
}

inline NamedForecaster seasonal_daily_entry(int tau_d) {
  return {"seasonal-daily", [tau_d](const LineContext&) {
            return std::make_unique<SeasonalDailyForecaster>(tau_d);
          }};
}

inline NamedForecaster recurrent_entry(RecurrentConfig cfg) {
  return {"recurrent", [cfg](const LineContext& ctx) {
            return std::make_unique<RecurrentForecaster>(cfg, ctx.stats);
          }};
}

inline NamedForecaster adaptive_entry(SmoothingParams params) {
  params.validate();
  return {"adaptive", [params](const LineContext& ctx) {
            return std::make_unique<AdaptiveForecaster>(
                make_state_for_line(params, ctx.training, ctx.stats), ctx.stats);
          }};
}

}  // namespace gridcast
