#pragma once

// Evaluation harness: rolling-origin RMSE with wall-clock timing, stress
// scenarios that damage the data on purpose, 2:1 accuracy:speed ranking and
// parameter sweeps.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "gridcast/adaptive.hpp"
#include "gridcast/error.hpp"
#include "gridcast/forecasters.hpp"
#include "gridcast/numfmt.hpp"
#include "gridcast/quality.hpp"
#include "gridcast/recurrent.hpp"
#include "gridcast/rng.hpp"
#include "gridcast/time_grid.hpp"

namespace gridcast {

struct LineResult {
  double sum_sq = 0.0;
  std::size_t n_predictions = 0;
  std::size_t n_skipped = 0;
};

struct EvalReport {
  std::string name;
  std::map<std::string, double> per_line_rmse;
  std::map<std::string, LineResult> per_line;
  double aggregate_rmse = 0.0;
  double elapsed_s = 0.0;
  std::size_t n_predictions = 0;
  std::size_t n_skipped = 0;
};

/// Called for every forecast the harness requests.
using PredictionHook =
    std::function<void(const std::string& line_id, GridIndex origin, int horizon, double value)>;

struct EvalOptions {
  int horizon = 12;
  double split = 0.75;  // fraction of each line streamed before scoring starts
  ValidityStats validity{};  // factors; global_rms is recomputed from training data
  // Use validity as given instead of recomputing global_rms.
  bool fixed_stats = false;
  unsigned jobs = 1;
  PredictionHook on_predict;
};

inline std::size_t training_length(std::size_t n, double split) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * split));
}

inline SeriesWindow head(const SeriesWindow& w, std::size_t n) {
  SeriesWindow out{w.line_id, w.start_index, {}};
  out.values.assign(w.values.begin(), w.values.begin() + static_cast<std::ptrdiff_t>(std::min(n, w.size())));
  return out;
}

/// Pooled statistics over the training part of every line.
inline ValidityStats training_stats(std::span<const SeriesWindow> lines, double split,
                                    const ValidityStats& base) {
  std::vector<SeriesWindow> heads;
  heads.reserve(lines.size());
  for (const auto& w : lines) heads.push_back(head(w, training_length(w.size(), split)));
  return compute_global_rms(heads, base);
}

/// Runs fn(k) for k in [0, n) on up to `jobs` threads.
inline void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < jobs; ++j)
    pool.emplace_back([&, j] {
      try {
        for (std::size_t k = next++; k < n; k = next++) fn(k);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Streams each line through a fresh forecaster. Origins t run from the
/// first post-split sample to size-1-horizon; the forecaster has observed
/// exactly samples [0, t] when predict is called. Targets that are not
/// Present are skipped, not imputed.
inline EvalReport evaluate(const NamedForecaster& entry, std::span<const SeriesWindow> lines,
                           const EvalOptions& opt) {
  if (opt.horizon < 1) throw Error(ErrorCode::ConfigError, "horizon must be >= 1");
  if (!(opt.split >= 0.0 && opt.split < 1.0))
    throw Error(ErrorCode::ConfigError, "split must lie in [0, 1)");
  const auto t0 = std::chrono::steady_clock::now();
  const ValidityStats stats =
      opt.fixed_stats ? opt.validity : training_stats(lines, opt.split, opt.validity);

  std::vector<LineResult> results(lines.size());
  parallel_for(lines.size(), opt.jobs, [&](std::size_t li) {
    const auto& w = lines[li];
    const std::size_t n_train = training_length(w.size(), opt.split);
    const SeriesWindow training = head(w, n_train);
    auto fc = entry.make(LineContext{training, stats});
    const auto h = static_cast<std::size_t>(opt.horizon);
    LineResult r;
    std::size_t observed = 0;
    for (std::size_t t = n_train; t + h < w.size(); ++t) {
      while (observed <= t) fc->observe(w.values[observed++]);
      const double yhat = fc->predict(opt.horizon);
      if (opt.on_predict) opt.on_predict(w.line_id, w.values[t].index, opt.horizon, yhat);
      const auto& target = w.values[t + h];
      if (target.is_present()) {
        const double e = target.value - yhat;
        r.sum_sq += e * e;
        ++r.n_predictions;
      } else {
        ++r.n_skipped;
      }
    }
    results[li] = r;
  });

  EvalReport rep;
  rep.name = entry.name;
  double total_sq = 0.0;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const auto& r = results[li];
    rep.per_line[lines[li].line_id] = r;
    if (r.n_predictions > 0)
      rep.per_line_rmse[lines[li].line_id] = std::sqrt(r.sum_sq / static_cast<double>(r.n_predictions));
    total_sq += r.sum_sq;
    rep.n_predictions += r.n_predictions;
    rep.n_skipped += r.n_skipped;
  }
  rep.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (rep.n_predictions == 0) throw Error(ErrorCode::NoEvaluablePoints, "no target could be scored");
  rep.aggregate_rmse = std::sqrt(total_sq / static_cast<double>(rep.n_predictions));
  return rep;
}

// ---------------------------------------------------------------------------
// Stress scenarios

enum class ScenarioKind { InjectOutliers, DropPoints, ShuffleSegments, ResizeGrid };

constexpr std::string_view to_string(ScenarioKind k) noexcept {
  switch (k) {
    case ScenarioKind::InjectOutliers: return "inject-outliers";
    case ScenarioKind::DropPoints: return "drop-points";
    case ScenarioKind::ShuffleSegments: return "shuffle-segments";
    case ScenarioKind::ResizeGrid: return "resize-grid";
  }
  return "?";
}

inline std::optional<ScenarioKind> parse_scenario_kind(std::string_view s) {
  for (auto k : {ScenarioKind::InjectOutliers, ScenarioKind::DropPoints,
                 ScenarioKind::ShuffleSegments, ScenarioKind::ResizeGrid})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

struct StressScenario {
  ScenarioKind kind = ScenarioKind::InjectOutliers;
  double intensity = 0.0;
  std::uint64_t seed = 1;
  // Block length for ShuffleSegments (one day of steps).
  int steps_per_day = 288;

  void validate() const {
    if (!(intensity >= 0.0 && intensity <= 1.0))
      throw Error(ErrorCode::ConfigError, "scenario intensity must lie in [0, 1]");
    if (steps_per_day < 1) throw Error(ErrorCode::ConfigError, "steps_per_day must be >= 1");
  }
};

inline constexpr double kInjectedHugeValue = 1e12;

namespace scenario_detail {

// First k entries of a seeded partial Fisher-Yates shuffle of [0, n).
inline std::vector<std::size_t> pick(std::size_t n, std::size_t k, SplitMix64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(k);
  return idx;
}

inline void inject_outliers(SeriesWindow& w, double intensity, SplitMix64& rng) {
  const auto k = static_cast<std::size_t>(std::floor(intensity * static_cast<double>(w.size())));
  const auto where = pick(w.size(), k, rng);
  for (std::size_t j = 0; j < where.size(); ++j) {
    auto& s = w.values[where[j]];
    switch (j % 3) {
      case 0: s = {s.index, std::numeric_limits<double>::quiet_NaN(), SampleFlag::NonNumeric}; break;
      case 1: s = Sample::present(s.index, rng.uniform() < 0.5 ? -kInjectedHugeValue : kInjectedHugeValue); break;
      default: s = Sample::present(s.index, 0.0); break;
    }
  }
}

inline void drop_points(SeriesWindow& w, double intensity, SplitMix64& rng) {
  std::vector<std::size_t> candidates;
  for (std::size_t k = 0; k < w.size(); ++k)
    if (w.values[k].flag != SampleFlag::Missing) candidates.push_back(k);
  const auto k = static_cast<std::size_t>(std::floor(intensity * static_cast<double>(candidates.size())));
  for (auto p : pick(candidates.size(), k, rng)) w.values[candidates[p]] = Sample::missing(w.values[candidates[p]].index);
}

inline void shuffle_segments(SeriesWindow& w, double intensity, int block, SplitMix64& rng) {
  const std::size_t b = static_cast<std::size_t>(block);
  const std::size_t m = w.size() / b;
  if (intensity <= 0.0 || m < 2) return;
  auto k = static_cast<std::size_t>(std::ceil(intensity * static_cast<double>(m)));
  k = std::clamp<std::size_t>(k, 2, m);
  auto chosen = pick(m, k, rng);
  std::sort(chosen.begin(), chosen.end());
  auto order = chosen;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto original = w.values;
  for (std::size_t i = 0; i < chosen.size(); ++i)
    for (std::size_t j = 0; j < b; ++j) {
      auto& dst = w.values[chosen[i] * b + j];
      const auto& src = original[order[i] * b + j];
      dst = Sample{dst.index, src.value, src.flag};
    }
}

inline void resize_grid(std::vector<SeriesWindow>& lines, double intensity, SplitMix64& rng) {
  if (intensity <= 0.0 || lines.empty()) return;
  const auto k = static_cast<std::size_t>(std::ceil(intensity * static_cast<double>(lines.size())));
  std::size_t dup = 0;
  for (std::size_t op = 0; op < k; ++op) {
    const auto victim = static_cast<std::size_t>(rng.below(lines.size()));
    if (rng.uniform() < 0.5 || lines.size() == 1) {
      SeriesWindow copy = lines[victim];
      copy.line_id += "#dup" + std::to_string(dup++);
      lines.push_back(std::move(copy));
    } else {
      lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(victim));
    }
  }
}

}  // namespace scenario_detail

/// Deterministic damage to a set of lines; a pure function of its inputs.
inline std::vector<SeriesWindow> apply_scenario(std::vector<SeriesWindow> lines,
                                                const StressScenario& sc) {
  sc.validate();
  if (sc.intensity == 0.0) return lines;
  if (sc.kind == ScenarioKind::ResizeGrid) {
    SplitMix64 rng(derive_seed(sc.seed, 0));
    scenario_detail::resize_grid(lines, sc.intensity, rng);
    return lines;
  }
  for (std::size_t li = 0; li < lines.size(); ++li) {
    SplitMix64 rng(derive_seed(sc.seed, li + 1));
    auto& w = lines[li];
    switch (sc.kind) {
      case ScenarioKind::InjectOutliers: scenario_detail::inject_outliers(w, sc.intensity, rng); break;
      case ScenarioKind::DropPoints: scenario_detail::drop_points(w, sc.intensity, rng); break;
      case ScenarioKind::ShuffleSegments:
        scenario_detail::shuffle_segments(w, sc.intensity, sc.steps_per_day, rng);
        break;
      case ScenarioKind::ResizeGrid: break;
    }
  }
  return lines;
}

// ---------------------------------------------------------------------------
// Ranking

struct RankEntry {
  std::string name;
  double rmse = 0.0;
  double elapsed_s = 0.0;
  int rank_accuracy = 0;
  int rank_speed = 0;
  int score = 0;  // 2 * rank_accuracy + rank_speed, lower is better
};

namespace rank_detail {
// Competition ranking: equal values share the best rank ("1224").
inline std::vector<int> ranks(const std::vector<double>& v) {
  std::vector<int> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    int better = 0;
    for (double x : v)
      if (x < v[i]) ++better;
    r[i] = better + 1;
  }
  return r;
}
}  // namespace rank_detail

/// Orders entrants by 2 x accuracy rank + speed rank; ties go to lower RMSE,
/// then to name.
inline std::vector<RankEntry> rank_score(std::span<const EvalReport> reports) {
  if (reports.size() < 2) throw Error(ErrorCode::ConfigError, "ranking needs at least 2 reports");
  std::vector<double> acc, spd;
  for (const auto& r : reports) {
    acc.push_back(r.aggregate_rmse);
    spd.push_back(r.elapsed_s);
  }
  const auto ra = rank_detail::ranks(acc);
  const auto rs = rank_detail::ranks(spd);
  std::vector<RankEntry> out;
  for (std::size_t i = 0; i < reports.size(); ++i)
    out.push_back({reports[i].name, acc[i], spd[i], ra[i], rs[i], 2 * ra[i] + rs[i]});
  std::sort(out.begin(), out.end(), [](const RankEntry& a, const RankEntry& b) {
    if (a.score != b.score) return a.score < b.score;
    if (a.rmse != b.rmse) return a.rmse < b.rmse;
    return a.name < b.name;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Parameter sweeps

struct SweepAxis {
  std::string param;  // r_d, r_w, r_g, r_e, r_m, r_o, saturation_scale
  std::vector<double> values;
};

struct SweepRow {
  std::vector<std::pair<std::string, double>> assignment;
  SmoothingParams params;
  EvalReport report;
};

inline void set_param(SmoothingParams& p, std::string_view name, double v) {
  if (name == "r_d") p.r_d = v;
  else if (name == "r_w") p.r_w = v;
  else if (name == "r_g") p.r_g = v;
  else if (name == "r_e") p.r_e = v;
  else if (name == "r_m") p.r_m = v;
  else if (name == "r_o") p.r_o = v;
  else if (name == "saturation_scale") p.saturation_scale = v;
  else throw Error(ErrorCode::ConfigError, "unknown sweep parameter " + std::string(name));
}

/// Cartesian product of the axes; the last axis varies fastest.
inline std::vector<SweepRow> sweep(const SmoothingParams& base, std::span<const SweepAxis> axes,
                                   std::span<const SeriesWindow> fixtures, const EvalOptions& opt) {
  std::size_t total = 1;
  for (const auto& a : axes) {
    if (a.values.empty()) throw Error(ErrorCode::ConfigError, "sweep axis " + a.param + " is empty");
    total *= a.values.size();
  }
  std::vector<SweepRow> rows;
  rows.reserve(total);
  for (std::size_t flat = 0; flat < total; ++flat) {
    SweepRow row;
    row.params = base;
    std::size_t rem = flat;
    std::vector<std::pair<std::string, double>> asg(axes.size());
    for (std::size_t ai = axes.size(); ai-- > 0;) {
      const auto& a = axes[ai];
      const double v = a.values[rem % a.values.size()];
      rem /= a.values.size();
      set_param(row.params, a.param, v);
      asg[ai] = {a.param, v};
    }
    row.assignment = std::move(asg);
    row.report = evaluate(adaptive_entry(row.params), fixtures, opt);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  if (rows.empty()) return;
  for (const auto& [name, v] : rows.front().assignment) out << name << ',';
  out << "rmse,n_predictions,n_skipped\n";
  for (const auto& r : rows) {
    for (const auto& [name, v] : r.assignment) out << format_double(v) << ',';
    out << format_double(r.report.aggregate_rmse) << ',' << r.report.n_predictions << ','
        << r.report.n_skipped << '\n';
  }
}

// ---------------------------------------------------------------------------
// Report output. Accuracy rows are deterministic; timing goes to its own
// table because wall-clock time is not reproducible.

inline void write_report_csv(std::ostream& out, std::span<const EvalReport> reports) {
  out << "forecaster,rmse,n_predictions,n_skipped\n";
  for (const auto& r : reports)
    out << r.name << ',' << format_double(r.aggregate_rmse) << ',' << r.n_predictions << ','
        << r.n_skipped << '\n';
}

inline void write_per_line_csv(std::ostream& out, std::span<const EvalReport> reports) {
  out << "forecaster,line_id,rmse,n_predictions,n_skipped\n";
  for (const auto& r : reports)
    for (const auto& [id, lr] : r.per_line) {
      const auto it = r.per_line_rmse.find(id);
      out << r.name << ',' << id << ',' << (it == r.per_line_rmse.end() ? "" : format_double(it->second))
          << ',' << lr.n_predictions << ',' << lr.n_skipped << '\n';
    }
}

inline void write_timing_csv(std::ostream& out, std::span<const EvalReport> reports) {
  out << "forecaster,rmse,elapsed_s,rank_accuracy,rank_speed,score,place\n";
  if (reports.size() < 2) {
    for (const auto& r : reports)
      out << r.name << ',' << format_double(r.aggregate_rmse) << ',' << format_double(r.elapsed_s)
          << ",1,1,3,1\n";
    return;
  }
  int place = 0;
  for (const auto& e : rank_score(reports))
    out << e.name << ',' << format_double(e.rmse) << ',' << format_double(e.elapsed_s) << ','
        << e.rank_accuracy << ',' << e.rank_speed << ',' << e.score << ',' << ++place << '\n';
}

// ---------------------------------------------------------------------------
// Long-format series for plotting the recurrent-fluctuation method on the
// last day of a line: expected fluctuations (raw and filtered), their
// composition over the horizon, and persistence vs recurrent predictions at
// two horizons.

struct FigureRow {
  GridIndex time_index;
  std::string series;
  double value;
};

inline std::vector<FigureRow> figure_series(const SeriesWindow& w, int tau_d, int n_days,
                                            int short_horizon, int long_horizon,
                                            const ValidityStats& stats) {
  std::vector<FigureRow> rows;
  const auto first = static_cast<std::size_t>(n_days) * static_cast<std::size_t>(tau_d);
  if (w.size() <= first) throw Error(ErrorCode::InsufficientHistory, "figure needs n_days + 1 days");
  RecurrentConfig raw{n_days, tau_d, short_horizon, false};
  RecurrentConfig filt{n_days, tau_d, short_horizon, true};
  for (std::size_t t = first; t < w.size(); ++t) {
    const GridIndex idx = w.values[t].index;
    if (w.values[t].is_present()) rows.push_back({idx, "actual", w.values[t].value});
    // Fluctuations use only days before the one being drawn; the
    // composition at t is what gets added to y_t for the short horizon.
    if (t > first) {
      rows.push_back({idx, "fluctuation_raw", expected_fluctuation(w, t, raw, stats, first).value});
      rows.push_back({idx, "fluctuation_filtered", expected_fluctuation(w, t, filt, stats, first).value});
    }
    double cr = 0.0, cf = 0.0;
    for (int j = 1; j <= short_horizon; ++j) {
      cr += expected_fluctuation(w, t + static_cast<std::size_t>(j), raw, stats, first).value;
      cf += expected_fluctuation(w, t + static_cast<std::size_t>(j), filt, stats, first).value;
    }
    rows.push_back({idx, "composition_raw", cr});
    rows.push_back({idx, "composition_filtered", cf});
    for (int h : {short_horizon, long_horizon}) {
      if (t < first + static_cast<std::size_t>(h)) continue;
      const std::size_t origin = t - static_cast<std::size_t>(h);
      const std::string tag = "_h" + std::to_string(h);
      double pers = 0.0;
      for (std::size_t k = origin + 1; k-- > 0;)
        if (w.values[k].is_present()) {
          pers = w.values[k].value;
          break;
        }
      rows.push_back({idx, "persistence" + tag, pers});
      RecurrentConfig c{n_days, tau_d, h, true};
      rows.push_back({idx, "recurrent" + tag, compose_recurrent_forecast(w, origin, c, stats)});
    }
  }
  return rows;
}

inline void write_figure_csv(std::ostream& out, std::span<const FigureRow> rows) {
  out << "time_index,series,value\n";
  for (const auto& r : rows) out << r.time_index << ',' << r.series << ',' << format_double(r.value) << '\n';
}

}  // namespace gridcast
