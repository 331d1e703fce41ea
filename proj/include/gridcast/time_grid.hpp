#pragma once

// Fixed-step temporal lattice and the sample/window types every other module
// consumes. Timestamps are integer epoch seconds; there is no calendar logic.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gridcast/error.hpp"

namespace gridcast {

using GridIndex = std::int64_t;

struct TimeGrid {
  std::int64_t origin_epoch_s = 0;
  std::int64_t step_s = 300;

  void validate() const {
    if (step_s <= 0) throw Error(ErrorCode::ConfigError, "grid step must be positive");
  }

  std::int64_t epoch_of(GridIndex index) const { return origin_epoch_s + index * step_s; }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

enum class SampleFlag : std::uint8_t { Present = 0, Missing = 1, NonNumeric = 2 };

/// One grid point. value is meaningful only when flag == Present; NonNumeric
/// keeps the raw payload (NaN or inf) so it can be reported.
struct Sample {
  GridIndex index = 0;
  double value = 0.0;
  SampleFlag flag = SampleFlag::Missing;

  static Sample present(GridIndex i, double v) {
    if (!std::isfinite(v)) return {i, v, SampleFlag::NonNumeric};
    return {i, v, SampleFlag::Present};
  }
  static Sample missing(GridIndex i) { return {i, 0.0, SampleFlag::Missing}; }

  bool is_present() const noexcept { return flag == SampleFlag::Present; }

  friend bool operator==(const Sample& a, const Sample& b) noexcept {
    if (a.index != b.index || a.flag != b.flag) return false;
    switch (a.flag) {
      case SampleFlag::Present: return a.value == b.value;
      case SampleFlag::Missing: return true;
      case SampleFlag::NonNumeric:
        return std::isnan(a.value) ? std::isnan(b.value) : a.value == b.value;
    }
    return false;
  }
};

/// Dense run of samples: values[k].index == start_index + k.
struct SeriesWindow {
  std::string line_id;
  GridIndex start_index = 0;
  std::vector<Sample> values;

  std::size_t size() const noexcept { return values.size(); }
  bool empty() const noexcept { return values.empty(); }
  const Sample& operator[](std::size_t k) const { return values[k]; }
  Sample& operator[](std::size_t k) { return values[k]; }
  GridIndex end_index() const noexcept {
    return start_index + static_cast<GridIndex>(values.size());
  }

  bool is_dense() const noexcept {
    for (std::size_t k = 0; k < values.size(); ++k)
      if (values[k].index != start_index + static_cast<GridIndex>(k)) return false;
    return true;
  }

  /// Window from plain values; non-finite entries become NonNumeric.
  static SeriesWindow from_values(std::span<const double> ys, GridIndex start = 0,
                                  std::string id = {}) {
    SeriesWindow w{std::move(id), start, {}};
    w.values.reserve(ys.size());
    for (std::size_t k = 0; k < ys.size(); ++k)
      w.values.push_back(Sample::present(start + static_cast<GridIndex>(k), ys[k]));
    return w;
  }

  friend bool operator==(const SeriesWindow&, const SeriesWindow&) = default;
};

/// Raw input point: epoch seconds plus an optional payload.
struct RawPoint {
  std::int64_t epoch_s = 0;
  std::optional<double> value;
};

/// Floors onto the grid: a time between two steps goes to the lower one.
inline GridIndex normalize_timestamp(std::int64_t raw_epoch_s, const TimeGrid& grid) {
  grid.validate();
  if (raw_epoch_s < grid.origin_epoch_s)
    throw Error(ErrorCode::InvalidTimestamp,
                "timestamp " + std::to_string(raw_epoch_s) + " precedes grid origin " +
                    std::to_string(grid.origin_epoch_s));
  return (raw_epoch_s - grid.origin_epoch_s) / grid.step_s;
}

/// Aligns raw points onto the grid and materializes every gap as Missing.
/// When several points land in the same cell the last one in input order wins.
inline SeriesWindow densify(std::span<const RawPoint> points, const TimeGrid& grid,
                            std::string line_id = {}) {
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "densify: no points");
  std::vector<GridIndex> idx;
  idx.reserve(points.size());
  for (const auto& p : points) idx.push_back(normalize_timestamp(p.epoch_s, grid));
  const auto [lo, hi] = std::minmax_element(idx.begin(), idx.end());
  const GridIndex first = *lo;
  const auto length = static_cast<std::size_t>(*hi - first + 1);

  SeriesWindow w{std::move(line_id), first, {}};
  w.values.reserve(length);
  for (std::size_t k = 0; k < length; ++k)
    w.values.push_back(Sample::missing(first + static_cast<GridIndex>(k)));
  for (std::size_t n = 0; n < points.size(); ++n) {
    const GridIndex i = idx[n];
    auto& slot = w.values[static_cast<std::size_t>(i - first)];
    slot = points[n].value ? Sample::present(i, *points[n].value) : Sample::missing(i);
  }
  return w;
}

/// Inverse view of a window as raw points on the same grid.
inline std::vector<RawPoint> to_raw_points(const SeriesWindow& w, const TimeGrid& grid) {
  std::vector<RawPoint> out;
  out.reserve(w.size());
  for (const auto& s : w.values) {
    RawPoint p{grid.epoch_of(s.index), std::nullopt};
    if (s.flag != SampleFlag::Missing) p.value = s.value;
    out.push_back(p);
  }
  return out;
}

}  // namespace gridcast
