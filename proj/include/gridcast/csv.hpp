#pragma once

// Wire format for series data:
//
//   timestamp,line_id,value
//   0,line0,12.5
//   300,line0,          <- empty value: Missing
//   600,line0,nan       <- NonNumeric
//
// timestamp is integer epoch seconds; values use the shortest decimal that
// round-trips the double exactly. UTF-8, LF line endings.

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridcast/error.hpp"
#include "gridcast/numfmt.hpp"
#include "gridcast/time_grid.hpp"

namespace gridcast {

inline constexpr std::string_view kCsvHeader = "timestamp,line_id,value";

struct CsvData {
  std::map<std::string, std::vector<RawPoint>> lines;  // input order within a line
  std::size_t rows = 0;
  std::size_t bad_rows = 0;
};

using BadRowSink = std::function<void(std::size_t line_no, std::string_view row, std::string_view why)>;

/// Parses the wire format. Malformed rows are reported to `on_bad` and
/// skipped; a wrong header is an error.
inline CsvData read_csv(std::istream& in, const BadRowSink& on_bad = {}) {
  CsvData out;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw Error(ErrorCode::NoData, "empty CSV input");
  ++line_no;
  if (trim(line) != kCsvHeader)
    throw Error(ErrorCode::Format, "expected header '" + std::string(kCsvHeader) + "'");
  const auto bad = [&](std::string_view row, std::string_view why) {
    ++out.bad_rows;
    if (on_bad) on_bad(line_no, row, why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view row = line;
    if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
    if (trim(row).empty()) continue;
    const auto c1 = row.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : row.find(',', c1 + 1);
    if (c2 == std::string_view::npos || row.find(',', c2 + 1) != std::string_view::npos) {
      bad(row, "expected 3 fields");
      continue;
    }
    const auto ts = parse_int(row.substr(0, c1));
    if (!ts) {
      bad(row, "bad timestamp");
      continue;
    }
    const auto id = row.substr(c1 + 1, c2 - c1 - 1);
    if (id.empty()) {
      bad(row, "empty line_id");
      continue;
    }
    const auto field = trim(row.substr(c2 + 1));
    RawPoint p{*ts, std::nullopt};
    if (!field.empty()) {
      const auto v = parse_double(field);
      if (!v) {
        bad(row, "bad value");
        continue;
      }
      p.value = *v;
    }
    ++out.rows;
    out.lines[std::string(id)].push_back(p);
  }
  return out;
}

inline std::string format_value(const Sample& s) {
  switch (s.flag) {
    case SampleFlag::Missing: return {};
    case SampleFlag::NonNumeric:
      return std::isinf(s.value) ? format_double(s.value) : std::string("nan");
    case SampleFlag::Present: return format_double(s.value);
  }
  return {};
}

/// Writes windows sorted by line_id, then index.
inline void write_csv(std::ostream& out, std::span<const SeriesWindow> windows, const TimeGrid& grid) {
  std::vector<const SeriesWindow*> order;
  for (const auto& w : windows) {
    if (w.line_id.empty() || w.line_id.find_first_of(",\n\r") != std::string::npos)
      throw Error(ErrorCode::Format, "line_id must be non-empty and free of ',' and newlines");
    order.push_back(&w);
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const auto* a, const auto* b) { return a->line_id < b->line_id; });
  out << kCsvHeader << '\n';
  for (const auto* w : order)
    for (const auto& s : w->values)
      out << grid.epoch_of(s.index) << ',' << w->line_id << ',' << format_value(s) << '\n';
}

/// Densifies every line of parsed CSV data onto the grid.
inline std::vector<SeriesWindow> to_windows(const CsvData& data, const TimeGrid& grid) {
  std::vector<SeriesWindow> out;
  out.reserve(data.lines.size());
  for (const auto& [id, pts] : data.lines) out.push_back(densify(pts, grid, id));
  return out;
}

}  // namespace gridcast
