#pragma once

// Checkpoint format for adaptive states. Little-endian, versioned, with an
// FNV-1a checksum over everything before it. Layout: docs/snapshot_format.md.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gridcast/adaptive.hpp"
#include "gridcast/error.hpp"
#include "gridcast/numfmt.hpp"
#include "gridcast/quality.hpp"
#include "gridcast/time_grid.hpp"

namespace gridcast {

inline constexpr char kSnapshotMagic[8] = {'G', 'R', 'I', 'D', 'S', 'N', 'A', 'P'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

namespace snapshot_detail {

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void raw(std::string_view s) { buf_.append(s); }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : b_(bytes) {}
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(b_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  bool flag() {
    const auto v = u8();
    if (v > 1) throw Error(ErrorCode::Format, "snapshot: bad boolean byte");
    return v == 1;
  }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s(b_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::size_t count(std::size_t elem_bytes) {
    const auto n = u32();
    if (static_cast<std::uint64_t>(n) * elem_bytes > b_.size() - pos_)
      throw Error(ErrorCode::Format, "snapshot: truncated ring");
    return n;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw Error(ErrorCode::Format, "snapshot: truncated");
  }
  std::string_view b_;
  std::size_t pos_ = 0;
};

inline void write_params(Writer& w, const SmoothingParams& p) {
  for (double r : {p.r_d, p.r_w, p.r_g, p.r_e, p.r_m, p.r_o}) w.f64(r);
  for (int v : {p.horizon, p.monitor_lag, p.tau_d, p.tau_w}) w.i32(v);
  w.f64(p.saturation_scale);
}

inline SmoothingParams read_params(Reader& r) {
  SmoothingParams p;
  p.r_d = r.f64();
  p.r_w = r.f64();
  p.r_g = r.f64();
  p.r_e = r.f64();
  p.r_m = r.f64();
  p.r_o = r.f64();
  p.horizon = r.i32();
  p.monitor_lag = r.i32();
  p.tau_d = r.i32();
  p.tau_w = r.i32();
  p.saturation_scale = r.f64();
  return p;
}

inline void write_state(Writer& w, const AdaptiveFields& f) {
  write_params(w, f.params);
  w.f64(f.saturation_scale);
  w.u32(static_cast<std::uint32_t>(f.daily.size()));
  for (double v : f.daily) w.f64(v);
  w.u32(static_cast<std::uint32_t>(f.weekly.size()));
  for (double v : f.weekly) w.f64(v);
  w.u32(static_cast<std::uint32_t>(f.recent.size()));
  for (const auto& rv : f.recent) {
    w.f64(rv.value);
    w.u8(rv.valid ? 1 : 0);
  }
  w.u32(static_cast<std::uint32_t>(f.predictions.size()));
  for (const auto& ps : f.predictions) {
    w.f64(ps.pred);
    w.f64(ps.sum_daily);
    w.f64(ps.sum_weekly);
  }
  for (double v : {f.g_num, f.g_den, f.o_num, f.o_den, f.err_model, f.err_persist, f.mean, f.g,
                   f.g_raw, f.o, f.y})
    w.f64(v);
  w.u8(f.last_valid ? 1 : 0);
  w.f64(f.last_valid.value_or(0.0));
  for (std::uint64_t v : {f.steps_seen, f.zero_run, f.fault_count}) w.u64(v);
  w.u8(f.fault_flag ? 1 : 0);
  w.u8(f.last_index ? 1 : 0);
  w.i64(f.last_index.value_or(0));
}

inline AdaptiveFields read_state(Reader& r) {
  AdaptiveFields f;
  f.params = read_params(r);
  f.saturation_scale = r.f64();
  f.daily.resize(r.count(8));
  for (auto& v : f.daily) v = r.f64();
  f.weekly.resize(r.count(8));
  for (auto& v : f.weekly) v = r.f64();
  f.recent.resize(r.count(9));
  for (auto& rv : f.recent) {
    rv.value = r.f64();
    rv.valid = r.flag();
  }
  f.predictions.resize(r.count(24));
  for (auto& ps : f.predictions) {
    ps.pred = r.f64();
    ps.sum_daily = r.f64();
    ps.sum_weekly = r.f64();
  }
  for (double* v : {&f.g_num, &f.g_den, &f.o_num, &f.o_den, &f.err_model, &f.err_persist, &f.mean,
                    &f.g, &f.g_raw, &f.o, &f.y})
    *v = r.f64();
  const bool has_last = r.flag();
  const double last = r.f64();
  if (has_last) f.last_valid = last;
  f.steps_seen = r.u64();
  f.zero_run = r.u64();
  f.fault_count = r.u64();
  f.fault_flag = r.flag();
  const bool has_index = r.flag();
  const auto index = r.i64();
  if (has_index) f.last_index = index;
  return f;
}

}  // namespace snapshot_detail

/// Line id -> state. std::map keeps the serialized order sorted by id.
using SnapshotSet = std::map<std::string, AdaptiveState>;

inline std::string encode_snapshot(const SnapshotSet& states) {
  snapshot_detail::Writer w;
  w.raw(std::string_view(kSnapshotMagic, sizeof kSnapshotMagic));
  w.u32(kSnapshotVersion);
  w.u32(static_cast<std::uint32_t>(states.size()));
  for (const auto& [id, st] : states) {
    w.str(id);
    snapshot_detail::write_state(w, st.fields());
  }
  w.u64(snapshot_detail::fnv1a(w.bytes()));
  return w.bytes();
}

inline SnapshotSet decode_snapshot(std::string_view bytes) {
  if (bytes.size() < sizeof kSnapshotMagic + 16 ||
      std::memcmp(bytes.data(), kSnapshotMagic, sizeof kSnapshotMagic) != 0)
    throw Error(ErrorCode::Format, "not a snapshot file");
  const auto body = bytes.substr(0, bytes.size() - 8);
  snapshot_detail::Reader tail(bytes.substr(bytes.size() - 8));
  if (tail.u64() != snapshot_detail::fnv1a(body))
    throw Error(ErrorCode::Format, "snapshot checksum mismatch");
  snapshot_detail::Reader r(body.substr(sizeof kSnapshotMagic));
  const auto version = r.u32();
  if (version != kSnapshotVersion)
    throw Error(ErrorCode::Format, "unsupported snapshot version " + std::to_string(version));
  const auto n = r.u32();
  SnapshotSet out;
  for (std::uint32_t k = 0; k < n; ++k) {
    auto id = r.str();
    auto fields = snapshot_detail::read_state(r);
    out.insert_or_assign(std::move(id), AdaptiveState::from_fields(std::move(fields)));
  }
  if (!r.done()) throw Error(ErrorCode::Format, "trailing bytes in snapshot");
  return out;
}

inline void save_snapshot(const std::string& path, const SnapshotSet& states) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  const auto bytes = encode_snapshot(states);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

inline SnapshotSet load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read snapshot " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_snapshot(bytes);
}

/// Training metadata stored next to the snapshot: the validity statistics and
/// the grid the states were trained on. Plain key=value text.
struct TrainingMeta {
  ValidityStats stats;
  TimeGrid grid;
  friend bool operator==(const TrainingMeta&, const TrainingMeta&) = default;
};

inline std::string encode_meta(const TrainingMeta& m) {
  std::string s = "# gridcast training metadata v1\n";
  s += "global_rms=" + format_double(m.stats.global_rms) + "\n";
  s += "increment_threshold_factor=" + format_double(m.stats.increment_threshold_factor) + "\n";
  s += "zero_run_min=" + std::to_string(m.stats.zero_run_min) + "\n";
  s += "outlier_factor=" + format_double(m.stats.outlier_factor) + "\n";
  s += "grid_origin=" + std::to_string(m.grid.origin_epoch_s) + "\n";
  s += "grid_step=" + std::to_string(m.grid.step_s) + "\n";
  return s;
}

inline TrainingMeta decode_meta(std::string_view text) {
  TrainingMeta m;
  std::map<std::string, std::string, std::less<>> kv;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::Format, "meta: expected key=value");
    kv.emplace(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
  }
  const auto get_d = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorCode::Format, std::string("meta: missing ") + key);
    auto v = parse_double(it->second);
    if (!v) throw Error(ErrorCode::Format, std::string("meta: bad number for ") + key);
    kv.erase(it);
    return *v;
  };
  const auto get_i = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorCode::Format, std::string("meta: missing ") + key);
    auto v = parse_int(it->second);
    if (!v) throw Error(ErrorCode::Format, std::string("meta: bad integer for ") + key);
    kv.erase(it);
    return *v;
  };
  m.stats.global_rms = get_d("global_rms");
  m.stats.increment_threshold_factor = get_d("increment_threshold_factor");
  m.stats.zero_run_min = static_cast<int>(get_i("zero_run_min"));
  m.stats.outlier_factor = get_d("outlier_factor");
  m.grid.origin_epoch_s = get_i("grid_origin");
  m.grid.step_s = get_i("grid_step");
  if (!kv.empty()) throw Error(ErrorCode::Format, "meta: unknown key " + kv.begin()->first);
  m.stats.validate();
  m.grid.validate();
  return m;
}

}  // namespace gridcast
