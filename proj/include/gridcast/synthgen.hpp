#pragma once

// Seeded synthetic flow series: daily + weekly sinusoids on an offset, a
// reflected random walk, random spikes, exact-zero outages and missing points.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "gridcast/error.hpp"
#include "gridcast/rng.hpp"
#include "gridcast/time_grid.hpp"

namespace gridcast {

struct GeneratorConfig {
  std::uint64_t seed = 1;
  int days = 8;
  std::int64_t step_s = 900;
  double daily_amp = 100.0;
  double weekly_amp = 40.0;
  double offset = 20.0;
  double noise_scale = 4.0;
  double spike_prob = 0.01;
  double spike_scale = 150.0;
  double outage_prob = 0.004;
  double outage_mean_len = 6.0;
  double missing_prob = 0.01;
  bool sign_flip = false;
  GridIndex start_index = 0;
  std::string line_id = "line0";

  int steps_per_day() const { return static_cast<int>(86400 / step_s); }
  int steps_per_week() const { return 7 * steps_per_day(); }

  void validate() const {
    const auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(spike_prob) || !prob(outage_prob) || !prob(missing_prob))
      throw Error(ErrorCode::ConfigError, "generator probabilities must lie in [0, 1]");
    if (!(daily_amp >= 0.0) || !(weekly_amp >= 0.0) || !(spike_scale >= 0.0) ||
        !(noise_scale >= 0.0))
      throw Error(ErrorCode::ConfigError, "generator amplitudes must be >= 0");
    if (days < 1) throw Error(ErrorCode::ConfigError, "days must be >= 1");
    if (step_s <= 0 || 86400 % step_s != 0 || 86400 / step_s < 2)
      throw Error(ErrorCode::ConfigError, "step must divide one day into at least 2 steps");
    if (!(outage_mean_len >= 1.0)) throw Error(ErrorCode::ConfigError, "outage_mean_len must be >= 1");
    if (!std::isfinite(offset)) throw Error(ErrorCode::ConfigError, "offset must be finite");
  }
};

/// The noise-free part of the signal at step t. Phases are taken modulo the
/// period so the result is bit-exactly periodic.
inline double dual_sinusoid(const GeneratorConfig& cfg, std::int64_t t, double phase_d,
                            double phase_w) {
  const int td = cfg.steps_per_day();
  const int tw = cfg.steps_per_week();
  const double two_pi = 2.0 * std::numbers::pi;
  const double xd = two_pi * static_cast<double>(t % td) / td + phase_d;
  const double xw = two_pi * static_cast<double>(t % tw) / tw + phase_w;
  return cfg.offset + cfg.daily_amp * std::sin(xd) + cfg.weekly_amp * std::sin(xw);
}

inline SeriesWindow generate(const GeneratorConfig& cfg) {
  cfg.validate();
  SplitMix64 rng(cfg.seed);
  const double two_pi = 2.0 * std::numbers::pi;
  const double phase_d = two_pi * rng.uniform();
  const double phase_w = two_pi * rng.uniform();
  const std::int64_t n = static_cast<std::int64_t>(cfg.days) * cfg.steps_per_day();
  const double bound = 3.0 * cfg.noise_scale * std::sqrt(static_cast<double>(cfg.steps_per_day()));
  const double sign = cfg.sign_flip ? -1.0 : 1.0;

  SeriesWindow w{cfg.line_id, cfg.start_index, {}};
  w.values.reserve(static_cast<std::size_t>(n));
  double walk = 0.0;
  std::int64_t outage_left = 0;
  for (std::int64_t t = 0; t < n; ++t) {
    if (cfg.noise_scale > 0.0) {
      walk += cfg.noise_scale * rng.normal();
      if (walk > bound) walk = 2.0 * bound - walk;
      if (walk < -bound) walk = -2.0 * bound - walk;
      walk = std::fmax(-bound, std::fmin(bound, walk));
    }
    double y = dual_sinusoid(cfg, t, phase_d, phase_w) + walk;

    if (rng.bernoulli(cfg.spike_prob)) {
      const double s = rng.uniform() < 0.5 ? -1.0 : 1.0;
      y += s * cfg.spike_scale * (1.0 + std::abs(rng.normal()));
    }
    if (outage_left == 0 && rng.bernoulli(cfg.outage_prob)) {
      // Geometric length on {1, 2, ...} with the configured mean.
      const double p = 1.0 / cfg.outage_mean_len;
      outage_left = 1;
      while (!rng.bernoulli(p)) ++outage_left;
    }
    if (outage_left > 0) {
      y = 0.0;
      --outage_left;
    }
    const GridIndex idx = cfg.start_index + t;
    if (rng.bernoulli(cfg.missing_prob)) {
      w.values.push_back(Sample::missing(idx));
    } else {
      w.values.push_back(Sample::present(idx, y == 0.0 ? 0.0 : sign * y));
    }
  }
  return w;
}

/// n_lines independent lines; line k uses a seed derived from (seed, k).
inline std::vector<SeriesWindow> generate_lines(const GeneratorConfig& cfg, int n_lines) {
  std::vector<SeriesWindow> out;
  out.reserve(static_cast<std::size_t>(n_lines));
  for (int k = 0; k < n_lines; ++k) {
    GeneratorConfig c = cfg;
    c.seed = n_lines == 1 ? cfg.seed : derive_seed(cfg.seed, static_cast<std::uint64_t>(k));
    char id[32];
    std::snprintf(id, sizeof id, "line%04d", k);
    c.line_id = n_lines == 1 ? cfg.line_id : id;
    out.push_back(generate(c));
  }
  return out;
}

}  // namespace gridcast
