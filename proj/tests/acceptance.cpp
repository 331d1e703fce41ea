// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Tolerances are fixed here and never relaxed at run time.

#include <sys/wait.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "gridcast/adaptive.hpp"
#include "gridcast/forecasters.hpp"
#include "gridcast/harness.hpp"
#include "gridcast/rng.hpp"
#include "gridcast/snapshot.hpp"
#include "gridcast/synthgen.hpp"
#include "oracle.hpp"

namespace {

using namespace gridcast;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// 1 and 2: batch recurrent vs persistence over the last day of the
// 8-day, 15-minute fixture.
Outcome outperformance(int horizon) {
  const auto t0 = Clock::now();
  int wins = 0;
  std::string ratios;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    GeneratorConfig cfg;
    cfg.seed = seed;
    const std::vector<SeriesWindow> lines{generate(cfg)};
    EvalOptions opt;
    opt.horizon = horizon;
    opt.split = 7.0 / 8.0;
    const auto rec = evaluate(recurrent_entry(RecurrentConfig{7, 96, horizon, true}), lines, opt);
    const auto per = evaluate(persistence_entry(), lines, opt);
    wins += rec.aggregate_rmse < per.aggregate_rmse;
    ratios += fmt(" %.3f", rec.aggregate_rmse / per.aggregate_rmse);
  }
  const double el = seconds_since(t0);
  return {wins >= 9 && el < 5.0,
          std::to_string(wins) + "/10 seeds (need 9), rmse ratio per seed:" + ratios + ", " + fmt("%.2f s (< 5 s)", el)};
}

std::vector<double> noisy_dual_seasonal(int tau_d, std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<double> ys(n);
  const int tau_w = 7 * tau_d;
  for (std::size_t k = 0; k < n; ++k)
    ys[k] = 80.0 + 20.0 * std::sin(2 * std::numbers::pi * static_cast<double>(k % tau_d) / tau_d) +
            8.0 * std::sin(2 * std::numbers::pi * static_cast<double>(k % tau_w) / tau_w) + 2.0 * rng.normal();
  return ys;
}

// 3: streaming g and o against direct weighted least squares.
Outcome recursion_oracles() {
  const auto t0 = Clock::now();
  SmoothingParams p;
  p.tau_d = 24;
  p.tau_w = 168;
  const auto ys = noisy_dual_seasonal(24, 3 * 168, 17);
  const auto ref = oracle::blend_and_reversion(ys, p);
  ValidityStats stats;
  stats.global_rms = 1e4;
  AdaptiveState st(p, std::numeric_limits<double>::infinity());
  double dev_g = 0.0, dev_o = 0.0;
  std::size_t ng = 0, no = 0;
  bool all_valid = true;
  for (std::size_t t = 0; t < ys.size(); ++t) {
    const Sample s = Sample::present(static_cast<GridIndex>(t), ys[t]);
    const auto ind = st.indicators_for(s, stats);
    all_valid = all_valid && ind.point && (t < 1 || ind.step) && (t < 11 || ind.monitor);
    st.update(s, stats);
    if (t < static_cast<std::size_t>(p.monitor_lag)) continue;
    // Undefined ratios (denominator below the epsilon) read as 0 on both sides.
    const auto defined = [](double v) { return std::isnan(v) ? 0.0 : v; };
    dev_g = std::max(dev_g, std::abs(st.blend_raw() - defined(ref.g_raw[t])));
    dev_o = std::max(dev_o, std::abs(st.reversion() - defined(ref.o_raw[t])));
    ++ng;
    ++no;
  }
  const double el = seconds_since(t0);
  const std::size_t expected = ys.size() - static_cast<std::size_t>(p.monitor_lag);
  const bool ok = all_valid && ng == expected && no == expected && dev_g <= 1e-9 && dev_o <= 1e-9 && el < 10.0;
  return {ok, "max |g - g*| " + fmt("%.2e", dev_g) + ", max |o - o*| " + fmt("%.2e", dev_o) + " (<= 1e-9) over " +
                  std::to_string(ng) + " steps, " + fmt("%.2f s", el)};
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

// 4: every accumulator is frozen when its governing indicator is 0.
Outcome hold_on_invalid() {
  SmoothingParams p;
  p.tau_d = 6;
  p.tau_w = 42;
  p.horizon = 4;
  p.monitor_lag = 3;
  const auto ys = noisy_dual_seasonal(6, 42 * 4, 23);
  ValidityStats stats;
  stats.global_rms = 1e3;
  AdaptiveState st(p, 50.0);
  std::size_t checks = 0, violations = 0;
  const auto check = [&](double a, double b) {
    ++checks;
    violations += !same_bits(a, b);
  };
  for (std::size_t t = 0; t < ys.size(); ++t) {
    const Sample s = Sample::present(static_cast<GridIndex>(t), ys[t]);
    const auto& b = st.fields();
    const std::size_t dslot = t % b.daily.size(), wslot = t % b.weekly.size();
    for (int which = 0; which < 3; ++which) {
      Indicators ind{true, true, true};
      if (which == 0) ind.point = false;
      if (which == 1) ind.step = false;
      if (which == 2) ind.monitor = false;
      AdaptiveState c = st;
      c.update(s, ind);
      const auto& a = c.fields();
      if (which == 0) check(a.mean, b.mean);
      if (which == 1) {
        check(a.daily[dslot], b.daily[dslot]);
        check(a.weekly[wslot], b.weekly[wslot]);
      }
      if (which == 2)
        for (auto [x, y] : {std::pair{a.g_num, b.g_num}, {a.g_den, b.g_den}, {a.err_model, b.err_model},
                            {a.err_persist, b.err_persist}, {a.o_num, b.o_num}, {a.o_den, b.o_den}})
          check(x, y);
      // Rings other than the current slot never change.
      for (std::size_t k = 0; k < a.daily.size(); ++k)
        if (k != dslot) check(a.daily[k], b.daily[k]);
      for (std::size_t k = 0; k < a.weekly.size(); ++k)
        if (k != wslot) check(a.weekly[k], b.weekly[k]);
    }
    st.update(s, stats);
  }
  return {violations == 0 && checks > 0,
          std::to_string(violations) + " violations in " + std::to_string(checks) + " accumulator checks"};
}

SmoothingParams fifteen_minute(int horizon) {
  SmoothingParams p;
  p.tau_d = 96;
  p.tau_w = 672;
  p.horizon = horizon;
  p.monitor_lag = std::max(1, horizon - 1);
  return p;
}

// 5: with eM > eP the second-stage prediction is exactly y_t.
Outcome gate_property() {
  GeneratorConfig cfg;
  cfg.days = 35;
  const auto w = generate(cfg);
  const std::vector<SeriesWindow> one{w};
  const auto stats = compute_global_rms(one);
  const auto p = fifteen_minute(4);
  auto st = make_state_for_line(p, w, stats);
  std::size_t gated = 0, violations = 0, forecasts = 0;
  for (const auto& s : w.values) {
    st.update(s, stats);
    for (int i = 1; i <= p.horizon; ++i) {
      const auto tr = st.trace(i);
      ++forecasts;
      const bool model_worse = st.fields().err_model > st.fields().err_persist;
      if (tr.warming_up || !model_worse) continue;
      ++gated;
      violations += !(tr.persistence_gate && tr.pred2 == tr.terminal);
    }
  }
  return {violations == 0 && gated > 0, std::to_string(violations) + " violations, gate active in " +
                                            std::to_string(gated) + " of " + std::to_string(forecasts) + " forecasts"};
}

// 6: the damped change stays inside (-K_s, K_s), is monotone, and halves at K_s.
Outcome saturation_bounds() {
  SplitMix64 rng(606);
  std::size_t bound_fail = 0, half_fail = 0, mono_fail = 0;
  for (int k = 0; k < 1000000; ++k) {
    const double y = -1e3 + 2e3 * rng.uniform();
    const double ks = std::pow(10.0, -2.0 + 5.0 * rng.uniform());
    const double delta = rng.normal() * ks * std::pow(10.0, -3.0 + 6.0 * rng.uniform());
    const double pred3 = y + delta;
    const double final_value = y + saturate(pred3 - y, ks);
    bound_fail += !(std::abs(final_value - y) < ks);
    half_fail += saturate(ks, ks) != ks / 2 || saturate(-ks, ks) != -ks / 2;
  }
  for (int sweep = 0; sweep < 100; ++sweep) {
    const double ks = std::pow(10.0, -2.0 + 5.0 * rng.uniform());
    std::vector<double> d(10000);
    for (auto& x : d) x = rng.normal() * ks * std::pow(10.0, -3.0 + 6.0 * rng.uniform());
    std::sort(d.begin(), d.end());
    for (std::size_t k = 1; k < d.size(); ++k) mono_fail += saturate(d[k], ks) < saturate(d[k - 1], ks);
  }
  return {bound_fail == 0 && half_fail == 0 && mono_fail == 0,
          "bound " + std::to_string(bound_fail) + ", monotone " + std::to_string(mono_fail) + ", half-at-K_s " +
              std::to_string(half_fail) + " failures over 1e6 triples and 100 sorted sweeps"};
}

// 7: four damage scenarios x 10 seeds at intensity 0.05.
Outcome robustness_fuzz() {
  const auto t0 = Clock::now();
  std::size_t forecasts = 0, non_finite = 0, errors = 0, faults = 0;
  const auto p = fifteen_minute(4);
  for (auto kind : {ScenarioKind::InjectOutliers, ScenarioKind::DropPoints, ScenarioKind::ShuffleSegments,
                    ScenarioKind::ResizeGrid})
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      try {
        GeneratorConfig cfg;
        cfg.seed = seed;
        cfg.days = 21;
        const auto lines = apply_scenario(generate_lines(cfg, 4), StressScenario{kind, 0.05, seed, 96});
        EvalOptions opt;
        opt.horizon = 4;
        opt.split = 0.5;
        opt.on_predict = [&](const std::string&, GridIndex, int, double v) {
          ++forecasts;
          non_finite += !std::isfinite(v);
        };
        evaluate(adaptive_entry(p), lines, opt);
        // Direct streaming to observe the fault counter.
        const auto stats = training_stats(lines, 0.5, ValidityStats{});
        for (const auto& w : lines) {
          auto st = make_state_for_line(p, head(w, w.size() / 2), stats);
          for (const auto& s : w.values) {
            st.update(s, stats);
            for (int i = 1; i <= 4; ++i) non_finite += !std::isfinite(st.forecast(i));
          }
          faults += st.fault_count();
        }
      } catch (const std::exception& e) {
        ++errors;
        std::cerr << "  scenario " << to_string(kind) << " seed " << seed << ": " << e.what() << '\n';
      }
    }
  // A state pushed to overflow must fault, recover, and keep forecasting.
  SmoothingParams tiny;
  tiny.tau_d = 4;
  tiny.tau_w = 28;
  tiny.horizon = 2;
  tiny.monitor_lag = 2;
  AdaptiveState st(tiny, std::numeric_limits<double>::infinity());
  ValidityStats huge;
  huge.global_rms = 1e306;
  bool flag_seen = false, forced_finite = true;
  for (int k = 0; k < 40; ++k) {
    st.update(Sample::present(k, k % 2 ? -1e306 : 1e306), huge);
    flag_seen = flag_seen || st.fault_flag();
    forced_finite = forced_finite && std::isfinite(st.forecast(1)) && std::isfinite(st.forecast(2));
  }
  const double el = seconds_since(t0);
  const bool ok = non_finite == 0 && errors == 0 && faults == 0 && flag_seen && forced_finite;
  return {ok, std::to_string(forecasts) + " harness forecasts, " + std::to_string(non_finite) + " non-finite, " +
                  std::to_string(errors) + " errors, " + std::to_string(faults) +
                  " recoveries on damaged data (designed: 0, injected values are invalid points), forced overflow " +
                  (flag_seen ? "raised" : "did not raise") + " fault_flag, " + fmt("%.2f s", el)};
}

// 8: exact forecasts on a noise-free dual sinusoid once D, W and g settle.
Outcome exact_periodicity() {
  GeneratorConfig cfg;
  cfg.step_s = 3600;
  cfg.days = 7 * 150;
  cfg.noise_scale = cfg.spike_prob = cfg.outage_prob = cfg.missing_prob = 0.0;
  const auto w = generate(cfg);
  SmoothingParams p;
  p.tau_d = 24;
  p.tau_w = 168;
  p.horizon = 12;
  p.monitor_lag = 11;
  ValidityStats stats;
  stats.global_rms = 1e3;
  AdaptiveState st(p, std::numeric_limits<double>::infinity());
  const double amp = cfg.daily_amp;
  double worst = 0.0;
  for (std::size_t t = 0; t + 12 < w.size(); ++t) {
    st.update(w[t], stats);
    if (t + 168 >= w.size()) worst = std::max(worst, std::abs(st.forecast(12) - w[t + 12].value));
  }
  return {worst <= 1e-6 * amp, "max |error| at horizon 12 over the last week " + fmt("%.3e", worst) +
                                   " (<= " + fmt("%.0e", 1e-6 * amp) + ")"};
}

// 9: a forecaster that logs what it is fed never sees past the origin.
class RecordingForecaster final : public Forecaster {
 public:
  RecordingForecaster(std::unique_ptr<Forecaster> inner, std::map<std::string, GridIndex>& log, std::string id)
      : inner_(std::move(inner)), log_(log), id_(std::move(id)) {}
  void observe(const Sample& s) override {
    auto [it, fresh] = log_.emplace(id_, s.index);
    if (!fresh) it->second = std::max(it->second, s.index);
    inner_->observe(s);
  }
  double predict(int h) override { return inner_->predict(h); }

 private:
  std::unique_ptr<Forecaster> inner_;
  std::map<std::string, GridIndex>& log_;
  std::string id_;
};

Outcome causality() {
  std::map<std::string, GridIndex> seen;
  std::size_t calls = 0, violations = 0;
  GeneratorConfig cfg;
  cfg.days = 21;
  const auto lines = generate_lines(cfg, 3);
  for (const auto& base : {adaptive_entry(fifteen_minute(4)), recurrent_entry(RecurrentConfig{7, 96, 4, true}),
                           persistence_entry()}) {
    NamedForecaster rec{base.name, [&, base](const LineContext& ctx) {
                          return std::make_unique<RecordingForecaster>(base.make(ctx), seen, ctx.training.line_id);
                        }};
    seen.clear();
    EvalOptions opt;
    opt.horizon = 4;
    opt.split = 0.4;
    opt.on_predict = [&](const std::string& id, GridIndex origin, int, double) {
      ++calls;
      violations += seen.at(id) > origin;
    };
    evaluate(rec, lines, opt);
  }
  return {violations == 0 && calls > 0,
          std::to_string(violations) + " reads past the origin in " + std::to_string(calls) + " predictions"};
}

// 10: one year at 5 minutes for 100 lines; generation is excluded from the timing.
Outcome throughput() {
  const auto p = SmoothingParams{};
  double busy = 0.0;
  std::size_t updates = 0, forecasts = 0;
  std::size_t footprint = 0;
  bool constant_memory = true;
  for (int line = 0; line < 100; ++line) {
    GeneratorConfig cfg;
    cfg.step_s = 300;
    cfg.days = 365;
    cfg.seed = derive_seed(2024, static_cast<std::uint64_t>(line));
    const auto w = generate(cfg);
    const auto t0 = Clock::now();
    const std::size_t n_train = training_length(w.size(), 0.75);
    const auto train = head(w, n_train);
    const std::vector<SeriesWindow> one{train};
    const auto stats = compute_global_rms(one);
    auto st = make_state_for_line(p, train, stats);
    const auto before = st.footprint_bytes();
    double sink = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      st.update(w[k], stats);
      ++updates;
      if (k >= n_train) {
        sink += st.forecast(p.horizon);
        ++forecasts;
      }
    }
    busy += seconds_since(t0);
    constant_memory = constant_memory && st.footprint_bytes() == before && std::isfinite(sink);
    if (line == 0) footprint = before;
    constant_memory = constant_memory && before == footprint;
  }
  const std::size_t ring_doubles = static_cast<std::size_t>(p.tau_d + p.tau_w);
  const bool theta_tau_w = footprint < 2 * (ring_doubles * sizeof(double)) + 4096;
  return {busy < 60.0 && constant_memory && theta_tau_w,
          std::to_string(updates) + " updates + " + std::to_string(forecasts) + " forecasts in " + fmt("%.2f s", busy) +
              " (< 60 s), per-line state " + std::to_string(footprint) + " bytes, fixed while streaming"};
}

// 11: every CLI command twice, byte-compared.
int run_cli(const std::string& args, const std::string& out, const std::string& err) {
  const std::string cmd = std::string(GRIDCAST_CLI) + " " + args + " >" + out + " 2>" + err;
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::filesystem::path& f) {
  std::ifstream in(f, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli_determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "gridcast_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto P = [&](const std::string& n) { return (dir / n).string(); };
  if (run_cli("generate --step 900 --days 10 --lines 3 -o " + P("fixture.csv"), P("o"), P("e")) != 0)
    return {false, "could not generate the fixture"};
  {
    // Head/tail split for train and forecast.
    std::ifstream in(P("fixture.csv"));
    std::ofstream h(P("head.csv")), t(P("tail.csv"));
    std::string row;
    std::getline(in, row);
    h << row << '\n';
    t << row << '\n';
    while (std::getline(in, row)) (std::stoll(row.substr(0, row.find(','))) < 8 * 86400 ? h : t) << row << '\n';
  }
  const std::string common = " --step 900 --horizon 4 -i " + P("fixture.csv");
  const std::vector<std::pair<std::string, std::string>> cmds{
      {"generate", "generate --step 900 --days 8 --seed 3 --lines 2 -o @"},
      {"train", "train --step 900 --horizon 4 -i " + P("head.csv") + " -s @"},
      {"forecast", "forecast -i " + P("tail.csv") + " -s " + P("snap.bin") + " -o @ --save @.snap"},
      {"evaluate", "evaluate" + common + " -f persistence,seasonal-daily,recurrent,adaptive --per-line @"},
      {"stress inject-outliers", "stress --kind inject-outliers" + common + " --damaged @"},
      {"stress drop-points", "stress --kind drop-points" + common + " --damaged @"},
      {"stress shuffle-segments", "stress --kind shuffle-segments" + common + " --damaged @"},
      {"stress resize-grid", "stress --kind resize-grid --intensity 0.5" + common + " --damaged @"},
      {"sweep", "sweep --axis r_d=0.05,0.15 --axis r_o=0.01,0.02" + common + " -o @"},
      {"figures", "figures --step 900 -i " + P("fixture.csv") + " -o @"},
      {"config", "config --set r_d=0.2 --set step=900"},
  };
  if (run_cli("train --step 900 --horizon 4 -i " + P("head.csv") + " -s " + P("snap.bin"), P("o"), P("e")) != 0)
    return {false, "train failed: " + slurp(P("e"))};
  std::vector<std::string> failed;
  for (const auto& [name, tmpl] : cmds) {
    std::string outputs[2];
    bool ran = true;
    for (int r = 0; r < 2; ++r) {
      const std::string file = P("out" + std::to_string(r));
      std::string cmd = tmpl;
      for (std::size_t at; (at = cmd.find('@')) != std::string::npos;) cmd.replace(at, 1, file);
      ran = ran && run_cli(cmd, file + ".stdout", file + ".stderr") == 0;
      outputs[r] = slurp(file + ".stdout") + '\x1f' + slurp(file) + '\x1f' + slurp(file + ".snap") + '\x1f' +
                   slurp(file + ".meta");
      for (const char* ext : {"", ".stdout", ".snap", ".meta"}) fs::remove(file + ext);
    }
    if (!ran || outputs[0] != outputs[1] || outputs[0].size() < 8) failed.push_back(name);
  }
  fs::remove_all(dir);
  std::string detail = std::to_string(cmds.size() - failed.size()) + "/" + std::to_string(cmds.size()) +
                       " commands byte-identical across two runs";
  for (const auto& f : failed) detail += "; differs or failed: " + f;
  return {failed.empty(), detail};
}

// 12: RMSE on a hand case and the 2:1 ranking example.
Outcome scoring_oracles() {
  // Persistence at horizon 1; the 19 errors square-sum to 181.
  const std::vector<double> ys{2, 5, 3, 8, 6, 6, 9, 4, 7, 10, 12, 11, 15, 13, 14, 18, 16, 20, 17, 21};
  const std::vector<SeriesWindow> lines{SeriesWindow::from_values(ys)};
  EvalOptions opt;
  opt.horizon = 1;
  opt.split = 0.0;
  opt.fixed_stats = true;
  opt.validity.global_rms = 100.0;
  const auto rep = evaluate(persistence_entry(), lines, opt);
  const bool rmse_ok = rep.aggregate_rmse == std::sqrt(181.0 / 19.0) && rep.n_predictions == 19;

  EvalReport a, b;
  a.name = "A";
  a.aggregate_rmse = 1.0;
  a.elapsed_s = 2.0;
  b.name = "B";
  b.aggregate_rmse = 2.0;
  b.elapsed_s = 1.0;
  const std::vector<EvalReport> reports{b, a};
  const auto ranked = rank_score(reports);
  const bool rank_ok = ranked[0].name == "A" && ranked[0].score == 4 && ranked[1].name == "B" && ranked[1].score == 5;
  return {rmse_ok && rank_ok, "rmse " + fmt("%.15g", rep.aggregate_rmse) + " vs sqrt(181/19) " +
                                  fmt("%.15g", std::sqrt(181.0 / 19.0)) + ", ranking A=" +
                                  std::to_string(ranked[0].score) + " B=" + std::to_string(ranked[1].score)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"outperformance at one hour", [] { return outperformance(4); }},
      {"outperformance at three hours", [] { return outperformance(12); }},
      {"recursion oracles", recursion_oracles},
      {"hold-on-invalid", hold_on_invalid},
      {"gate property", gate_property},
      {"saturation bounds", saturation_bounds},
      {"robustness fuzz", robustness_fuzz},
      {"exact periodicity", exact_periodicity},
      {"causality", causality},
      {"throughput", throughput},
      {"determinism", cli_determinism},
      {"rmse and scoring oracles", scoring_oracles},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (k + 1) << ". " << criteria[k].first << ": " << o.detail
              << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size()
            << " acceptance criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
