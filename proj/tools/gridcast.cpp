// gridcast command-line front end.
//
// Exit codes: 0 success, 1 data error, 2 usage or configuration error.

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gridcast/config.hpp"
#include "gridcast/csv.hpp"
#include "gridcast/forecasters.hpp"
#include "gridcast/harness.hpp"
#include "gridcast/snapshot.hpp"
#include "gridcast/synthgen.hpp"

namespace {

using namespace gridcast;

constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Options shared by every subcommand.
struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;  // config key -> value given on the command line
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "key=value configuration file");
  app->add_option("--set", c.sets, "override one config key (key=value); repeatable");
}

// A flag that writes straight into a config key.
void add_key_flag(CLI::App* app, Common& c, const std::string& key, const std::string& help) {
  std::string flag = key;
  std::replace(flag.begin(), flag.end(), '_', '-');
  app->add_option_function<std::string>(
      "--" + flag,
      [&c, key](const std::string& v) { c.flags[key] = v; }, help);
}

RunConfig resolve(const Common& c) {
  RunConfig cfg;
  if (!c.config_path.empty()) apply_config_file(cfg, c.config_path);
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "--set expects key=value: " + s);
    set_config_value(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& [k, v] : c.flags) set_config_value(cfg, k, v);
  cfg.validate();
  return cfg;
}

std::vector<SeriesWindow> read_lines(const std::string& path, const TimeGrid& grid) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
  const auto data = read_csv(in, [&](std::size_t n, std::string_view row, std::string_view why) {
    std::cerr << path << ':' << n << ": skipped row (" << why << "): " << row << '\n';
  });
  if (data.lines.empty()) throw Error(ErrorCode::NoData, path + " holds no data rows");
  return to_windows(data, grid);
}

// Writes to a file, or to stdout for "-" / empty.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
      if (!*file_) throw Error(ErrorCode::Io, "cannot write " + path);
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }
  void finish() {
    stream().flush();
    if (!stream()) throw Error(ErrorCode::Io, "write failed");
  }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::vector<SeriesWindow> input_or_generated(const std::string& input, const RunConfig& cfg) {
  if (!input.empty()) return read_lines(input, cfg.grid());
  return generate_lines(cfg.generator(), cfg.lines);
}

EvalOptions eval_options(const RunConfig& cfg) {
  EvalOptions o;
  o.horizon = cfg.params.horizon;
  o.split = cfg.split;
  o.validity = cfg.validity;
  o.jobs = cfg.jobs;
  return o;
}

std::vector<NamedForecaster> forecasters_from(const std::string& list, const RunConfig& cfg) {
  std::vector<NamedForecaster> out;
  std::stringstream ss(list);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name == "persistence") out.push_back(persistence_entry());
    else if (name == "seasonal-daily") out.push_back(seasonal_daily_entry(cfg.smoothing().tau_d));
    else if (name == "recurrent") out.push_back(recurrent_entry(cfg.recurrent()));
    else if (name == "adaptive") out.push_back(adaptive_entry(cfg.smoothing()));
    else throw UsageError("unknown forecaster '" + name + "'");
  }
  if (out.empty()) throw UsageError("no forecaster selected");
  return out;
}

void write_reports(const std::vector<EvalReport>& reports, const std::string& out_path,
                   const std::string& per_line_path, const std::string& timing_path) {
  Output out(out_path);
  write_report_csv(out.stream(), reports);
  out.finish();
  if (!per_line_path.empty()) {
    Output pl(per_line_path);
    write_per_line_csv(pl.stream(), reports);
    pl.finish();
  }
  if (!timing_path.empty()) {
    Output tm(timing_path);
    write_timing_csv(tm.stream(), reports);
    tm.finish();
  }
}

std::string meta_path_for(const std::string& snapshot, const std::string& meta) {
  return meta.empty() ? snapshot + ".meta" : meta;
}

void cmd_generate(const RunConfig& cfg, const std::string& out_path) {
  const auto lines = generate_lines(cfg.generator(), cfg.lines);
  Output out(out_path);
  write_csv(out.stream(), lines, cfg.grid());
  out.finish();
}

void cmd_train(const RunConfig& cfg, const std::string& input, const std::string& snapshot,
               const std::string& meta) {
  const auto lines = read_lines(input, cfg.grid());
  const auto stats = compute_global_rms(lines, cfg.validity);
  const auto params = cfg.smoothing();
  std::vector<std::optional<AdaptiveState>> states(lines.size());
  parallel_for(lines.size(), cfg.jobs, [&](std::size_t k) {
    auto st = make_state_for_line(params, lines[k], stats);
    for (const auto& s : lines[k].values) st.ingest(s, stats);
    states[k] = std::move(st);
  });
  SnapshotSet set;
  for (std::size_t k = 0; k < lines.size(); ++k) set.emplace(lines[k].line_id, std::move(*states[k]));
  save_snapshot(snapshot, set);
  const std::string mp = meta_path_for(snapshot, meta);
  std::ofstream m(mp, std::ios::binary | std::ios::trunc);
  m << encode_meta(TrainingMeta{stats, cfg.grid()});
  if (!m) throw Error(ErrorCode::Io, "cannot write " + mp);
}

void cmd_forecast(const RunConfig& cfg, const std::string& input, const std::string& snapshot,
                  const std::string& meta, const std::string& out_path, const std::string& save_path) {
  auto states = load_snapshot(snapshot);
  std::ifstream mf(meta_path_for(snapshot, meta));
  if (!mf) throw Error(ErrorCode::Io, "cannot read training metadata " + meta_path_for(snapshot, meta));
  std::stringstream ms;
  ms << mf.rdbuf();
  const auto tm = decode_meta(ms.str());
  const auto lines = read_lines(input, tm.grid);

  std::vector<std::string> chunks(lines.size());
  std::vector<AdaptiveState*> targets(lines.size(), nullptr);
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const auto it = states.find(lines[k].line_id);
    if (it == states.end())
      std::cerr << "forecast: no trained state for line " << lines[k].line_id << "; skipped\n";
    else
      targets[k] = &it->second;
  }
  parallel_for(lines.size(), cfg.jobs, [&](std::size_t k) {
    if (!targets[k]) return;
    auto& st = *targets[k];
    std::string buf;
    const int h = st.params().horizon;
    for (const auto& s : lines[k].values) {
      if (!st.ingest(s, tm.stats)) continue;
      for (int i = 1; i <= h; ++i)
        buf += lines[k].line_id + ',' + std::to_string(s.index) + ',' + std::to_string(i) + ',' +
               format_double(st.forecast(i)) + '\n';
    }
    chunks[k] = std::move(buf);
  });
  Output out(out_path);
  out.stream() << "line_id,origin_index,horizon,value\n";
  for (const auto& c : chunks) out.stream() << c;
  out.finish();
  if (!save_path.empty()) save_snapshot(save_path, states);
  (void)cfg;
}

int run(int argc, char** argv) {
  CLI::App app{"gridcast: streaming forecasts for grid flow time series"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  Common common;
  std::string out_path, input, snapshot, meta, save_path, per_line, timing, list, kind;
  std::vector<std::string> axes;
  bool print_config = false;
  int short_h = 0, long_h = 0;
  std::string line_id;

  auto* gen = app.add_subcommand("generate", "write a synthetic CSV fixture");
  add_common(gen, common);
  for (const char* k : {"seed", "days", "step", "lines", "origin"}) add_key_flag(gen, common, k, std::string("config key ") + k);
  gen->add_option("--out,-o", out_path, "output CSV (default stdout)");

  auto* train = app.add_subcommand("train", "fit one adaptive state per line and write a snapshot");
  add_common(train, common);
  for (const char* k : {"step", "origin", "horizon", "jobs"}) add_key_flag(train, common, k, std::string("config key ") + k);
  train->add_option("--input,-i", input, "training CSV")->required();
  train->add_option("--snapshot,-s", snapshot, "snapshot file to write")->required();
  train->add_option("--meta", meta, "training metadata file (default <snapshot>.meta)");

  auto* fc = app.add_subcommand("forecast", "stream new data through a snapshot and emit forecasts");
  add_common(fc, common);
  add_key_flag(fc, common, "jobs", "worker threads");
  fc->add_option("--input,-i", input, "new data CSV")->required();
  fc->add_option("--snapshot,-s", snapshot, "snapshot written by train")->required();
  fc->add_option("--meta", meta, "training metadata (default <snapshot>.meta)");
  fc->add_option("--out,-o", out_path, "forecast CSV (default stdout)");
  fc->add_option("--save", save_path, "write the updated snapshot here");

  auto* ev = app.add_subcommand("evaluate", "rolling-origin RMSE of one or more forecasters");
  add_common(ev, common);
  for (const char* k : {"seed", "days", "step", "lines", "horizon", "split", "jobs", "n_days"})
    add_key_flag(ev, common, k, std::string("config key ") + k);
  ev->add_option("--input,-i", input, "CSV to evaluate (default: generated fixture)");
  ev->add_option("--forecasters,-f", list, "comma list of persistence, seasonal-daily, recurrent, adaptive")
      ->default_str("persistence,adaptive");
  ev->add_option("--out,-o", out_path, "report CSV (default stdout)");
  ev->add_option("--per-line", per_line, "per-line RMSE CSV");
  ev->add_option("--timing", timing, "timing and rank CSV (wall-clock, not reproducible)");

  auto* st = app.add_subcommand("stress", "evaluate after applying a damage scenario");
  add_common(st, common);
  for (const char* k : {"seed", "days", "step", "lines", "horizon", "split", "jobs", "intensity", "scenario_seed"})
    add_key_flag(st, common, k, std::string("config key ") + k);
  st->add_option("--kind,-k", kind, "inject-outliers, drop-points, shuffle-segments or resize-grid")->required();
  st->add_option("--input,-i", input, "CSV to damage (default: generated fixture)");
  st->add_option("--forecasters,-f", list, "comma list of forecasters")->default_str("persistence,adaptive");
  st->add_option("--out,-o", out_path, "report CSV (default stdout)");
  st->add_option("--per-line", per_line, "per-line RMSE CSV");
  st->add_option("--timing", timing, "timing and rank CSV");
  std::string damaged;
  st->add_option("--damaged", damaged, "also write the damaged data as CSV");

  auto* sw = app.add_subcommand("sweep", "grid search over smoothing rates");
  add_common(sw, common);
  for (const char* k : {"seed", "days", "step", "lines", "horizon", "split", "jobs"})
    add_key_flag(sw, common, k, std::string("config key ") + k);
  sw->add_option("--axis,-a", axes, "param=v1,v2,... ; repeatable, last varies fastest")->required();
  sw->add_option("--input,-i", input, "CSV fixtures (default: generated lines)");
  sw->add_option("--out,-o", out_path, "sweep CSV (default stdout)");

  auto* fig = app.add_subcommand("figures", "long-format series for plotting the recurrent method");
  add_common(fig, common);
  for (const char* k : {"seed", "days", "step", "n_days"}) add_key_flag(fig, common, k, std::string("config key ") + k);
  fig->add_option("--input,-i", input, "CSV (default: generated fixture)");
  fig->add_option("--line", line_id, "line to draw (default: first)");
  fig->add_option("--short", short_h, "short horizon in steps (default: one hour)");
  fig->add_option("--long", long_h, "long horizon in steps (default: three hours)");
  fig->add_option("--out,-o", out_path, "figure CSV (default stdout)");

  auto* cfgcmd = app.add_subcommand("config", "print the resolved configuration with documentation");
  add_common(cfgcmd, common);
  cfgcmd->add_flag("--print", print_config, "print (default)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  const RunConfig cfg = resolve(common);
  if (*gen) {
    cmd_generate(cfg, out_path);
  } else if (*train) {
    cmd_train(cfg, input, snapshot, meta);
  } else if (*fc) {
    cmd_forecast(cfg, input, snapshot, meta, out_path, save_path);
  } else if (*ev) {
    const auto lines = input_or_generated(input, cfg);
    std::vector<EvalReport> reports;
    for (const auto& f : forecasters_from(list.empty() ? "persistence,adaptive" : list, cfg))
      reports.push_back(evaluate(f, lines, eval_options(cfg)));
    write_reports(reports, out_path, per_line, timing);
  } else if (*st) {
    const auto k = parse_scenario_kind(kind);
    if (!k) throw UsageError("unknown scenario kind '" + kind + "'");
    auto lines = input_or_generated(input, cfg);
    lines = apply_scenario(std::move(lines), StressScenario{*k, cfg.intensity, cfg.scenario_seed, cfg.smoothing().tau_d});
    if (!damaged.empty()) {
      Output d(damaged);
      write_csv(d.stream(), lines, cfg.grid());
      d.finish();
    }
    std::vector<EvalReport> reports;
    for (const auto& f : forecasters_from(list.empty() ? "persistence,adaptive" : list, cfg))
      reports.push_back(evaluate(f, lines, eval_options(cfg)));
    write_reports(reports, out_path, per_line, timing);
  } else if (*sw) {
    std::vector<SweepAxis> parsed;
    for (const auto& a : axes) {
      const auto eq = a.find('=');
      if (eq == std::string::npos) throw UsageError("--axis expects param=v1,v2,...");
      SweepAxis ax{a.substr(0, eq), {}};
      std::stringstream ss(a.substr(eq + 1));
      std::string v;
      while (std::getline(ss, v, ',')) {
        const auto d = parse_double(v);
        if (!d) throw UsageError("--axis: not a number: " + v);
        ax.values.push_back(*d);
      }
      parsed.push_back(std::move(ax));
    }
    const auto lines = input_or_generated(input, cfg);
    const auto rows = sweep(cfg.smoothing(), parsed, lines, eval_options(cfg));
    Output out(out_path);
    write_sweep_csv(out.stream(), rows);
    out.finish();
  } else if (*fig) {
    const auto lines = input_or_generated(input, cfg);
    const SeriesWindow* w = &lines.front();
    if (!line_id.empty()) {
      w = nullptr;
      for (const auto& l : lines)
        if (l.line_id == line_id) w = &l;
      if (!w) throw Error(ErrorCode::NoData, "no line '" + line_id + "'");
    }
    const int per_hour = static_cast<int>(3600 / cfg.step);
    const std::vector<SeriesWindow> one{*w};
    const auto stats = compute_global_rms(one, cfg.validity);
    const auto rows = figure_series(*w, cfg.smoothing().tau_d, cfg.n_days, short_h > 0 ? short_h : per_hour,
                                    long_h > 0 ? long_h : 3 * per_hour, stats);
    Output out(out_path);
    write_figure_csv(out.stream(), rows);
    out.finish();
  } else if (*cfgcmd) {
    std::cout << describe_config(cfg);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "gridcast: " << e.what() << '\n';
    return kExitUsage;
  } catch (const gridcast::Error& e) {
    std::cerr << "gridcast: " << e.what() << '\n';
    return e.code() == gridcast::ErrorCode::ConfigError ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "gridcast: " << e.what() << '\n';
    return kExitData;
  }
}
