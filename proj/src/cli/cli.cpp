#include "heliofarm/cli/cli.hpp"

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "heliofarm/anomaly/anomaly.hpp"
#include "heliofarm/core/log.hpp"
#include "heliofarm/core/text.hpp"
#include "heliofarm/farm/synth.hpp"
#include "heliofarm/farm/world.hpp"
#include "heliofarm/reports/reports.hpp"
#include "heliofarm/store/dataset.hpp"
#include "heliofarm/trainsvc/service.hpp"

namespace heliofarm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kRunKeys{"sim-file", "farms",   "store", "seed",     "mode",
                                        "workers",  "retrain-threshold", "out", "log-level"};
const std::set<std::string> kPathKeys{"sim-file", "store", "out"};

std::string env_name(std::string key) {
  for (auto& ch : key) ch = ch == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return "HELIOFARM_" + key;
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  for (auto part : split(text, ',')) {
    part = trim(part);
    if (!part.empty()) out.emplace_back(part);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  auto d = parse_double(v);
  if (!d) throw UsageError(fmt::format("{}: '{}' is not a number", key, v));
  return *d;
}

long long to_int(const std::string& key, const std::string& v) {
  auto i = parse_int(v);
  if (!i) throw UsageError(fmt::format("{}: '{}' is not an integer", key, v));
  return *i;
}

void apply(RunConfig& c, const std::string& key, const std::string& v) {
  if (key == "sim-file") {
    c.sim_file = v;
  } else if (key == "farms") {
    c.farms = split_list(v);
  } else if (key == "store") {
    c.store = v;
  } else if (key == "seed") {
    const long long s = to_int(key, v);
    if (s < 0) throw UsageError("seed must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
  } else if (key == "mode") {
    c.mode = v;
  } else if (key == "workers") {
    c.workers = static_cast<int>(to_int(key, v));
  } else if (key == "retrain-threshold") {
    c.retrain_threshold = to_double(key, v);
  } else if (key == "out") {
    c.out = v;
  } else if (key == "log-level") {
    c.log_level = v;
  }
}

std::string scalar_text(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_array()) {
    std::string s;
    for (const auto& e : j) s += (s.empty() ? "" : ",") + scalar_text(e);
    return s;
  }
  return j.dump();
}

void apply_model(gridcast::ModelConfig& m, const json& j) {
  if (!j.is_object()) throw UsageError("config: 'model' must be an object");
  for (const auto& [k, v] : j.items()) {
    if (k == "cells") m.cells = v.get<int>();
    else if (k == "kernel") m.kernel = v.get<int>();
    else if (k == "filters") m.filters = v.get<int>();
    else if (k == "dense") m.dense = v.get<int>();
    else if (k == "n_x") m.n_x = v.get<int>();
    else if (k == "horizons") m.horizons = v.get<std::vector<int>>();
    else if (k == "height") m.height = v.get<int>();
    else if (k == "width") m.width = v.get<int>();
    else throw UsageError(fmt::format("config: unknown model key '{}'", k));
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(fmt::format("config: model: {}", e.what()));
  }
}

void apply_config_file(RunConfig& c, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError(fmt::format("cannot read config file {}", path.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError(fmt::format("config file {}: {}", path.string(), e.what()));
  }
  if (!j.is_object()) throw UsageError(fmt::format("config file {}: expected an object", path.string()));
  const fs::path base = path.parent_path();
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "model") {
        apply_model(c.model, v);
      } else if (k == "farm-thresholds") {
        for (const auto& [farm, t] : v.items()) c.farm_thresholds[farm] = t.get<double>();
      } else if (std::find(kRunKeys.begin(), kRunKeys.end(), k) != kRunKeys.end()) {
        std::string text = scalar_text(v);
        if (kPathKeys.count(k) && !text.empty() && fs::path(text).is_relative()) text = (base / text).string();
        apply(c, k, text);
      } else {
        throw UsageError(fmt::format("config file {}: unknown key '{}'", path.string(), k));
      }
    }
  } catch (const json::exception& e) {
    throw UsageError(fmt::format("config file {}: {}", path.string(), e.what()));
  }
}

std::vector<std::string> script_farms(const std::vector<farm::Command>& commands) {
  std::set<std::string> farms;
  for (const auto& c : commands) {
    if (!c.farm().empty()) farms.insert(c.farm());
  }
  return {farms.begin(), farms.end()};
}

}  // namespace

std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

void RunConfig::validate() const {
  if (sim_file.empty()) throw UsageError("no simulation file given (--sim-file)");
  if (mode != "sequential" && mode != "parallel") {
    throw UsageError(fmt::format("mode must be 'sequential' or 'parallel', got '{}'", mode));
  }
  if (workers < 1) throw UsageError("workers must be at least 1");
  if (!(retrain_threshold > 0.0)) throw UsageError("retrain threshold must be positive");
  static const std::set<std::string> levels{"trace", "debug", "info", "warn", "warning", "err", "error", "critical", "off"};
  if (!levels.count(log_level)) throw UsageError(fmt::format("unknown log level '{}'", log_level));
}

RunConfig resolve_run_config(const std::map<std::string, std::string>& flags, const EnvLookup& env) {
  RunConfig c;
  std::optional<std::string> config = env("HELIOFARM_CONFIG");
  if (auto it = flags.find("config"); it != flags.end()) config = it->second;
  if (config) apply_config_file(c, *config);
  for (const auto& key : kRunKeys) {
    if (auto v = env(env_name(key))) apply(c, key, *v);
  }
  for (const auto& [key, v] : flags) apply(c, key, v);
  c.validate();
  return c;
}

double RunSummary::values_per_wall_second() const {
  return stats.wall_seconds > 0.0 ? static_cast<double>(readings) / stats.wall_seconds : 0.0;
}

double RunSummary::values_per_simulated_second() const {
  return simulated_seconds > 0.0 ? static_cast<double>(readings) / simulated_seconds : 0.0;
}

FarmLayout find_layout(const std::string& farm, const std::vector<fs::path>& dirs) {
  for (const auto& dir : dirs) {
    const fs::path path = dir / (farm + ".csv");
    if (fs::exists(path)) return load_farm_layout(path.string(), farm);
  }
  std::string looked;
  for (const auto& dir : dirs) looked += (looked.empty() ? "" : ", ") + dir.string();
  throw UsageError(fmt::format("no sensor layout for farm '{}' (looked in {})", farm, looked));
}

RunSummary run_simulation(const RunConfig& config) {
  config.validate();
  if (!fs::exists(config.sim_file)) throw UsageError(fmt::format("simulation file {} not found", config.sim_file.string()));
  const auto commands = farm::parse_simulation_file(read_file(config.sim_file.string()));
  const auto farms = config.farms.empty() ? script_farms(commands) : config.farms;
  farm::validate_script(commands, farms);

  const fs::path sim_dir = fs::absolute(config.sim_file).parent_path();
  const std::vector<fs::path> layout_dirs{config.store / "farms", sim_dir / "farms"};
  std::vector<FarmLayout> layouts;
  for (const auto& f : farms) {
    layouts.push_back(find_layout(f, layout_dirs));
    const fs::path saved = config.store / "farms" / (f + ".csv");
    if (!fs::exists(saved)) {
      fs::create_directories(saved.parent_path());
      save_farm_layout(saved.string(), layouts.back());
    }
  }

  farm::WorldOptions options;
  options.store = config.store;
  options.dataset_dirs = {config.store / "datasets", sim_dir};
  options.cloud.report_root = config.out.empty() ? config.store : config.out;
  options.cloud.retrain_threshold = config.retrain_threshold;
  options.cloud.farm_thresholds = config.farm_thresholds;
  options.cloud.model = config.model;
  options.cloud.seed = config.seed;
  farm::World world(commands, std::move(layouts), std::move(options));

  devs::CoordinatorOptions co;
  co.seed = config.seed;
  co.epoch = Timestamp{day_of(commands.front().at)};
  co.workers = config.mode == "parallel" ? static_cast<std::size_t>(config.workers) : 1;
  devs::Coordinator coord(world, co);
  RunSummary summary;
  summary.stats = coord.simulate_until(devs::kInfinity);
  coord.exit();
  summary.readings = world.readings();
  summary.simulated_seconds = static_cast<double>((commands.back().at - commands.front().at).count());
  summary.trainings = world.cloud().trainings().size();
  summary.reports = world.cloud().reports();
  return summary;
}

namespace {

struct Flags {
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;

  void add(CLI::App& app, const std::string& name, const std::string& help) {
    options.emplace_back(name, app.add_option("--" + name, values[name], help));
  }
  std::map<std::string, std::string> given() const {
    std::map<std::string, std::string> out;
    for (const auto& [name, opt] : options) {
      if (opt->count() > 0) out[name] = values.at(name);
    }
    return out;
  }
};

int cmd_run(const std::map<std::string, std::string>& flags, const EnvLookup& env, std::ostream& out) {
  const RunConfig config = resolve_run_config(flags, env);
  log::configure(config.log_level);
  const RunSummary s = run_simulation(config);
  out << fmt::format("cycles               {}\n", s.stats.cycles);
  out << fmt::format("transitions          {}\n", s.stats.transitions);
  out << fmt::format("messages             {}\n", s.stats.messages);
  out << fmt::format("readings             {}\n", s.readings);
  out << fmt::format("trainings            {}\n", s.trainings);
  out << fmt::format("reports              {}\n", s.reports);
  out << fmt::format("wall seconds         {:.3f}\n", s.stats.wall_seconds);
  out << fmt::format("values/wall second   {:.0f}\n", s.values_per_wall_second());
  out << fmt::format("values/sim second    {:.3f}\n", s.values_per_simulated_second());
  return kExitOk;
}

struct GenDataArgs {
  std::string farm, start = "2010-06-01", name;
  int sensors = 0, days = 1;
  std::uint64_t seed = 7;
  std::string out = ".";
  bool clouds = false;
  double spike_rate = 0.0, gap_rate = 0.0, noise = 0.0;
};

int cmd_gen_data(const GenDataArgs& a, std::ostream& out) {
  farm::FarmSpec spec;
  try {
    spec = farm::preset_spec(a.farm);
    spec.farm = a.farm;
  } catch (const std::invalid_argument&) {
    throw UsageError(fmt::format("no preset for farm '{}' (known: Oahu, Almeria)", a.farm));
  }
  if (a.sensors > 0) spec.sensors = a.sensors;
  if (a.days < 1) throw UsageError("--days must be at least 1");
  const auto first = try_parse_date(a.start);
  if (!first) throw UsageError(fmt::format("--start: '{}' is not a date", a.start));
  farm::SynthOptions o;
  o.clouds = a.clouds;
  o.spike_rate = a.spike_rate;
  o.gap_rate = a.gap_rate;
  o.noise_sigma = a.noise;
  const auto synth = farm::synth_generate(spec, *first, *first + std::chrono::days{a.days - 1}, a.seed, o);
  const fs::path dir = a.out;
  fs::create_directories(dir / "farms");
  const fs::path data = dir / (a.name.empty() ? a.farm + ".csv" : a.name);
  const fs::path layout = dir / "farms" / (a.farm + ".csv");
  save_dataset(data.string(), synth.data);
  save_farm_layout(layout.string(), synth.layout);
  out << fmt::format("dataset {} ({} rows, {} sensors)\nlayout  {}\n", data.string(), synth.data.rows(),
                     synth.layout.sensors.size(), layout.string());
  return kExitOk;
}

int cmd_serve(const std::string& bind, int concurrency, const std::string& persist, std::ostream& out) {
  trainsvc::ServerOptions o;
  o.bind = bind;
  o.concurrency = concurrency;
  if (!persist.empty()) o.persist_dir = persist;
  o.on_job = [](const std::string& id, bool started) {
    log::info(std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now()), "train-server",
              "job {} {}", id, started ? "started" : "finished");
  };
  try {
    trainsvc::parse_endpoint(bind);
  } catch (const std::invalid_argument& e) {
    throw UsageError(fmt::format("--bind: {}", e.what()));
  }
  // Handle SIGINT/SIGTERM on this thread only; the server threads inherit the mask.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  trainsvc::TrainServer server(o);
  const auto port = server.start();
  out << fmt::format("listening on {}:{}\n", trainsvc::parse_endpoint(bind).host, port) << std::flush;
  int sig = 0;
  sigwait(&set, &sig);
  server.stop();
  out << "stopped\n";
  return kExitOk;
}

struct ReportArgs {
  std::string store = "store", farm, farms, from, to, out, table = "estimated", layouts;
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
  const auto from = try_parse_date(a.from);
  const auto to = try_parse_date(a.to);
  if (!from || !to) throw UsageError("--from and --to must be YYYY-MM-DD dates");
  if (*to < *from) throw UsageError("--to precedes --from");
  const fs::path root = a.store;
  if (!fs::exists(root)) throw UsageError(fmt::format("datastore {} not found", root.string()));
  const fs::path data = fs::exists(root / "cloud") ? root / "cloud" : root;
  std::vector<fs::path> dirs;
  if (!a.layouts.empty()) dirs.emplace_back(a.layouts);
  dirs.push_back(root / "farms");

  auto names = split_list(a.farms);
  if (std::find(names.begin(), names.end(), a.farm) == names.end()) names.push_back(a.farm);
  std::sort(names.begin(), names.end());
  Datastore store(data);
  std::vector<reports::FarmReport> all;
  for (const auto& name : names) {
    all.push_back(reports::collect_farm_report(store, find_layout(name, dirs), *from, *to, a.table));
  }
  const fs::path dir = a.out.empty() ? root / "reports" : fs::path(a.out);
  for (const auto& r : all) {
    if (r.summary.farm == a.farm) reports::write_fog_report(r, dir);
  }
  reports::write_cloud_report(all, dir);
  out << fmt::format("fog report   {}\ncloud report {}\n", (dir / a.farm / "fog_report.html").string(),
                     (dir / "cloud_report.html").string());
  return kExitOk;
}

struct FitArgs {
  std::string input, sensor, method = "linear", out;
  double level = 0.99;
  int changepoints = 25, order = 6;
  double period = 1.0;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  if (!fs::exists(a.input)) throw UsageError(fmt::format("{} not found", a.input));
  const Dataset data = load_dataset(a.input);
  if (data.series.empty()) throw UsageError(fmt::format("{} holds no readings", a.input));
  const SensorSeries* series = nullptr;
  if (a.sensor.empty()) {
    if (data.series.size() != 1) throw UsageError("the file holds several sensors; pick one with --sensor");
    series = &data.series.begin()->second;
  } else {
    auto it = data.series.find(a.sensor);
    if (it == data.series.end()) throw UsageError(fmt::format("sensor '{}' not in {}", a.sensor, a.input));
    series = &it->second;
  }
  anomaly::RepairMethod method;
  try {
    method = anomaly::parse_repair_method(a.method);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (!(a.level > 0.0 && a.level < 1.0)) throw UsageError("--level must lie in (0, 1)");
  anomaly::FitConfig config;
  config.level = a.level;
  config.changepoints = a.changepoints;
  config.fourier_order = a.order;
  config.period_days = a.period;
  const auto report = anomaly::run_workflow({series->at, series->ghi}, config, method);
  if (a.out.empty()) {
    anomaly::write_report_csv(out, report);
  } else {
    std::ofstream file(a.out, std::ios::binary);
    if (!file) throw std::runtime_error(fmt::format("cannot write {}", a.out));
    anomaly::write_report_csv(file, report);
  }
  log::info(report.observed.at.empty() ? Timestamp{} : report.observed.at.front(), "fit-outliers",
            "{} points, {} flagged", report.observed.size(), report.flagged.size());
  return kExitOk;
}

}  // namespace

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const EnvLookup& env) {
  CLI::App app{"Solar farm monitoring and forecasting simulator", "heliofarm"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a simulation script");
  Flags run_flags;
  run_flags.add(*run, "sim-file", "Simulation script");
  run_flags.add(*run, "farms", "Comma-separated farm names (default: the farms the script names)");
  run_flags.add(*run, "store", "Datastore root");
  run_flags.add(*run, "seed", "Root random seed");
  run_flags.add(*run, "mode", "sequential or parallel");
  run_flags.add(*run, "workers", "Worker threads in parallel mode");
  run_flags.add(*run, "retrain-threshold", "Farm MAE (W/m2) above which the cloud retrains");
  run_flags.add(*run, "out", "Base directory for relative report paths");
  run_flags.add(*run, "log-level", "trace, debug, info, warn, error or off");
  run_flags.add(*run, "config", "JSON config file");

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset and its sensor layout");
  GenDataArgs gen_args;
  gen->add_option("--farm", gen_args.farm, "Preset farm (Oahu or Almeria)")->required();
  gen->add_option("--sensors", gen_args.sensors, "Sensor count (default: the preset's)");
  gen->add_option("--days", gen_args.days, "Number of days");
  gen->add_option("--start", gen_args.start, "First day");
  gen->add_option("--seed", gen_args.seed, "Seed");
  gen->add_option("--out", gen_args.out, "Output directory");
  gen->add_option("--name", gen_args.name, "Dataset file name (default <farm>.csv)");
  gen->add_flag("--clouds", gen_args.clouds, "Moving cloud shadows");
  gen->add_option("--spike-rate", gen_args.spike_rate, "Per-sample spike probability");
  gen->add_option("--gap-rate", gen_args.gap_rate, "Per-sample missing-value probability");
  gen->add_option("--noise", gen_args.noise, "Gaussian noise std, W/m2");

  auto* serve = app.add_subcommand("serve-train", "Serve training requests over TCP");
  std::string bind = "127.0.0.1:7070", persist, serve_level = "info";
  int concurrency = 2;
  serve->add_option("--bind", bind, "host:port (port 0 picks a free one)");
  serve->add_option("--concurrency", concurrency, "Jobs trained at once")->check(CLI::PositiveNumber);
  serve->add_option("--persist", persist, "Directory for delivered checkpoints");
  serve->add_option("--log-level", serve_level, "Log level");

  auto* report = app.add_subcommand("report", "Render fog and cloud reports from a datastore");
  ReportArgs report_args;
  report->add_option("--store", report_args.store, "Datastore root");
  report->add_option("--farm", report_args.farm, "Farm of the fog report")->required();
  report->add_option("--farms", report_args.farms, "Comma-separated farms in the cloud report");
  report->add_option("--from", report_args.from, "First day")->required();
  report->add_option("--to", report_args.to, "Last day")->required();
  report->add_option("--out", report_args.out, "Output directory (default <store>/reports)");
  report->add_option("--table", report_args.table, "Estimated table holding predictions");
  report->add_option("--layouts", report_args.layouts, "Directory of <farm>.csv sensor layouts");

  auto* fit = app.add_subcommand("fit-outliers", "Detect and repair outliers in one sensor's series");
  FitArgs fit_args;
  fit->add_option("input", fit_args.input, "Dataset CSV (at,sensor,ghi)")->required();
  fit->add_option("--sensor", fit_args.sensor, "Sensor id when the file holds several");
  fit->add_option("--method", fit_args.method, "Repair method");
  fit->add_option("--level", fit_args.level, "Confidence band level");
  fit->add_option("--changepoints", fit_args.changepoints, "Trend changepoints");
  fit->add_option("--fourier-order", fit_args.order, "Seasonality harmonics");
  fit->add_option("--period-days", fit_args.period, "Seasonality period in days");
  fit->add_option("--out", fit_args.out, "Report CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (run->parsed()) return cmd_run(run_flags.given(), env, out);
    if (serve->parsed()) {
      log::configure(serve_level);
      return cmd_serve(bind, concurrency, persist, out);
    }
    log::configure("info");
    if (gen->parsed()) return cmd_gen_data(gen_args, out);
    if (report->parsed()) return cmd_report(report_args, out);
    if (fit->parsed()) return cmd_fit(fit_args, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const farm::ScriptError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace heliofarm::cli
