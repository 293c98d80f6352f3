#include "heliofarm/farm/commands.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include <fmt/format.h>

#include "heliofarm/core/text.hpp"
#include "heliofarm/trainsvc/service.hpp"

namespace heliofarm::farm {

namespace {

struct Schema {
  CommandKind kind;
  std::string_view name;
  std::string_view args;  // for diagnostics
  std::size_t arity;
};

constexpr Schema kSchemas[] = {
    {CommandKind::activate, "ACTIVATE", "", 0},
    {CommandKind::passivate, "PASSIVATE", "", 0},
    {CommandKind::activate_sensors, "CMD_ACTIVATE_SENSORS", "farm;dataset_id", 2},
    {CommandKind::passivate_sensors, "CMD_PASSIVATE_SENSORS", "farm", 1},
    {CommandKind::fix_outliers, "CMD_FIX_OUTLIERS", "farm;sensor;start_date;end_date;method;band_level", 6},
    {CommandKind::run_prediction, "CMD_RUN_PREDICTION", "farm;date;horizons;in_db;out_db", 5},
    {CommandKind::train_model, "CMD_TRAIN_MODEL", "endpoint;farm;start_date;end_date;epochs", 5},
    {CommandKind::generate_reports, "CMD_GENERATE_REPORTS", "farm;start_date;end_date;out_dir", 4},
};

const Schema& schema_of(CommandKind kind) {
  for (const auto& s : kSchemas) {
    if (s.kind == kind) return s;
  }
  throw std::logic_error("unknown command kind");
}

const std::string kNoFarm;

Date date_arg(const Command& c, std::size_t i, std::string_view what) {
  try {
    return resolve_date(c.args[i], c.at);
  } catch (const std::exception&) {
    throw std::invalid_argument(fmt::format("{} '{}' is not a date (YYYY-MM-DD or MM-DD)", what, c.args[i]));
  }
}

void check_range(Date start, Date end) {
  if (end < start) {
    throw std::invalid_argument(fmt::format("end date {} precedes start date {}", format_date(end), format_date(start)));
  }
}

bool is_table_name(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-';
  });
}

void require_nonempty(const Command& c, std::size_t i, std::string_view what) {
  if (c.args[i].empty()) throw std::invalid_argument(fmt::format("{} is empty", what));
}

// Runs the typed view so bad values surface at parse time.
void check_arguments(const Command& c) {
  switch (c.kind) {
    case CommandKind::activate:
    case CommandKind::passivate: break;
    case CommandKind::activate_sensors: activate_sensors_args(c); break;
    case CommandKind::passivate_sensors: passivate_sensors_args(c); break;
    case CommandKind::fix_outliers: fix_outliers_args(c); break;
    case CommandKind::run_prediction: run_prediction_args(c); break;
    case CommandKind::train_model: train_model_args(c); break;
    case CommandKind::generate_reports: generate_reports_args(c); break;
  }
}

}  // namespace

std::string_view to_string(CommandKind kind) { return schema_of(kind).name; }

const std::string& Command::farm() const {
  switch (kind) {
    case CommandKind::activate:
    case CommandKind::passivate: return kNoFarm;
    case CommandKind::train_model: return args[1];
    default: return args[0];
  }
}

std::string describe_payload(const Command& c) {
  std::string out = fmt::format("{} {}", format_datetime(c.at), to_string(c.kind));
  for (const auto& a : c.args) out += ";" + a;
  return out;
}

ScriptError::ScriptError(std::size_t line, const std::string& message)
    : std::runtime_error(line ? fmt::format("line {}: {}", line, message) : message), line_(line) {}

std::vector<Command> parse_simulation_file(std::string_view text) {
  LineReader lines(text);
  std::string_view line;
  if (!lines.next(line) || trim(line) != "DATETIME;COMMAND;ARGUMENTS") {
    throw ScriptError(1, "expected header 'DATETIME;COMMAND;ARGUMENTS'");
  }
  std::vector<Command> out;
  std::map<std::string, Timestamp, std::less<>> last_at;
  while (lines.next(line)) {
    const std::size_t n = lines.line_number();
    if (trim(line).empty()) continue;
    auto fields = split(line, ';');
    while (!fields.empty() && trim(fields.back()).empty()) fields.pop_back();
    if (fields.size() < 2) throw ScriptError(n, "expected DATETIME;COMMAND[;ARGUMENTS]");

    Command c;
    c.line = n;
    const auto at = try_parse_datetime(trim(fields[0]));
    if (!at) throw ScriptError(n, fmt::format("bad datetime '{}'", trim(fields[0])));
    c.at = *at;
    const auto name = trim(fields[1]);
    const auto* schema = std::find_if(std::begin(kSchemas), std::end(kSchemas),
                                      [&](const Schema& s) { return s.name == name; });
    if (schema == std::end(kSchemas)) throw ScriptError(n, fmt::format("unknown command '{}'", name));
    c.kind = schema->kind;
    for (std::size_t i = 2; i < fields.size(); ++i) c.args.emplace_back(trim(fields[i]));
    if (c.args.size() != schema->arity) {
      throw ScriptError(n, fmt::format("{} expects {} argument(s) ({}), got {}", schema->name, schema->arity,
                                       schema->arity ? schema->args : "none", c.args.size()));
    }
    try {
      check_arguments(c);
    } catch (const std::exception& e) {
      throw ScriptError(n, fmt::format("{}: {}", schema->name, e.what()));
    }

    auto [it, fresh] = last_at.try_emplace(c.farm(), c.at);
    if (!fresh) {
      if (c.at < it->second) {
        throw ScriptError(n, fmt::format("timestamp {} goes back in time for {}", format_datetime(c.at),
                                         c.farm().empty() ? std::string("global commands") : "farm " + c.farm()));
      }
      it->second = c.at;
    }
    out.push_back(std::move(c));
  }
  return out;
}

void validate_script(std::span<const Command> commands, std::span<const std::string> farms) {
  if (commands.empty()) throw ScriptError(0, "script has no commands");
  if (commands.front().kind != CommandKind::activate) {
    throw ScriptError(commands.front().line, "script must begin with ACTIVATE");
  }
  if (commands.back().kind != CommandKind::passivate) throw ScriptError(commands.back().line, "script must end with PASSIVATE");
  for (const auto& c : commands) {
    if (c.at < commands.front().at) throw ScriptError(c.line, "command precedes ACTIVATE");
    if (c.at > commands.back().at) throw ScriptError(c.line, "command follows PASSIVATE");
    if (&c != &commands.front() && c.kind == CommandKind::activate) throw ScriptError(c.line, "ACTIVATE may only appear first");
    if (&c != &commands.back() && c.kind == CommandKind::passivate) throw ScriptError(c.line, "PASSIVATE may only appear last");
    if (!farms.empty() && !c.farm().empty() && std::find(farms.begin(), farms.end(), c.farm()) == farms.end()) {
      throw ScriptError(c.line, fmt::format("farm '{}' is not declared", c.farm()));
    }
  }
}

ActivateSensorsArgs activate_sensors_args(const Command& c) {
  require_nonempty(c, 0, "farm");
  require_nonempty(c, 1, "dataset id");
  return {c.args[0], c.args[1]};
}

PassivateSensorsArgs passivate_sensors_args(const Command& c) {
  require_nonempty(c, 0, "farm");
  return {c.args[0]};
}

FixOutliersArgs fix_outliers_args(const Command& c) {
  FixOutliersArgs a;
  require_nonempty(c, 0, "farm");
  require_nonempty(c, 1, "sensor");
  a.farm = c.args[0];
  a.sensor = c.args[1];
  a.start = date_arg(c, 2, "start date");
  a.end = date_arg(c, 3, "end date");
  check_range(a.start, a.end);
  a.method = anomaly::parse_repair_method(c.args[4]);
  const auto level = parse_double(c.args[5]);
  if (!level || !(*level > 0.0 && *level < 1.0)) {
    throw std::invalid_argument(fmt::format("band level '{}' must lie in (0, 1)", c.args[5]));
  }
  a.level = *level;
  return a;
}

RunPredictionArgs run_prediction_args(const Command& c) {
  RunPredictionArgs a;
  require_nonempty(c, 0, "farm");
  a.farm = c.args[0];
  a.date = date_arg(c, 1, "date");
  for (auto h : split(c.args[2], ',')) {
    const auto v = parse_int(trim(h));
    if (!v || *v <= 0) throw std::invalid_argument(fmt::format("horizon '{}' must be a positive integer", trim(h)));
    a.horizons.push_back(static_cast<int>(*v));
  }
  std::sort(a.horizons.begin(), a.horizons.end());
  if (std::adjacent_find(a.horizons.begin(), a.horizons.end()) != a.horizons.end()) {
    throw std::invalid_argument("horizons repeat");
  }
  a.in_db = c.args[3];
  a.out_db = c.args[4];
  if (!is_table_name(a.in_db)) throw std::invalid_argument(fmt::format("bad input table '{}'", a.in_db));
  if (!is_table_name(a.out_db) || a.out_db == "raw") {
    throw std::invalid_argument(fmt::format("bad output table '{}' (the raw table is measured data only)", a.out_db));
  }
  return a;
}

TrainModelArgs train_model_args(const Command& c) {
  TrainModelArgs a;
  a.endpoint = c.args[0];
  if (a.endpoint != "local") trainsvc::parse_endpoint(a.endpoint);
  require_nonempty(c, 1, "farm");
  a.farm = c.args[1];
  a.start = date_arg(c, 2, "start date");
  a.end = date_arg(c, 3, "end date");
  check_range(a.start, a.end);
  const auto epochs = parse_int(c.args[4]);
  if (!epochs || *epochs < 1) throw std::invalid_argument(fmt::format("epochs '{}' must be >= 1", c.args[4]));
  a.epochs = static_cast<int>(*epochs);
  return a;
}

GenerateReportsArgs generate_reports_args(const Command& c) {
  GenerateReportsArgs a;
  require_nonempty(c, 0, "farm");
  a.farm = c.args[0];
  a.start = date_arg(c, 1, "start date");
  a.end = date_arg(c, 2, "end date");
  check_range(a.start, a.end);
  require_nonempty(c, 3, "output directory");
  a.out_dir = c.args[3];
  return a;
}

}  // namespace heliofarm::farm
