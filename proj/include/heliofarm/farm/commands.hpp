#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "heliofarm/anomaly/anomaly.hpp"
#include "heliofarm/core/time.hpp"

namespace heliofarm::farm {

enum class CommandKind {
  activate,
  passivate,
  activate_sensors,
  passivate_sensors,
  fix_outliers,
  run_prediction,
  train_model,
  generate_reports,
};

std::string_view to_string(CommandKind kind);

struct Command {
  Timestamp at{};
  CommandKind kind = CommandKind::activate;
  std::vector<std::string> args;
  std::size_t line = 0;

  /// Farm the command is addressed to; empty for ACTIVATE and PASSIVATE.
  const std::string& farm() const;

  friend bool operator==(const Command&, const Command&) = default;
};

std::string describe_payload(const Command& c);

/// Syntax and argument errors; `line` is 1-based within the script (0 when not tied to a line).
class ScriptError : public std::runtime_error {
 public:
  ScriptError(std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Header `DATETIME;COMMAND;ARGUMENTS`, then one `;`-separated command per line.
/// Trailing empty fields are ignored. Commands come back in file order.
std::vector<Command> parse_simulation_file(std::string_view text);

/// Whole-script checks: starts with ACTIVATE, ends with PASSIVATE, and every farm is declared
/// (skipped when `farms` is empty).
void validate_script(std::span<const Command> commands, std::span<const std::string> farms = {});

/// Typed views over the argument lists. Dates take their year from the command time when
/// written as MM-DD.
struct ActivateSensorsArgs {
  std::string farm, dataset;
};
struct PassivateSensorsArgs {
  std::string farm;
};
struct FixOutliersArgs {
  std::string farm, sensor;
  Date start{}, end{};
  anomaly::RepairMethod method = anomaly::RepairMethod::linear;
  double level = 0.99;
};
struct RunPredictionArgs {
  std::string farm;
  Date date{};
  std::vector<int> horizons;
  std::string in_db, out_db;
};
struct TrainModelArgs {
  std::string endpoint, farm;
  Date start{}, end{};
  int epochs = 1;
};
struct GenerateReportsArgs {
  std::string farm;
  Date start{}, end{};
  std::string out_dir;
};

ActivateSensorsArgs activate_sensors_args(const Command& c);
PassivateSensorsArgs passivate_sensors_args(const Command& c);
FixOutliersArgs fix_outliers_args(const Command& c);
RunPredictionArgs run_prediction_args(const Command& c);
TrainModelArgs train_model_args(const Command& c);
GenerateReportsArgs generate_reports_args(const Command& c);

}  // namespace heliofarm::farm
