#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "heliofarm/devs/coordinator.hpp"
#include "heliofarm/gridcast/network.hpp"
#include "heliofarm/store/types.hpp"

namespace heliofarm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Bad flags, config or script; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::filesystem::path sim_file;
  std::vector<std::string> farms;  // empty: the farms the script mentions
  std::filesystem::path store = "store";
  std::uint64_t seed = 42;
  std::string mode = "sequential";  // or "parallel"
  int workers = 1;
  double retrain_threshold = 150.0;
  std::map<std::string, double> farm_thresholds;
  std::filesystem::path out;  // base of relative report directories; empty means `store`
  std::string log_level = "info";
  gridcast::ModelConfig model;

  void validate() const;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
std::optional<std::string> process_env(const std::string& name);

/// Layers defaults, then the JSON config file, then HELIOFARM_* variables, then `flags`
/// (option name without dashes -> value, only for options given on the command line).
RunConfig resolve_run_config(const std::map<std::string, std::string>& flags, const EnvLookup& env = process_env);

struct RunSummary {
  devs::SimulationStats stats;
  std::uint64_t readings = 0;
  double simulated_seconds = 0.0;
  std::size_t trainings = 0;
  std::uint64_t reports = 0;

  double values_per_wall_second() const;
  double values_per_simulated_second() const;
};

/// Layout of `farm` from the first directory holding `<farm>.csv`.
FarmLayout find_layout(const std::string& farm, const std::vector<std::filesystem::path>& dirs);

/// Parses and validates the script (ScriptError, UsageError), builds the world and runs it to
/// the end. Layouts are copied to `<store>/farms/` so later `report` runs find them.
RunSummary run_simulation(const RunConfig& config);

/// The whole command line; returns the process exit code.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const EnvLookup& env = process_env);

}  // namespace heliofarm::cli
