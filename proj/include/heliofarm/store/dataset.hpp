#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "heliofarm/core/time.hpp"

namespace heliofarm {

/// Time-ordered samples of one sensor; an empty optional is a missing value.
struct SensorSeries {
  std::vector<Timestamp> at;
  std::vector<std::optional<double>> ghi;

  std::size_t size() const { return at.size(); }
  friend bool operator==(const SensorSeries&, const SensorSeries&) = default;
};

/// Columnar source data: CSV `at,sensor,ghi`, ISO-8601 timestamps, empty ghi = null.
struct Dataset {
  std::map<std::string, SensorSeries, std::less<>> series;

  std::size_t rows() const;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

Dataset parse_dataset(std::string_view csv, std::string_view origin = "dataset");
Dataset load_dataset(const std::string& path);

/// Rows are written ordered by time, then sensor id.
void write_dataset(std::ostream& out, const Dataset& data);
void save_dataset(const std::string& path, const Dataset& data);

}  // namespace heliofarm
