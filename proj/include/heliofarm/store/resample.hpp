#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "heliofarm/store/types.hpp"

namespace heliofarm {

/// Farm readings on a one-minute lattice: value(m, s) for minute m after `start`, sensor s of `sensors`.
struct MinuteMatrix {
  Timestamp start{};
  int minutes = 0;
  std::vector<std::string> sensors;
  std::vector<std::optional<double>> values;

  std::optional<double>& at(int minute, std::size_t sensor) { return values[minute * sensors.size() + sensor]; }
  const std::optional<double>& at(int minute, std::size_t sensor) const {
    return values[minute * sensors.size() + sensor];
  }
  Timestamp time_of(int minute) const { return start + std::chrono::minutes{minute}; }
};

/// Buckets readings into minutes [start, start + minutes) by mean of the non-null values.
/// A bucket with no value inherits the last reading of a sensor sampled slower than once
/// a minute while that reading is younger than the sensor period; otherwise it stays null.
/// Readings of sensors not in the layout are ignored.
MinuteMatrix resample_minutes(std::span<const SensorReading> readings, const FarmLayout& layout, Timestamp start,
                              int minutes);

/// Overwrites cells with the given repaired values (same lattice rules, last value wins).
void overlay_minutes(MinuteMatrix& m, std::span<const EstimatedReading> rows);

}  // namespace heliofarm
