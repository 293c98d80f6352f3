#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "heliofarm/core/time.hpp"

namespace heliofarm {

enum class Quality { measured, repaired, predicted };

std::string_view to_string(Quality q);
Quality parse_quality(std::string_view text);

/// One GHI sample (W/m²). A null value models a sensor dropout.
struct SensorReading {
  std::string farm;
  std::string sensor;
  Timestamp at;
  std::optional<double> ghi;
  Quality quality = Quality::measured;

  friend bool operator==(const SensorReading&, const SensorReading&) = default;
};

/// Row of an estimated table: repaired values carry horizon 0, forecasts their lead time in minutes.
struct EstimatedReading {
  std::string sensor;
  Timestamp at;
  Quality quality = Quality::predicted;
  int horizon_min = 0;
  std::optional<double> ghi;

  friend bool operator==(const EstimatedReading&, const EstimatedReading&) = default;
};

struct SensorConfig {
  std::string id;
  std::string farm;
  double lat = 0.0;
  double lon = 0.0;
  double period = 60.0;  // seconds between readings
  double delay = 0.0;    // emission latency, seconds
  double v_min = 0.0;
  double v_max = 1400.0;
  double precision = 0.0;    // quantization step, 0 disables
  double noise_sigma = 0.0;  // Gaussian noise std

  /// Throws std::invalid_argument when an invariant does not hold.
  void validate() const;
};

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

/// Sensors of one farm, sorted by id.
struct FarmLayout {
  std::string farm;
  std::vector<SensorConfig> sensors;

  std::vector<GeoPoint> locations() const;
  std::vector<std::string> ids() const;
  /// Index of `id` in `sensors`, or -1.
  int index_of(std::string_view id) const;
};

/// CSV with header `id,lat,lon,period,delay,v_min,v_max,precision,noise_sigma`.
FarmLayout load_farm_layout(const std::string& path, const std::string& farm);
void save_farm_layout(const std::string& path, const FarmLayout& layout);

}  // namespace heliofarm
