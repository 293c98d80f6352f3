#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "heliofarm/gridcast/model.hpp"
#include "heliofarm/store/resample.hpp"

namespace heliofarm::gridcast {

struct Forecast {
  std::string sensor;
  Timestamp issued;  // last input minute
  Timestamp at;      // target minute
  int horizon_min = 0;
  std::optional<double> ghi;  // null when the target falls at night
};

/// Target minutes of a forecast whose last input minute is `last_input`.
std::vector<Timestamp> forecast_targets(Timestamp last_input, std::span<const int> horizons);

/// Forecasts issued after each minute index in [first, last] of `m` (sensors of `m` located at
/// `locations`). Each needs n_x minutes of history inside `m`; targets outside daylight are null.
std::vector<Forecast> predict_range(const ForecastModel& model, const MinuteMatrix& m,
                                    std::span<const GeoPoint> locations, int first, int last);

/// Forecasts issued after the final minute of `recent`.
std::vector<Forecast> predict(const ForecastModel& model, const MinuteMatrix& recent,
                              std::span<const GeoPoint> locations);

struct Metrics {
  double mae = 0.0;
  double mse = 0.0;
  double mape = 0.0;
  std::size_t count = 0;
};

class UndefinedMetricsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Computed over pairs where both values exist; MAPE divides by max(|truth|, 1 W/m²).
Metrics metrics(std::span<const std::optional<double>> pred, std::span<const std::optional<double>> truth);

}  // namespace heliofarm::gridcast
