#include "heliofarm/gridcast/predict.hpp"

#include <cmath>

#include <fmt/format.h>

#include "heliofarm/gridcast/train.hpp"

namespace heliofarm::gridcast {

std::vector<Timestamp> forecast_targets(Timestamp last_input, std::span<const int> horizons) {
  std::vector<Timestamp> out;
  for (int h : horizons) out.push_back(last_input + std::chrono::minutes{h});
  return out;
}

std::vector<Forecast> predict_range(const ForecastModel& model, const MinuteMatrix& m,
                                    std::span<const GeoPoint> locations, int first, int last) {
  const auto& c = model.config;
  if (first - c.n_x + 1 < 0) {
    throw InsufficientDataError(fmt::format("forecast needs {} minutes of history, only {} available", c.n_x, first + 1));
  }
  if (last >= m.minutes || first > last) throw std::invalid_argument("forecast range outside the minute matrix");
  if (locations.size() != m.sensors.size()) throw std::invalid_argument("one location per sensor is required");

  const GridMapper mapper(model.grid, {locations.begin(), locations.end()});
  // Only the frames the requested windows touch.
  MinuteMatrix slice{m.time_of(first - c.n_x + 1), last - first + c.n_x, m.sensors, {}};
  const std::size_t n = m.sensors.size();
  slice.values.assign(m.values.begin() + static_cast<std::ptrdiff_t>((first - c.n_x + 1) * n),
                      m.values.begin() + static_cast<std::ptrdiff_t>((last + 1) * n));
  const auto frames = grid_frames(slice, mapper, model.standardizer);

  const Network net(c);
  Workspace ws;
  const std::size_t P = c.pixels();
  std::vector<double> y(c.output_size()), values(n);
  std::vector<Forecast> out;
  for (int t = first; t <= last; ++t) {
    const int k = t - first;  // window start inside the slice
    net.forward(model.params, std::span<const double>(frames.data() + k * P, c.n_x * P), y, ws);
    const Timestamp issued = m.time_of(t);
    for (int h = 0; h < c.n_y(); ++h) {
      const Timestamp target = issued + std::chrono::minutes{c.horizons[h]};
      const bool day = is_daylight(target);
      mapper.from_grid(std::span<const double>(y.data() + h * P, P), values);
      for (std::size_t s = 0; s < n; ++s) {
        std::optional<double> v;
        if (day) v = model.standardizer.destandardize(values[s]);
        out.push_back({m.sensors[s], issued, target, c.horizons[h], v});
      }
    }
  }
  return out;
}

std::vector<Forecast> predict(const ForecastModel& model, const MinuteMatrix& recent,
                              std::span<const GeoPoint> locations) {
  if (recent.minutes < model.config.n_x) {
    throw InsufficientDataError(fmt::format("forecast needs {} minutes of history, buffer holds {}",
                                            model.config.n_x, recent.minutes));
  }
  return predict_range(model, recent, locations, recent.minutes - 1, recent.minutes - 1);
}

Metrics metrics(std::span<const std::optional<double>> pred, std::span<const std::optional<double>> truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("prediction and truth lengths differ");
  Metrics m;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!pred[i] || !truth[i]) continue;
    const double e = *pred[i] - *truth[i];
    m.mae += std::abs(e);
    m.mse += e * e;
    m.mape += std::abs(e) / std::max(std::abs(*truth[i]), 1.0);
    ++m.count;
  }
  if (m.count == 0) throw UndefinedMetricsError("no overlapping non-null values");
  m.mae /= static_cast<double>(m.count);
  m.mse /= static_cast<double>(m.count);
  m.mape /= static_cast<double>(m.count);
  return m;
}

}  // namespace heliofarm::gridcast
