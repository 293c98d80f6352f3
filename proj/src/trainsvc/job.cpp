#include <chrono>

#include <fmt/format.h>

#include "heliofarm/trainsvc/service.hpp"

namespace heliofarm::trainsvc {

std::vector<MinuteMatrix> load_training_days(Datastore& store, const FarmLayout& layout, Date start, Date end) {
  if (end < start) throw std::invalid_argument("training interval is empty");
  // One day of look-back lets slow sensors carry their last reading over midnight.
  const auto raw = store.read_raw(layout.farm, start - std::chrono::days{1}, end);
  const auto repaired = store.read_estimated(layout.farm, start, end);
  std::vector<EstimatedReading> fixes;
  for (const auto& r : repaired) {
    if (r.quality == Quality::repaired) fixes.push_back(r);
  }
  std::vector<MinuteMatrix> days;
  for (Date d = start; d <= end; d += std::chrono::days{1}) {
    auto m = resample_minutes(raw, layout, Timestamp{d}, 24 * 60);
    overlay_minutes(m, fixes);
    days.push_back(std::move(m));
  }
  return days;
}

std::vector<DayData> to_day_data(std::span<const MinuteMatrix> days) {
  std::vector<DayData> out;
  for (const auto& m : days) {
    DayData d{day_of(m.start), {}};
    d.values.resize(m.sensors.size());
    for (std::size_t s = 0; s < m.sensors.size(); ++s) {
      for (int k = 0; k < m.minutes; ++k) d.values[s].push_back(m.at(k, s));
    }
    out.push_back(std::move(d));
  }
  return out;
}

namespace {

FarmLayout layout_of(const TrainRequest& r) {
  FarmLayout layout{r.farm, {}};
  for (const auto& s : r.sensors) {
    SensorConfig c;
    c.id = s.id;
    c.farm = r.farm;
    c.lat = s.lat;
    c.lon = s.lon;
    c.period = s.period;
    layout.sensors.push_back(c);
  }
  return layout;
}

std::vector<MinuteMatrix> days_of(const TrainRequest& r, const FarmLayout& layout) {
  if (r.store_root) {
    Datastore store(*r.store_root);
    return load_training_days(store, layout, r.start, r.end);
  }
  std::vector<MinuteMatrix> days;
  for (const auto& d : r.days) {
    if (d.day < r.start || d.day > r.end) continue;
    if (d.values.size() != r.sensors.size()) {
      throw std::invalid_argument(fmt::format("day {} carries {} sensor rows, request lists {} sensors",
                                              format_date(d.day), d.values.size(), r.sensors.size()));
    }
    MinuteMatrix m{Timestamp{d.day}, 24 * 60, layout.ids(), {}};
    m.values.resize(static_cast<std::size_t>(m.minutes) * m.sensors.size());
    for (std::size_t s = 0; s < d.values.size(); ++s) {
      if (d.values[s].size() != static_cast<std::size_t>(m.minutes)) {
        throw std::invalid_argument(fmt::format("day {} sensor {} must have {} minute values", format_date(d.day),
                                                r.sensors[s].id, m.minutes));
      }
      for (int k = 0; k < m.minutes; ++k) m.at(k, s) = d.values[s][k];
    }
    days.push_back(std::move(m));
  }
  return days;
}

}  // namespace

TrainResult train_from_request(const TrainRequest& request, const ProgressFn& progress,
                               const std::function<bool()>& cancelled) {
  const auto t0 = std::chrono::steady_clock::now();
  if (request.epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (request.end < request.start) throw std::invalid_argument("training interval is empty");
  if (request.sensors.empty()) throw std::invalid_argument("request lists no sensors");

  FarmLayout layout = layout_of(request);
  const auto days = days_of(request, layout);
  if (days.empty()) throw gridcast::InsufficientDataError("no training days inside the requested interval");
  const auto locations = layout.locations();

  gridcast::ForecastModel model;
  if (!request.base_checkpoint.empty()) {
    model = gridcast::decode_checkpoint(request.base_checkpoint);
  } else {
    const auto grid = request.grid ? *request.grid
                                   : gridcast::fit_grid(locations, request.model.height, request.model.width);
    model = gridcast::make_model(request.model, grid, request.seed);
  }
  const auto data = gridcast::prepare_training(days, locations, model.grid, model.config, request.windowing);
  model.standardizer = data.standardizer;

  gridcast::TrainOptions options;
  options.epochs = request.epochs;
  options.seed = request.seed;
  options.workers = request.workers;
  options.cancelled = cancelled;
  if (progress) options.on_epoch = [&](const gridcast::EpochMetrics& m) { progress({request.id, m}); };

  TrainResult result;
  result.id = request.id;
  result.metrics = gridcast::train(model, data.samples, options);
  result.checkpoint = gridcast::encode_checkpoint(model);
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace heliofarm::trainsvc
