#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "heliofarm/gridcast/predict.hpp"
#include "heliofarm/gridcast/train.hpp"
#include "heliofarm/reports/reports.hpp"

namespace heliofarm::reports {

void StatsAccumulator::add(const std::optional<double>& v) {
  if (!v) {
    ++nulls_;
    return;
  }
  ++count_;
  const double d = *v - mean_;
  mean_ += d / static_cast<double>(count_);
  m2_ += d * (*v - mean_);
}

Stats StatsAccumulator::result() const {
  Stats s{count_, nulls_, 0.0, 0.0};
  if (count_ > 0) {
    s.mean = mean_;
    s.std = std::sqrt(std::max(0.0, m2_ / static_cast<double>(count_)));
  }
  return s;
}

std::optional<double> FarmSummary::mae() const {
  std::size_t n = 0;
  double sum = 0.0;
  for (const auto& e : errors) {
    n += e.count;
    sum += e.mae * static_cast<double>(e.count);
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

bool exceeds_threshold(const FarmSummary& summary, double threshold) {
  const auto mae = summary.mae();
  return mae && *mae > threshold;
}

std::map<std::string, std::vector<HorizonError>> prediction_errors(std::span<const SensorReading> raw,
                                                                   std::span<const EstimatedReading> estimated) {
  std::map<std::pair<std::string_view, Timestamp>, double> truth;
  for (const auto& r : raw) {
    if (r.ghi) truth[{r.sensor, r.at}] = *r.ghi;
  }
  struct Pairs {
    std::vector<std::optional<double>> pred, truth;
  };
  // sensor -> horizon -> pairs; "" collects the whole farm
  std::map<std::string, std::map<int, Pairs>> groups;
  for (const auto& e : estimated) {
    if (e.quality != Quality::predicted || !e.ghi) continue;
    auto it = truth.find({e.sensor, e.at});
    if (it == truth.end()) continue;
    for (const std::string& key : {e.sensor, std::string()}) {
      auto& p = groups[key][e.horizon_min];
      p.pred.push_back(e.ghi);
      p.truth.push_back(it->second);
    }
  }
  std::map<std::string, std::vector<HorizonError>> out;
  for (const auto& [key, by_horizon] : groups) {
    auto& list = out[key];
    for (const auto& [h, p] : by_horizon) {
      const auto m = gridcast::metrics(p.pred, p.truth);
      list.push_back({h, m.count, m.mae, m.mse, m.mape});
    }
  }
  return out;
}

FarmSummary summarize(Datastore& store, const std::string& farm, Date first, Date last, const std::string& table) {
  const auto raw = store.read_raw(farm, first, last);
  const auto estimated = store.read_estimated(farm, first, last, table);

  FarmSummary summary;
  summary.farm = farm;
  summary.first = first;
  summary.last = last;

  std::set<std::string> ids;
  for (const auto& r : raw) ids.insert(r.sensor);
  for (const auto& e : estimated) ids.insert(e.sensor);

  struct Acc {
    StatsAccumulator measured, repaired, predicted;
  };
  std::map<std::string, Acc> per_sensor;
  Acc farm_acc;
  for (const auto& r : raw) {
    per_sensor[r.sensor].measured.add(r.ghi);
    farm_acc.measured.add(r.ghi);
  }
  for (const auto& e : estimated) {
    auto& acc = per_sensor[e.sensor];
    if (e.quality == Quality::repaired) {
      acc.repaired.add(e.ghi);
      farm_acc.repaired.add(e.ghi);
    } else if (e.quality == Quality::predicted) {
      acc.predicted.add(e.ghi);
      farm_acc.predicted.add(e.ghi);
    }
  }

  auto errors = prediction_errors(raw, estimated);
  for (const auto& id : ids) {
    const Acc& acc = per_sensor[id];
    SensorSummary s{id, acc.measured.result(), acc.repaired.result(), acc.predicted.result(), {}};
    if (auto it = errors.find(id); it != errors.end()) s.errors = it->second;
    summary.sensors.push_back(std::move(s));
  }
  summary.measured = farm_acc.measured.result();
  summary.repaired = farm_acc.repaired.result();
  summary.predicted = farm_acc.predicted.result();
  if (auto it = errors.find(""); it != errors.end()) summary.errors = it->second;
  return summary;
}

HeatmapData heatmap(std::span<const SensorReading> readings, const FarmLayout& layout, const gridcast::GridSpec& grid,
                    bool daylight_only) {
  HeatmapData out;
  out.grid = grid;
  out.locations = layout.locations();
  out.sensors = layout.ids();
  const gridcast::GridMapper mapper(grid, out.locations);

  std::map<Timestamp, std::vector<std::optional<double>>> frames;
  for (const auto& r : readings) {
    if (!r.ghi) continue;
    if (daylight_only && !gridcast::is_daylight(r.at)) continue;
    const int s = layout.index_of(r.sensor);
    if (s < 0) continue;
    auto& values = frames[r.at];
    if (values.empty()) values.resize(layout.sensors.size());
    values[s] = r.ghi;
  }
  if (frames.empty()) throw NoDataError(fmt::format("no readings for a heatmap of farm '{}'", layout.farm));

  std::vector<double> sum(grid.pixels(), 0.0);
  std::vector<double> frame(grid.pixels());
  for (const auto& [at, values] : frames) {
    mapper.to_grid(values, frame);
    for (int p = 0; p < grid.pixels(); ++p) sum[p] += frame[p];
  }
  out.frames = frames.size();
  out.mean.resize(grid.pixels());
  for (int p = 0; p < grid.pixels(); ++p) out.mean[p] = sum[p] / static_cast<double>(out.frames);
  return out;
}

HeatmapData heatmap(Datastore& store, const FarmLayout& layout, Date first, Date last, const gridcast::GridSpec& grid,
                    bool daylight_only) {
  return heatmap(store.read_raw(layout.farm, first, last), layout, grid, daylight_only);
}

}  // namespace heliofarm::reports
