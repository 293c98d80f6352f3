#include "heliofarm/store/resample.hpp"

#include <algorithm>

namespace heliofarm {

MinuteMatrix resample_minutes(std::span<const SensorReading> readings, const FarmLayout& layout, Timestamp start,
                              int minutes) {
  const std::size_t n = layout.sensors.size();
  MinuteMatrix m{start, minutes, layout.ids(), {}};
  m.values.assign(static_cast<std::size_t>(minutes) * n, std::nullopt);
  std::vector<double> sum(m.values.size(), 0.0);
  std::vector<int> count(m.values.size(), 0);
  // Latest non-null reading per sensor before each bucket, for slow sensors.
  struct Last {
    Timestamp at;
    double ghi;
  };
  std::vector<std::vector<Last>> history(n);

  const Timestamp end = start + std::chrono::minutes{minutes};
  for (const auto& r : readings) {
    const int s = layout.index_of(r.sensor);
    if (s < 0 || !r.ghi) continue;
    history[s].push_back({r.at, *r.ghi});
    if (r.at < start || r.at >= end) continue;
    const auto idx = static_cast<std::size_t>((r.at - start).count() / 60) * n + s;
    sum[idx] += *r.ghi;
    ++count[idx];
  }
  for (std::size_t s = 0; s < n; ++s) {
    auto& h = history[s];
    std::stable_sort(h.begin(), h.end(), [](const Last& a, const Last& b) { return a.at < b.at; });
    const double period = layout.sensors[s].period;
    std::size_t cursor = 0;
    for (int k = 0; k < minutes; ++k) {
      const auto idx = static_cast<std::size_t>(k) * n + s;
      if (count[idx] > 0) {
        m.values[idx] = sum[idx] / count[idx];
        continue;
      }
      if (period <= 60.0) continue;
      const Timestamp t = m.time_of(k);
      while (cursor < h.size() && h[cursor].at <= t) ++cursor;
      if (cursor == 0) continue;
      const Last& last = h[cursor - 1];
      if (static_cast<double>((t - last.at).count()) < period) m.values[idx] = last.ghi;
    }
  }
  return m;
}

void overlay_minutes(MinuteMatrix& m, std::span<const EstimatedReading> rows) {
  const Timestamp end = m.start + std::chrono::minutes{m.minutes};
  for (const auto& r : rows) {
    if (r.at < m.start || r.at >= end || !r.ghi) continue;
    const auto it = std::find(m.sensors.begin(), m.sensors.end(), r.sensor);
    if (it == m.sensors.end()) continue;
    const int k = static_cast<int>((r.at - m.start).count() / 60);
    m.at(k, static_cast<std::size_t>(it - m.sensors.begin())) = r.ghi;
  }
}

}  // namespace heliofarm
