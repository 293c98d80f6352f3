#include "heliofarm/store/types.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "heliofarm/core/text.hpp"

namespace heliofarm {

std::string_view to_string(Quality q) {
  switch (q) {
    case Quality::measured: return "measured";
    case Quality::repaired: return "repaired";
    case Quality::predicted: return "predicted";
  }
  return "?";
}

Quality parse_quality(std::string_view text) {
  if (text == "measured") return Quality::measured;
  if (text == "repaired") return Quality::repaired;
  if (text == "predicted") return Quality::predicted;
  throw std::invalid_argument(fmt::format("unknown quality '{}'", text));
}

void SensorConfig::validate() const {
  if (!(v_min < v_max)) throw std::invalid_argument(fmt::format("sensor '{}': v_min must be < v_max", id));
  if (!(period > 0.0)) throw std::invalid_argument(fmt::format("sensor '{}': period must be > 0", id));
  if (!(precision >= 0.0)) throw std::invalid_argument(fmt::format("sensor '{}': precision must be >= 0", id));
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument(fmt::format("sensor '{}': noise_sigma must be >= 0", id));
  if (!(delay >= 0.0)) throw std::invalid_argument(fmt::format("sensor '{}': delay must be >= 0", id));
}

std::vector<GeoPoint> FarmLayout::locations() const {
  std::vector<GeoPoint> out;
  out.reserve(sensors.size());
  for (const auto& s : sensors) out.push_back({s.lat, s.lon});
  return out;
}

std::vector<std::string> FarmLayout::ids() const {
  std::vector<std::string> out;
  for (const auto& s : sensors) out.push_back(s.id);
  return out;
}

int FarmLayout::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    if (sensors[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

static constexpr std::string_view kLayoutHeader = "id,lat,lon,period,delay,v_min,v_max,precision,noise_sigma";

FarmLayout load_farm_layout(const std::string& path, const std::string& farm) {
  const std::string text = read_file(path);
  LineReader lines(text);
  std::string_view line;
  if (!lines.next(line) || trim(line) != kLayoutHeader) {
    throw std::runtime_error(fmt::format("{}: expected header '{}'", path, kLayoutHeader));
  }
  FarmLayout layout{farm, {}};
  while (lines.next(line)) {
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 9) throw std::runtime_error(fmt::format("{}:{}: expected 9 fields", path, lines.line_number()));
    SensorConfig s;
    s.id = std::string(trim(f[0]));
    s.farm = farm;
    double* targets[] = {&s.lat, &s.lon, &s.period, &s.delay, &s.v_min, &s.v_max, &s.precision, &s.noise_sigma};
    for (std::size_t k = 0; k < 8; ++k) {
      auto v = parse_double(f[k + 1]);
      if (!v) throw std::runtime_error(fmt::format("{}:{}: bad number '{}'", path, lines.line_number(), f[k + 1]));
      *targets[k] = *v;
    }
    s.validate();
    layout.sensors.push_back(std::move(s));
  }
  std::sort(layout.sensors.begin(), layout.sensors.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < layout.sensors.size(); ++i) {
    if (layout.sensors[i].id == layout.sensors[i - 1].id) {
      throw std::runtime_error(fmt::format("{}: duplicate sensor id '{}'", path, layout.sensors[i].id));
    }
  }
  return layout;
}

void save_farm_layout(const std::string& path, const FarmLayout& layout) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << kLayoutHeader << '\n';
  for (const auto& s : layout.sensors) {
    out << fmt::format("{},{:.6f},{:.6f},{},{},{},{},{},{}\n", s.id, s.lat, s.lon, s.period, s.delay, s.v_min, s.v_max,
                       s.precision, s.noise_sigma);
  }
}

}  // namespace heliofarm
