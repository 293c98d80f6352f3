#include "heliofarm/farm/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

namespace heliofarm::farm {

FarmSpec oahu_spec() { return {"Oahu", 17, 21.3105, 21.3140, -158.0880, -158.0840, 60.0}; }

FarmSpec almeria_spec() { return {"Almeria", 18, 36.8360, 36.8400, -2.4640, -2.4590, 60.0}; }

FarmSpec preset_spec(const std::string& farm) {
  std::string key(farm);
  std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
  if (key == "oahu") return oahu_spec();
  if (key == "almeria") return almeria_spec();
  throw std::invalid_argument(fmt::format("no preset for farm '{}'", farm));
}

double clear_sky(Timestamp at, double amplitude) {
  constexpr double sunrise = 5 * 3600.0, sunset = 20 * 3600.0;
  const double s = static_cast<double>(seconds_of_day(at));
  return amplitude * std::max(0.0, std::sin(std::numbers::pi * (s - sunrise) / (sunset - sunrise)));
}

namespace {

struct Cloud {
  double t0;      // seconds of day when the shadow passes the farm centre
  double width;   // seconds
  double depth;   // fraction of irradiance removed at the core
  double vx, vy;  // drift direction, unit vector in box coordinates
};

}  // namespace

SynthResult synth_generate(const FarmSpec& spec, Date first, Date last, std::uint64_t seed,
                           const SynthOptions& options) {
  if (last < first) throw std::invalid_argument("empty date range");
  if (spec.sensors < 1) throw std::invalid_argument("farm needs at least one sensor");
  if (!(spec.period > 0.0)) throw std::invalid_argument("sample period must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SynthResult out;
  out.layout.farm = spec.farm;
  std::vector<double> u(spec.sensors), v(spec.sensors);  // positions in [0,1]² of the box
  const int width = spec.sensors >= 10 ? 2 : 1;
  for (int i = 0; i < spec.sensors; ++i) {
    SensorConfig s;
    s.id = fmt::format("S{:0{}d}", i + 1, width);
    s.farm = spec.farm;
    u[i] = unit(rng);
    v[i] = unit(rng);
    s.lat = spec.lat_min + v[i] * (spec.lat_max - spec.lat_min);
    s.lon = spec.lon_min + u[i] * (spec.lon_max - spec.lon_min);
    s.period = spec.period;
    out.layout.sensors.push_back(s);
  }

  const auto step = std::chrono::milliseconds{static_cast<long long>(std::llround(spec.period * 1000.0))};
  std::normal_distribution<double> noise(0.0, 1.0);
  for (Date d = first; d <= last; d += std::chrono::days{1}) {
    const double amplitude = 600.0 + 500.0 * unit(rng);
    std::vector<Cloud> clouds;
    if (options.clouds) {
      const int n = 1 + static_cast<int>(unit(rng) * 4.0);
      for (int c = 0; c < n; ++c) {
        const double angle = 2.0 * std::numbers::pi * unit(rng);
        clouds.push_back({6 * 3600.0 + unit(rng) * 13 * 3600.0, 600.0 + unit(rng) * 1800.0, 0.3 + 0.4 * unit(rng),
                          std::cos(angle), std::sin(angle)});
      }
    }
    const auto day_start = std::chrono::time_point_cast<std::chrono::milliseconds>(Timestamp{d});
    for (auto t = day_start; t < day_start + std::chrono::days{1}; t += step) {
      const Timestamp at = std::chrono::floor<std::chrono::seconds>(t);
      const double base = clear_sky(at, amplitude);
      const double sec = static_cast<double>(seconds_of_day(at));
      for (int i = 0; i < spec.sensors; ++i) {
        double g = base;
        if (base > 0.0) {
          double shade = 0.0;
          for (const auto& c : clouds) {
            // Sensors further along the drift direction see the shadow later.
            const double lag = ((u[i] - 0.5) * c.vx + (v[i] - 0.5) * c.vy) * c.width;
            const double z = (sec - c.t0 - lag) / c.width;
            shade += c.depth * std::exp(-0.5 * z * z);
          }
          g *= std::max(0.0, 1.0 - shade);
          if (options.noise_sigma > 0.0) g = std::max(0.0, g + options.noise_sigma * noise(rng));
          if (options.spike_rate > 0.0 && unit(rng) < options.spike_rate) {
            g = std::max(0.0, g + (unit(rng) < 0.5 ? -1.0 : 1.0) * (200.0 + 200.0 * unit(rng)));
          }
        }
        std::optional<double> value = std::round(g * 100.0) / 100.0;
        if (options.gap_rate > 0.0 && unit(rng) < options.gap_rate) value.reset();
        auto& series = out.data.series[out.layout.sensors[i].id];
        series.at.push_back(at);
        series.ghi.push_back(value);
      }
    }
  }
  return out;
}

}  // namespace heliofarm::farm
