#include "heliofarm/gridcast/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

namespace heliofarm::gridcast {

namespace {

// Extent used when all sensors share a coordinate (about 100 m).
constexpr double kMinSpan = 1e-3;

}  // namespace

GridSpec fit_grid(std::span<const GeoPoint> locations, int height, int width) {
  if (height < 2 || width < 2) throw std::invalid_argument("grid needs at least 2x2 pixels");
  if (locations.empty()) throw std::invalid_argument("cannot fit a grid without sensor locations");
  auto [lat_lo, lat_hi] = std::minmax_element(locations.begin(), locations.end(),
                                              [](const auto& a, const auto& b) { return a.lat < b.lat; });
  auto [lon_lo, lon_hi] = std::minmax_element(locations.begin(), locations.end(),
                                              [](const auto& a, const auto& b) { return a.lon < b.lon; });
  double lat0 = lat_lo->lat, lat1 = lat_hi->lat, lon0 = lon_lo->lon, lon1 = lon_hi->lon;
  if (lat1 - lat0 < kMinSpan) {
    const double mid = 0.5 * (lat0 + lat1);
    lat0 = mid - kMinSpan / 2;
    lat1 = mid + kMinSpan / 2;
  }
  if (lon1 - lon0 < kMinSpan) {
    const double mid = 0.5 * (lon0 + lon1);
    lon0 = mid - kMinSpan / 2;
    lon1 = mid + kMinSpan / 2;
  }
  const double half_lat = 0.5 * (lat1 - lat0) / (height - 1);
  const double half_lon = 0.5 * (lon1 - lon0) / (width - 1);
  return {height, width, lat0 - half_lat, lat1 + half_lat, lon0 - half_lon, lon1 + half_lon};
}

GridMapper::GridMapper(GridSpec spec, std::vector<GeoPoint> locations)
    : spec_(spec), locations_(std::move(locations)) {
  lon_scale_ = std::cos(0.5 * (spec_.lat_min + spec_.lat_max) * std::numbers::pi / 180.0);
  const int n = static_cast<int>(locations_.size());
  const int pixels = spec_.pixels();
  order_.resize(static_cast<std::size_t>(pixels) * n);
  std::vector<double> d(n);
  for (int p = 0; p < pixels; ++p) {
    const GeoPoint c = spec_.center(p / spec_.width, p % spec_.width);
    for (int s = 0; s < n; ++s) d[s] = distance2(c, locations_[s]);
    auto first = order_.begin() + static_cast<std::ptrdiff_t>(p) * n;
    std::iota(first, first + n, 0);
    std::stable_sort(first, first + n, [&](int a, int b) { return d[a] < d[b]; });
  }
  sensor_pixel_.resize(n);
  for (int s = 0; s < n; ++s) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int p = 0; p < pixels; ++p) {
      const double dp = distance2(spec_.center(p / spec_.width, p % spec_.width), locations_[s]);
      if (dp < best_d) {
        best_d = dp;
        best = p;
      }
    }
    sensor_pixel_[s] = best;
  }
}

double GridMapper::distance2(const GeoPoint& a, const GeoPoint& b) const {
  const double dy = a.lat - b.lat;
  const double dx = (a.lon - b.lon) * lon_scale_;
  return dx * dx + dy * dy;
}

int GridMapper::owner(int pixel, std::span<const std::optional<double>> values) const {
  const std::size_t n = locations_.size();
  const int* row = order_.data() + static_cast<std::size_t>(pixel) * n;
  for (std::size_t k = 0; k < n; ++k) {
    if (values[row[k]]) return row[k];
  }
  return -1;
}

void GridMapper::to_grid(std::span<const std::optional<double>> values, std::span<double> grid) const {
  if (values.size() != locations_.size()) throw std::invalid_argument("to_grid: value count differs from sensor count");
  if (grid.size() != static_cast<std::size_t>(spec_.pixels())) throw std::invalid_argument("to_grid: bad grid size");
  if (std::none_of(values.begin(), values.end(), [](const auto& v) { return v.has_value(); })) {
    throw AllMissingError("to_grid: every sensor reading is missing");
  }
  for (int p = 0; p < spec_.pixels(); ++p) grid[p] = *values[owner(p, values)];
}

std::vector<double> GridMapper::to_grid(std::span<const std::optional<double>> values) const {
  std::vector<double> grid(spec_.pixels());
  to_grid(values, grid);
  return grid;
}

void GridMapper::from_grid(std::span<const double> grid, std::span<double> values) const {
  for (std::size_t s = 0; s < locations_.size(); ++s) values[s] = grid[sensor_pixel_[s]];
}

std::vector<double> GridMapper::from_grid(std::span<const double> grid) const {
  std::vector<double> values(locations_.size());
  from_grid(grid, values);
  return values;
}

int pixel_containing(const GridSpec& spec, const GeoPoint& p) {
  const int row = std::clamp(static_cast<int>(std::floor((spec.lat_max - p.lat) / spec.dlat())), 0, spec.height - 1);
  const int col = std::clamp(static_cast<int>(std::floor((p.lon - spec.lon_min) / spec.dlon())), 0, spec.width - 1);
  return row * spec.width + col;
}

Coverage coverage_check(std::span<const GeoPoint> locations, const GridSpec& spec) {
  std::set<int> occupied;
  for (const auto& p : locations) {
    if (spec.contains(p)) occupied.insert(pixel_containing(spec, p));
  }
  Coverage c;
  c.fraction = static_cast<double>(occupied.size()) / spec.pixels();
  c.pass = c.fraction >= 0.20 - 1e-12;
  return c;
}

}  // namespace heliofarm::gridcast
