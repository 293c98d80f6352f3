#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "heliofarm/store/types.hpp"

namespace heliofarm::gridcast {

/// Pixel (r, c) has its center at lat_max - (r + 0.5)·Δlat, lon_min + (c + 0.5)·Δlon; row 0 is north.
struct GridSpec {
  int height = 10;
  int width = 10;
  double lat_min = 0.0;
  double lat_max = 1.0;
  double lon_min = 0.0;
  double lon_max = 1.0;

  int pixels() const { return height * width; }
  double dlat() const { return (lat_max - lat_min) / height; }
  double dlon() const { return (lon_max - lon_min) / width; }
  GeoPoint center(int row, int col) const {
    return {lat_max - (row + 0.5) * dlat(), lon_min + (col + 0.5) * dlon()};
  }
  bool contains(const GeoPoint& p) const {
    return p.lat >= lat_min && p.lat <= lat_max && p.lon >= lon_min && p.lon <= lon_max;
  }
  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

class AllMissingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bounding box padded by half a pixel so the extreme sensors sit on pixel centers.
GridSpec fit_grid(std::span<const GeoPoint> locations, int height = 10, int width = 10);

/// Nearest-neighbour mapping between a sensor layout and a grid. Distances are
/// Euclidean after scaling longitude by cos(mean latitude of the grid).
class GridMapper {
 public:
  GridMapper(GridSpec spec, std::vector<GeoPoint> locations);

  const GridSpec& spec() const { return spec_; }
  std::size_t sensors() const { return locations_.size(); }

  /// Each pixel takes the nearest sensor with a value; ties go to the lower sensor index.
  /// Throws AllMissingError when no sensor has a value.
  void to_grid(std::span<const std::optional<double>> values, std::span<double> grid) const;
  std::vector<double> to_grid(std::span<const std::optional<double>> values) const;

  /// Index of the sensor that fills `pixel` given which sensors have values, or -1.
  int owner(int pixel, std::span<const std::optional<double>> values) const;

  /// Each sensor reads the pixel whose center is nearest its location.
  void from_grid(std::span<const double> grid, std::span<double> values) const;
  std::vector<double> from_grid(std::span<const double> grid) const;

  int pixel_of(std::size_t sensor) const { return sensor_pixel_[sensor]; }

  /// Projected squared distance between two points.
  double distance2(const GeoPoint& a, const GeoPoint& b) const;

 private:
  GridSpec spec_;
  std::vector<GeoPoint> locations_;
  double lon_scale_;
  std::vector<int> order_;  // pixels × sensors, nearest first
  std::vector<int> sensor_pixel_;
};

struct Coverage {
  double fraction = 0.0;
  bool pass = false;
};

/// Share of pixels holding at least one sensor; passes at 20 %.
Coverage coverage_check(std::span<const GeoPoint> locations, const GridSpec& spec);

/// Pixel containing `p` (clamped to the grid), as row * width + col.
int pixel_containing(const GridSpec& spec, const GeoPoint& p);

}  // namespace heliofarm::gridcast
