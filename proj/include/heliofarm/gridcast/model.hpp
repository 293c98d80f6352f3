#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "heliofarm/gridcast/grid.hpp"
#include "heliofarm/gridcast/network.hpp"
#include "heliofarm/gridcast/standardizer.hpp"

namespace heliofarm::gridcast {

struct ForecastModel {
  ModelConfig config;
  GridSpec grid;
  Standardizer standardizer;
  std::vector<double> params;

  /// Standardized forecast for standardized input frames.
  std::vector<double> forward(std::span<const double> x) const;

  friend bool operator==(const ForecastModel&, const ForecastModel&) = default;
};

/// Fresh model with Glorot-uniform weights; grid height/width are taken from `grid`.
ForecastModel make_model(ModelConfig config, const GridSpec& grid, std::uint64_t seed);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Versioned binary layout, all little-endian:
///   "HFCK" u32 version
///   i32 cells kernel filters dense n_x n_horizons, i32 horizons[]
///   i32 height width, f64 lat_min lat_max lon_min lon_max
///   f64 mu sigma
///   u64 count, f64 params[count]
std::vector<std::uint8_t> encode_checkpoint(const ForecastModel& m);
ForecastModel decode_checkpoint(std::span<const std::uint8_t> bytes);

}  // namespace heliofarm::gridcast
