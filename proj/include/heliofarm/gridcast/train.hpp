#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "heliofarm/gridcast/model.hpp"
#include "heliofarm/store/resample.hpp"

namespace heliofarm::gridcast {

/// Daylight runs 05:00..20:00 inclusive: 901 one-minute frames per day.
inline constexpr int kDaylightFirstMinute = 5 * 60;
inline constexpr int kDaylightLastMinute = 20 * 60;
inline constexpr int kDaylightFrames = kDaylightLastMinute - kDaylightFirstMinute + 1;

bool is_daylight(Timestamp at);

enum class Windowing {
  daylight,    // windows never leave one day's 05:00..20:00 span
  continuous,  // consecutive days are chained through the night (zero irradiance)
};

class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input/target pairs. x: count × n_x × H × W, y: count × n_y × H × W, both standardized.
struct SampleSet {
  int n_x = 0;
  int n_y = 0;
  int pixels = 0;
  std::size_t count = 0;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<Timestamp> anchor;  // time of the last input frame

  std::span<const double> x_of(std::size_t i) const {
    return {x.data() + i * n_x * pixels, static_cast<std::size_t>(n_x * pixels)};
  }
  std::span<const double> y_of(std::size_t i) const {
    return {y.data() + i * n_y * pixels, static_cast<std::size_t>(n_y * pixels)};
  }
};

/// Standardized grid per minute of `m`. Night minutes hold 0 W/m²; a minute with no
/// reading at all repeats the previous frame (0 W/m² when there is none).
std::vector<double> grid_frames(const MinuteMatrix& m, const GridMapper& mapper, const Standardizer& s);

/// Last-input indices t of a run of `frames` frames with a full history and every horizon in range.
std::vector<int> window_anchors(int frames, const ModelConfig& config);

struct FrameRun {
  std::vector<Timestamp> at;
  std::vector<double> frames;  // at.size() × pixels
};

SampleSet build_samples(std::span<const FrameRun> runs, const ModelConfig& config);

struct TrainingData {
  Standardizer standardizer;
  SampleSet samples;
};

/// `days` are whole UTC days (1440 minutes from midnight) of one farm. The standardizer is fitted on
/// the non-null daylight readings unless one is supplied.
TrainingData prepare_training(std::span<const MinuteMatrix> days, std::span<const GeoPoint> locations,
                              const GridSpec& grid, const ModelConfig& config, Windowing windowing,
                              std::optional<Standardizer> standardizer = std::nullopt);

struct EpochMetrics {
  int epoch = 0;
  double mae = 0.0;  // standardized
  double mse = 0.0;

  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainOptions {
  int epochs = 1;
  std::uint64_t seed = 42;
  int batch = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int workers = 1;
  std::function<void(const EpochMetrics&)> on_epoch;
  /// Polled between minibatches; returning true aborts with TrainingAborted.
  std::function<bool()> cancelled;
};

/// Adam over shuffled minibatches. The result does not depend on `workers`.
std::vector<EpochMetrics> train(ForecastModel& model, const SampleSet& samples, const TrainOptions& options);

}  // namespace heliofarm::gridcast
