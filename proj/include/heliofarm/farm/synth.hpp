#pragma once

#include <cstdint>
#include <string>

#include "heliofarm/store/dataset.hpp"
#include "heliofarm/store/types.hpp"

namespace heliofarm::farm {

struct FarmSpec {
  std::string farm;
  int sensors = 17;
  double lat_min = 0.0;
  double lat_max = 0.0;
  double lon_min = 0.0;
  double lon_max = 0.0;
  double period = 60.0;  // seconds between samples
};

/// Kalaeloa (Oahu) style array: 17 sensors over about 400 m.
FarmSpec oahu_spec();
/// Almería style array: 18 sensors.
FarmSpec almeria_spec();
/// Looks up a preset by case-insensitive farm name; throws std::invalid_argument otherwise.
FarmSpec preset_spec(const std::string& farm);

struct SynthOptions {
  bool clouds = false;       // moving cloud shadows
  double spike_rate = 0.0;   // per-sample probability of a ±200..400 W/m² spike
  double gap_rate = 0.0;     // per-sample probability of a missing value
  double noise_sigma = 0.0;  // Gaussian noise added to every daylight sample
};

/// A_d · max(0, sin(π (t − 05:00) / 15 h)).
double clear_sky(Timestamp at, double amplitude);

struct SynthResult {
  FarmLayout layout;
  Dataset data;
};

/// Whole days [first, last], samples every spec.period seconds from midnight. Sensor positions,
/// per-day amplitudes (uniform in [600, 1100]) and perturbations all derive from `seed`.
SynthResult synth_generate(const FarmSpec& spec, Date first, Date last, std::uint64_t seed,
                           const SynthOptions& options = {});

}  // namespace heliofarm::farm
