#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "heliofarm/core/log.hpp"
#include "heliofarm/farm/atomics.hpp"

namespace heliofarm::farm {

SimulationFile::SimulationFile(std::string name, std::vector<Command> commands)
    : devs::Atomic(std::move(name)), commands_(std::move(commands)) {
  std::stable_sort(commands_.begin(), commands_.end(), [](const Command& a, const Command& b) { return a.at < b.at; });
}

void SimulationFile::initialize() {
  next_ = 0;
  schedule();
}

std::size_t SimulationFile::batch_end() const {
  std::size_t end = next_;
  while (end < commands_.size() && commands_[end].at == commands_[next_].at) ++end;
  return end;
}

void SimulationFile::schedule() {
  if (next_ >= commands_.size()) {
    passivate();
    return;
  }
  hold_in("waiting", std::max(0.0, to_sim(commands_[next_].at) - now()));
}

void SimulationFile::lambda() {
  for (std::size_t i = next_, end = batch_end(); i < end; ++i) {
    log::info(commands_[i].at, "simfile", "{}", describe_payload(commands_[i]));
    out.add(commands_[i]);
  }
}

void SimulationFile::delta_int() {
  next_ = batch_end();
  schedule();
}

void SimulationFile::delta_ext(devs::SimTime elapsed) { resume(elapsed); }

double quantize(double v, double precision) {
  if (precision <= 0.0) return v;
  // nearbyint follows the default rounding mode: to nearest, ties to even.
  return std::nearbyint(v / precision) * precision;
}

std::optional<double> sensor_value(const SensorConfig& config, std::optional<double> raw, std::mt19937_64& rng) {
  if (!raw) return std::nullopt;
  double v = *raw;
  if (config.noise_sigma > 0.0) v += std::normal_distribution<double>(0.0, config.noise_sigma)(rng);
  v = quantize(std::clamp(v, config.v_min, config.v_max), config.precision);
  return std::clamp(v, config.v_min, config.v_max);
}

Sensor::Sensor(SensorConfig config) : devs::Atomic(config.id), config_(std::move(config)) {}

devs::SimTime Sensor::emit_time(std::size_t k) const { return to_sim(series_->at[k]) + config_.delay; }

void Sensor::start(const SensorControl& ctl) {
  data_ = ctl.data;
  series_ = nullptr;
  if (data_) {
    auto it = data_->series.find(config_.id);
    if (it != data_->series.end()) series_ = &it->second;
  }
  if (series_ == nullptr) {
    fault_ = data_ ? fmt::format("dataset '{}' has no series for this sensor", ctl.dataset)
                   : fmt::format("unknown dataset '{}'", ctl.dataset);
    hold_in("fault", 0.0);
    return;
  }
  // First sample at or after the activation instant that has not been sent yet.
  const Timestamp now_at = calendar_now();
  auto it = std::lower_bound(series_->at.begin(), series_->at.end(), now_at);
  if (last_sent_) it = std::max(it, std::upper_bound(series_->at.begin(), series_->at.end(), *last_sent_));
  cursor_ = it - series_->at.begin();
  if (cursor_ == series_->size()) {
    fault_ = "exhausted";
    hold_in("exhausted", 0.0);
    return;
  }
  hold_in("active", emit_time(cursor_) - now());
}

void Sensor::lambda() {
  if (phase() == "active") {
    out.add(SensorReading{config_.farm, config_.id, series_->at[cursor_],
                          sensor_value(config_, series_->ghi[cursor_], rng()), Quality::measured});
  } else if (phase() == "fault" || phase() == "exhausted") {
    fault.add(SensorFault{config_.id, fault_});
  }
}

void Sensor::delta_int() {
  if (phase() == "active") {
    ++emitted_;
    last_sent_ = series_->at[cursor_];
    if (++cursor_ < series_->size()) {
      hold_in("active", emit_time(cursor_) - now());
    } else {
      fault_ = "exhausted";
      hold_in("exhausted", 0.0);
    }
    return;
  }
  series_ = nullptr;
  data_.reset();
  passivate();
}

void Sensor::delta_ext(devs::SimTime elapsed) {
  if (in_ctl.empty()) {
    resume(elapsed);
    return;
  }
  // The last control in the bag wins.
  const SensorControl& ctl = in_ctl[in_ctl.size() - 1];
  if (ctl.active) {
    start(ctl);
  } else {
    series_ = nullptr;
    data_.reset();
    passivate();
  }
}

}  // namespace heliofarm::farm
