#include <algorithm>

#include <fmt/format.h>

#include "heliofarm/farm/atomics.hpp"
#include "heliofarm/gridcast/predict.hpp"

namespace heliofarm::farm {

void OutlierService::lambda() {
  for (auto& r : done_) out_result.add(std::move(r));
}

void OutlierService::delta_int() {
  done_.clear();
  passivate();
}

void OutlierService::delta_ext(devs::SimTime) {
  for (const auto& job : in_job) {
    ++jobs_;
    OutlierResult result{*job, std::nullopt, {}};
    anomaly::FitConfig config;
    config.level = job->level;
    try {
      result.report = anomaly::run_workflow(job->series, config, job->method);
    } catch (const std::exception& e) {
      result.error = e.what();
    }
    done_.push_back(std::move(result));
  }
  hold_in("busy", 0.0);
}

PredictionResult run_prediction(const PredictionJob& job) {
  PredictionResult result{job.farm, job.date, job.out_db, {}, {}};
  const int n_x = job.model->config.n_x;
  const auto forecasts = gridcast::predict_range(*job.model, job.input, job.locations, n_x - 1, job.input.minutes - 1);
  for (const auto& f : forecasts) {
    if (!f.ghi || day_of(f.at) != job.date) continue;
    if (std::find(job.horizons.begin(), job.horizons.end(), f.horizon_min) == job.horizons.end()) continue;
    result.rows.push_back({f.sensor, f.at, Quality::predicted, f.horizon_min, f.ghi});
  }
  return result;
}

void InferenceService::lambda() {
  for (auto& r : done_) out_result.add(std::move(r));
}

void InferenceService::delta_int() {
  done_.clear();
  passivate();
}

void InferenceService::delta_ext(devs::SimTime) {
  for (const auto& job : in_job) {
    ++jobs_;
    try {
      done_.push_back(run_prediction(*job));
    } catch (const std::exception& e) {
      done_.push_back({job->farm, job->date, job->out_db, {}, e.what()});
    }
  }
  hold_in("busy", 0.0);
}

}  // namespace heliofarm::farm
