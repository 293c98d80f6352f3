#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "heliofarm/anomaly/anomaly.hpp"
#include "heliofarm/gridcast/model.hpp"
#include "heliofarm/store/dataset.hpp"
#include "heliofarm/store/resample.hpp"
#include "heliofarm/store/types.hpp"

namespace heliofarm {
std::string describe_payload(const SensorReading& r);
}

// Payloads exchanged between the farm-model atomics.
namespace heliofarm::farm {

/// Fog -> sensors. `data` is null when the dataset id could not be resolved.
struct SensorControl {
  bool active = false;
  std::string dataset;
  std::shared_ptr<const Dataset> data;
};

struct SensorFault {
  std::string sensor;
  std::string reason;
};

/// One virtual day of readings, fog -> cloud.
struct DailyPacket {
  std::string farm;
  Date day{};
  std::vector<SensorReading> readings;
};

/// Repaired or predicted rows on their way to the cloud. An outlier run also carries its
/// report as CSV text.
struct EstimatedPacket {
  std::string farm;
  std::string table = "estimated";
  std::vector<EstimatedReading> rows;
  std::string report_name;
  std::string report_csv;
};

struct OutlierJob {
  std::string farm, sensor;
  Date start{}, end{};
  anomaly::RepairMethod method = anomaly::RepairMethod::linear;
  double level = 0.99;
  anomaly::TimeSeries series;
};

struct OutlierResult {
  OutlierJob job;
  std::optional<anomaly::OutlierReport> report;
  std::string error;
};

struct PredictionJob {
  std::string farm;
  Date date{};
  std::vector<int> horizons;
  std::string out_db;
  std::shared_ptr<const gridcast::ForecastModel> model;
  MinuteMatrix input;  // n_x minutes of history before midnight, then the day
  std::vector<GeoPoint> locations;
};

struct PredictionResult {
  std::string farm;
  Date date{};
  std::string out_db;
  std::vector<EstimatedReading> rows;
  std::string error;
};

/// Farm-level forecast error of one prediction run, fog -> cloud.
struct ErrorReport {
  std::string farm;
  Date date{};
  std::optional<double> mae;
  std::size_t count = 0;
};

/// Trained model deployed from the cloud to a farm.
struct ModelUpdate {
  std::string farm;
  std::string id;
  std::shared_ptr<const gridcast::ForecastModel> model;
  std::vector<std::uint8_t> checkpoint;
};

std::string describe_payload(const SensorControl& c);
std::string describe_payload(const SensorFault& f);
std::string describe_payload(const DailyPacket& p);
std::string describe_payload(const EstimatedPacket& p);
std::string describe_payload(const ErrorReport& r);
std::string describe_payload(const ModelUpdate& m);

}  // namespace heliofarm::farm
