#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "heliofarm/anomaly/anomaly.hpp"
#include "heliofarm/gridcast/grid.hpp"
#include "heliofarm/store/datastore.hpp"

namespace heliofarm::reports {

/// Mean and population standard deviation over non-null values.
struct Stats {
  std::size_t count = 0;
  std::size_t nulls = 0;
  double mean = 0.0;
  double std = 0.0;
};

struct HorizonError {
  int horizon_min = 0;
  std::size_t count = 0;
  double mae = 0.0;
  double mse = 0.0;
  double mape = 0.0;
};

struct SensorSummary {
  std::string sensor;
  Stats measured, repaired, predicted;
  std::vector<HorizonError> errors;  // ascending horizon
};

struct FarmSummary {
  std::string farm;
  Date first{}, last{};
  std::vector<SensorSummary> sensors;  // ascending id
  Stats measured, repaired, predicted;
  std::vector<HorizonError> errors;

  /// MAE over every horizon, or nullopt when no prediction met a measured truth.
  std::optional<double> mae() const;
};

/// Streaming accumulator behind Stats (Welford).
class StatsAccumulator {
 public:
  void add(const std::optional<double>& v);
  Stats result() const;

 private:
  std::size_t count_ = 0, nulls_ = 0;
  double mean_ = 0.0, m2_ = 0.0;
};

/// Predicted rows joined on (sensor, at) with non-null measured truth, grouped by horizon.
/// Keys are sensor ids; "" holds the farm-wide errors.
std::map<std::string, std::vector<HorizonError>> prediction_errors(std::span<const SensorReading> raw,
                                                                   std::span<const EstimatedReading> estimated);

FarmSummary summarize(Datastore& store, const std::string& farm, Date first, Date last,
                      const std::string& table = "estimated");

/// Returns true when a farm-level MAE is above the retrain threshold.
bool exceeds_threshold(const FarmSummary& summary, double threshold);

struct HeatmapData {
  gridcast::GridSpec grid;
  std::vector<double> mean;  // row-major H×W
  std::vector<GeoPoint> locations;
  std::vector<std::string> sensors;
  std::size_t frames = 0;
};

class NoDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mean of the per-timestamp nearest-neighbour frames over the given readings.
HeatmapData heatmap(std::span<const SensorReading> readings, const FarmLayout& layout, const gridcast::GridSpec& grid,
                    bool daylight_only = false);
HeatmapData heatmap(Datastore& store, const FarmLayout& layout, Date first, Date last, const gridcast::GridSpec& grid,
                    bool daylight_only = false);

struct PlotSeries {
  std::string label;  // measured, repaired, or h=<minutes>
  std::vector<Timestamp> at;
  std::vector<double> ghi;
};

struct OutlierSection {
  std::string name;
  std::vector<anomaly::ReportRow> rows;
};

/// Everything one fog report shows.
struct FarmReport {
  FarmSummary summary;
  std::optional<HeatmapData> map;
  std::map<std::string, std::vector<PlotSeries>> plots;  // per sensor
  std::vector<OutlierSection> outliers;
};

/// Outlier reports are read from `<farm dir>/reports/outliers/*.csv`.
FarmReport collect_farm_report(Datastore& store, const FarmLayout& layout, Date first, Date last,
                               const std::string& table = "estimated");

std::string render_fog_html(const FarmReport& report);
std::string render_cloud_html(std::span<const FarmReport> farms);
std::string summary_csv(std::span<const FarmSummary> farms);

/// `<out>/<farm>/fog_report.html` and `<out>/<farm>/summary.csv`.
void write_fog_report(const FarmReport& farm, const std::filesystem::path& out_dir);
/// `<out>/cloud_report.html` and `<out>/summary.csv`.
void write_cloud_report(std::span<const FarmReport> farms, const std::filesystem::path& out_dir);

}  // namespace heliofarm::reports
