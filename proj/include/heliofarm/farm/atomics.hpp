#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "heliofarm/devs/model.hpp"
#include "heliofarm/farm/commands.hpp"
#include "heliofarm/farm/messages.hpp"
#include "heliofarm/gridcast/network.hpp"
#include "heliofarm/store/datastore.hpp"
#include "heliofarm/trainsvc/service.hpp"

namespace heliofarm::farm {

/// Replays a parsed script: every command goes out on `out` at its own virtual instant.
class SimulationFile : public devs::Atomic {
 public:
  SimulationFile(std::string name, std::vector<Command> commands);

  devs::OutPort<Command> out{*this, "out"};

  void initialize() override;
  void lambda() override;
  void delta_int() override;
  void delta_ext(devs::SimTime elapsed) override;

  std::size_t emitted() const { return next_; }

 private:
  std::size_t batch_end() const;
  void schedule();

  std::vector<Command> commands_;
  std::size_t next_ = 0;
};

/// Rounds to the nearest multiple of `precision`, ties to even; 0 leaves `v` unchanged.
double quantize(double v, double precision);

/// quantize(clamp(raw + N(0, noise_sigma), v_min, v_max), precision), kept inside the bounds.
std::optional<double> sensor_value(const SensorConfig& config, std::optional<double> raw, std::mt19937_64& rng);

class Sensor : public devs::Atomic {
 public:
  explicit Sensor(SensorConfig config);

  devs::InPort<SensorControl> in_ctl{*this, "in_ctl"};
  devs::OutPort<SensorReading> out{*this, "out"};
  devs::OutPort<SensorFault> fault{*this, "fault"};

  void lambda() override;
  void delta_int() override;
  void delta_ext(devs::SimTime elapsed) override;

  const SensorConfig& config() const { return config_; }
  std::uint64_t emitted() const { return emitted_; }

 private:
  devs::SimTime emit_time(std::size_t k) const;
  void start(const SensorControl& ctl);

  SensorConfig config_;
  std::shared_ptr<const Dataset> data_;
  const SensorSeries* series_ = nullptr;
  std::size_t cursor_ = 0;
  std::optional<Timestamp> last_sent_;
  std::string fault_;
  std::uint64_t emitted_ = 0;
};

struct FogOptions {
  std::filesystem::path store;  // fog datastore root
  /// Searched in order for dataset ids that are not absolute paths.
  std::vector<std::filesystem::path> dataset_dirs;
};

/// Per-farm server: stores readings, sends daily packets to the cloud, and runs the
/// outlier and inference services on snapshots of its own datastore.
class Fog : public devs::Atomic {
 public:
  Fog(FarmLayout layout, FogOptions options);

  devs::InPort<Command> in_cmd{*this, "in_cmd"};
  devs::InPort<SensorReading> in_reading{*this, "in_reading"};
  devs::InPort<SensorFault> in_fault{*this, "in_fault"};
  devs::InPort<OutlierResult> in_outlier{*this, "in_outlier"};
  devs::InPort<PredictionResult> in_prediction{*this, "in_prediction"};
  devs::InPort<ModelUpdate> in_model{*this, "in_model"};

  devs::OutPort<SensorControl> out_ctl{*this, "out_ctl"};
  devs::OutPort<DailyPacket> out_packet{*this, "out_packet"};
  devs::OutPort<EstimatedPacket> out_estimated{*this, "out_estimated"};
  devs::OutPort<OutlierJob> out_outlier_job{*this, "out_outlier_job"};
  devs::OutPort<PredictionJob> out_prediction_job{*this, "out_prediction_job"};
  devs::OutPort<ErrorReport> out_error{*this, "out_error"};

  void initialize() override;
  devs::SimTime ta() const override;
  void lambda() override;
  void delta_int() override;
  void delta_ext(devs::SimTime elapsed) override;
  void exit() override;

  const FarmLayout& layout() const { return layout_; }
  std::uint64_t readings() const { return readings_; }
  std::uint64_t packets() const { return packets_; }
  std::uint64_t faults() const { return faults_; }
  bool has_model() const { return model_ != nullptr; }

 private:
  void on_command(const Command& c);
  void on_outlier(const OutlierResult& r);
  void on_prediction(const PredictionResult& r);
  std::shared_ptr<const Dataset> resolve_dataset(const std::string& id);
  bool flush_due() const;

  FarmLayout layout_;
  FogOptions options_;
  std::unique_ptr<Datastore> store_;
  std::map<std::string, std::shared_ptr<const Dataset>> datasets_;
  std::shared_ptr<const gridcast::ForecastModel> model_;

  std::vector<SensorReading> buffer_;
  devs::SimTime flush_at_ = devs::kInfinity;

  std::vector<SensorControl> pending_ctl_;
  std::vector<EstimatedPacket> pending_estimated_;
  std::vector<OutlierJob> pending_outlier_;
  std::vector<PredictionJob> pending_prediction_;
  std::vector<ErrorReport> pending_error_;

  std::uint64_t readings_ = 0, packets_ = 0, faults_ = 0;
};

/// Outlier detection and repair on the series the fog attaches to each job.
class OutlierService : public devs::Atomic {
 public:
  using devs::Atomic::Atomic;

  devs::InPort<OutlierJob> in_job{*this, "in_job"};
  devs::OutPort<OutlierResult> out_result{*this, "out_result"};

  void lambda() override;
  void delta_int() override;
  void delta_ext(devs::SimTime elapsed) override;

  std::uint64_t jobs() const { return jobs_; }

 private:
  std::vector<OutlierResult> done_;
  std::uint64_t jobs_ = 0;
};

/// Multi-horizon forecasts for every minute of the requested day.
class InferenceService : public devs::Atomic {
 public:
  using devs::Atomic::Atomic;

  devs::InPort<PredictionJob> in_job{*this, "in_job"};
  devs::OutPort<PredictionResult> out_result{*this, "out_result"};

  void lambda() override;
  void delta_int() override;
  void delta_ext(devs::SimTime elapsed) override;

  std::uint64_t jobs() const { return jobs_; }

 private:
  std::vector<PredictionResult> done_;
  std::uint64_t jobs_ = 0;
};

PredictionResult run_prediction(const PredictionJob& job);

struct CloudOptions {
  std::filesystem::path store;        // cloud datastore root
  std::filesystem::path report_root;  // base of relative report directories
  double retrain_threshold = 150.0;   // W/m², farm-level MAE
  std::map<std::string, double> farm_thresholds;
  gridcast::ModelConfig model;
  std::uint64_t seed = 42;
  int train_workers = 1;
  int attempts = 3;  // remote attempts before falling back to local training
  std::chrono::milliseconds backoff{200};
  trainsvc::ClientOptions client;
};

/// One training run the cloud performed, for stats and tests.
struct TrainingRecord {
  std::string farm, id, endpoint;
  Date start{}, end{};
  bool self_triggered = false;
  bool fell_back = false;
  bool ok = false;
  std::vector<gridcast::EpochMetrics> metrics;
};

class Cloud : public devs::Atomic {
 public:
  Cloud(std::string name, std::vector<FarmLayout> layouts, CloudOptions options);

  devs::InPort<Command> in_cmd{*this, "in_cmd"};
  devs::InPort<DailyPacket> in_packet{*this, "in_packet"};
  devs::InPort<EstimatedPacket> in_estimated{*this, "in_estimated"};
  devs::InPort<ErrorReport> in_error{*this, "in_error"};
  devs::OutPort<ModelUpdate> out_model{*this, "out_model"};

  void initialize() override;
  void lambda() override;
  void delta_int() override;
  void delta_ext(devs::SimTime elapsed) override;
  void exit() override;

  const std::vector<TrainingRecord>& trainings() const { return trainings_; }
  std::uint64_t packets() const { return packets_; }
  std::uint64_t raw_rows() const { return raw_rows_; }
  std::uint64_t reports() const { return reports_; }
  double threshold(const std::string& farm) const;

 private:
  struct TrainJob {
    std::string endpoint, farm;
    Date start{}, end{};
    int epochs = 1;
    bool self_triggered = false;
  };
  void train(const TrainJob& job);
  void generate_reports(const GenerateReportsArgs& args);
  const FarmLayout* layout(const std::string& farm) const;

  std::vector<FarmLayout> layouts_;
  CloudOptions options_;
  std::unique_ptr<Datastore> store_;
  std::map<std::string, TrainJob> last_job_;
  std::vector<ModelUpdate> pending_;
  std::vector<TrainingRecord> trainings_;
  std::uint64_t packets_ = 0, raw_rows_ = 0, reports_ = 0;
};

}  // namespace heliofarm::farm
