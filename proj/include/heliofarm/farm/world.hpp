#pragma once

#include <filesystem>
#include <vector>

#include "heliofarm/farm/atomics.hpp"

namespace heliofarm::farm {

/// One solar farm: its sensors, the fog server and the two fog services.
class FarmModel : public devs::Coupled {
 public:
  FarmModel(const FarmLayout& layout, FogOptions options);

  devs::InPort<Command> in_cmd{*this, "in_cmd"};
  devs::InPort<ModelUpdate> in_model{*this, "in_model"};
  devs::OutPort<DailyPacket> out_packet{*this, "out_packet"};
  devs::OutPort<EstimatedPacket> out_estimated{*this, "out_estimated"};
  devs::OutPort<ErrorReport> out_error{*this, "out_error"};

  Fog& fog() { return *fog_; }
  const Fog& fog() const { return *fog_; }
  const std::vector<Sensor*>& sensors() const { return sensors_; }
  const OutlierService& outlier_service() const { return *outliers_; }
  const InferenceService& inference_service() const { return *inference_; }

 private:
  Fog* fog_;
  OutlierService* outliers_;
  InferenceService* inference_;
  std::vector<Sensor*> sensors_;
};

struct WorldOptions {
  std::filesystem::path store;  // fog data under store/fog, cloud data under store/cloud
  std::vector<std::filesystem::path> dataset_dirs;
  CloudOptions cloud;  // store is filled in by World; report_root defaults to `store`
};

/// Simulation file, one FarmModel per layout, and the cloud.
class World : public devs::Coupled {
 public:
  World(std::vector<Command> commands, std::vector<FarmLayout> layouts, WorldOptions options);

  SimulationFile& script() { return *script_; }
  Cloud& cloud() { return *cloud_; }
  const Cloud& cloud() const { return *cloud_; }
  const std::vector<FarmModel*>& farms() const { return farms_; }

  /// Readings received by all fogs.
  std::uint64_t readings() const;

 private:
  SimulationFile* script_;
  Cloud* cloud_;
  std::vector<FarmModel*> farms_;
};

}  // namespace heliofarm::farm
