#include "heliofarm/farm/world.hpp"

#include <algorithm>

namespace heliofarm::farm {

FarmModel::FarmModel(const FarmLayout& layout, FogOptions options) : devs::Coupled(layout.farm) {
  fog_ = &add<Fog>(layout, std::move(options));
  outliers_ = &add<OutlierService>("outliers");
  inference_ = &add<InferenceService>("inference");

  couple(in_cmd, fog_->in_cmd);
  couple(in_model, fog_->in_model);
  couple(fog_->out_packet, out_packet);
  couple(fog_->out_estimated, out_estimated);
  couple(fog_->out_error, out_error);

  couple(fog_->out_outlier_job, outliers_->in_job);
  couple(outliers_->out_result, fog_->in_outlier);
  couple(fog_->out_prediction_job, inference_->in_job);
  couple(inference_->out_result, fog_->in_prediction);

  for (auto config : layout.sensors) {
    config.farm = layout.farm;
    auto& s = add<Sensor>(std::move(config));
    couple(fog_->out_ctl, s.in_ctl);
    couple(s.out, fog_->in_reading);
    couple(s.fault, fog_->in_fault);
    sensors_.push_back(&s);
  }
}

World::World(std::vector<Command> commands, std::vector<FarmLayout> layouts, WorldOptions options)
    : devs::Coupled("heliofarm") {
  std::sort(layouts.begin(), layouts.end(), [](const auto& a, const auto& b) { return a.farm < b.farm; });
  script_ = &add<SimulationFile>("simfile", std::move(commands));

  CloudOptions cloud = std::move(options.cloud);
  cloud.store = options.store / "cloud";
  if (cloud.report_root.empty()) cloud.report_root = options.store;
  cloud_ = &add<Cloud>("cloud", layouts, std::move(cloud));
  couple(script_->out, cloud_->in_cmd);

  for (const auto& layout : layouts) {
    auto& f = add<FarmModel>(layout, FogOptions{options.store / "fog", options.dataset_dirs});
    couple(script_->out, f.in_cmd);
    couple(cloud_->out_model, f.in_model);
    couple(f.out_packet, cloud_->in_packet);
    couple(f.out_estimated, cloud_->in_estimated);
    couple(f.out_error, cloud_->in_error);
    farms_.push_back(&f);
  }
}

std::uint64_t World::readings() const {
  std::uint64_t n = 0;
  for (const auto* f : farms_) n += f->fog().readings();
  return n;
}

}  // namespace heliofarm::farm
