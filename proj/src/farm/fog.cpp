#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "heliofarm/core/log.hpp"
#include "heliofarm/farm/atomics.hpp"
#include "heliofarm/reports/reports.hpp"

namespace heliofarm::farm {

namespace fs = std::filesystem;

Fog::Fog(FarmLayout layout, FogOptions options)
    : devs::Atomic("fog"), layout_(std::move(layout)), options_(std::move(options)) {}

void Fog::initialize() {
  store_ = std::make_unique<Datastore>(options_.store);
  passivate();
}

bool Fog::flush_due() const { return !buffer_.empty() && now() >= flush_at_; }

devs::SimTime Fog::ta() const {
  if (!pending_ctl_.empty() || !pending_estimated_.empty() || !pending_outlier_.empty() ||
      !pending_prediction_.empty() || !pending_error_.empty()) {
    return 0.0;
  }
  if (buffer_.empty()) return devs::kInfinity;
  return std::max(0.0, flush_at_ - now());
}

void Fog::lambda() {
  for (auto& c : pending_ctl_) out_ctl.add(c);
  for (auto& p : pending_estimated_) out_estimated.add(std::move(p));
  for (auto& j : pending_outlier_) out_outlier_job.add(std::move(j));
  for (auto& j : pending_prediction_) out_prediction_job.add(std::move(j));
  for (auto& e : pending_error_) out_error.add(e);
  if (flush_due()) {
    out_packet.add(DailyPacket{layout_.farm, day_of(buffer_.front().at), buffer_});
  }
}

void Fog::delta_int() {
  pending_ctl_.clear();
  pending_estimated_.clear();
  pending_outlier_.clear();
  pending_prediction_.clear();
  pending_error_.clear();
  if (flush_due()) {
    log::info(calendar_now(), layout_.farm + ".fog", "daily packet of {} readings sent", buffer_.size());
    buffer_.clear();
    flush_at_ = devs::kInfinity;
    ++packets_;
  }
}

void Fog::delta_ext(devs::SimTime) {
  for (const auto& m : in_model) {
    if (m->farm != layout_.farm) continue;
    model_ = m->model;
    store_->write_checkpoint(layout_.farm, m->id, m->checkpoint);
    log::info(calendar_now(), layout_.farm + ".fog", "model {} deployed", m->id);
  }
  if (!in_reading.empty()) {
    if (buffer_.empty()) flush_at_ = to_sim(Timestamp{day_of(calendar_now()) + std::chrono::days{1}});
    for (const auto& r : in_reading) {
      store_->append_raw(*r);
      buffer_.push_back(*r);
    }
    readings_ += in_reading.size();
  }
  for (const auto& f : in_fault) {
    ++faults_;
    if (f->reason == "exhausted") {
      log::info(calendar_now(), layout_.farm + ".fog", "sensor {} fault: {}", f->sensor, f->reason);
    } else {
      log::warn(calendar_now(), layout_.farm + ".fog", "sensor {} fault: {}", f->sensor, f->reason);
    }
  }
  for (const auto& r : in_outlier) on_outlier(*r);
  for (const auto& r : in_prediction) on_prediction(*r);
  for (const auto& c : in_cmd) on_command(*c);
}

void Fog::exit() {
  if (store_) store_->flush();
}

std::shared_ptr<const Dataset> Fog::resolve_dataset(const std::string& id) {
  if (auto it = datasets_.find(id); it != datasets_.end()) return it->second;
  std::vector<fs::path> candidates;
  if (fs::path(id).is_absolute()) {
    candidates.emplace_back(id);
  } else {
    for (const auto& dir : options_.dataset_dirs) candidates.push_back(dir / id);
  }
  std::shared_ptr<const Dataset> data;
  for (const auto& path : candidates) {
    if (!fs::exists(path)) continue;
    try {
      data = std::make_shared<const Dataset>(load_dataset(path.string()));
      log::info(calendar_now(), layout_.farm + ".fog", "dataset {} loaded from {} ({} rows)", id, path.string(),
                data->rows());
    } catch (const std::exception& e) {
      log::warn(calendar_now(), layout_.farm + ".fog", "dataset {} unreadable: {}", id, e.what());
    }
    break;
  }
  if (!data && candidates.empty()) log::warn(calendar_now(), layout_.farm + ".fog", "no dataset directories");
  if (!data) log::warn(calendar_now(), layout_.farm + ".fog", "dataset {} not found", id);
  datasets_[id] = data;
  return data;
}

void Fog::on_command(const Command& c) {
  if (!c.farm().empty() && c.farm() != layout_.farm) return;
  const std::string who = layout_.farm + ".fog";
  switch (c.kind) {
    case CommandKind::activate: log::info(c.at, who, "activated"); break;
    case CommandKind::passivate:
      pending_ctl_.push_back({false, {}, nullptr});
      if (!buffer_.empty()) flush_at_ = now();
      store_->flush();
      break;
    case CommandKind::activate_sensors: {
      const auto args = activate_sensors_args(c);
      pending_ctl_.push_back({true, args.dataset, resolve_dataset(args.dataset)});
      break;
    }
    case CommandKind::passivate_sensors: pending_ctl_.push_back({false, {}, nullptr}); break;
    case CommandKind::fix_outliers: {
      const auto args = fix_outliers_args(c);
      if (layout_.index_of(args.sensor) < 0) {
        log::warn(c.at, who, "CMD_FIX_OUTLIERS: unknown sensor '{}'", args.sensor);
        break;
      }
      OutlierJob job{layout_.farm, args.sensor, args.start, args.end, args.method, args.level, {}};
      for (const auto& r : store_->read_raw(layout_.farm, args.start, args.end)) {
        if (r.sensor != args.sensor) continue;
        job.series.at.push_back(r.at);
        job.series.value.push_back(r.ghi);
      }
      if (job.series.size() == 0) {
        log::warn(c.at, who, "CMD_FIX_OUTLIERS: no readings of {} between {} and {}", args.sensor,
                  format_date(args.start), format_date(args.end));
        break;
      }
      pending_outlier_.push_back(std::move(job));
      break;
    }
    case CommandKind::run_prediction: {
      const auto args = run_prediction_args(c);
      if (!model_) {
        log::warn(c.at, who, "CMD_RUN_PREDICTION ignored: no model deployed");
        break;
      }
      const auto& known = model_->config.horizons;
      for (int h : args.horizons) {
        if (std::find(known.begin(), known.end(), h) == known.end()) {
          log::warn(c.at, who, "CMD_RUN_PREDICTION ignored: horizon {} is not one of the model's", h);
          return;
        }
      }
      const int n_x = model_->config.n_x;
      const Date previous = args.date - std::chrono::days{1};
      const auto raw = store_->read_raw(layout_.farm, previous, args.date);
      PredictionJob job{layout_.farm, args.date, args.horizons, args.out_db, model_, {}, layout_.locations()};
      job.input = resample_minutes(raw, layout_, Timestamp{args.date} - std::chrono::minutes{n_x}, n_x + 1440);
      if (args.in_db != "raw") {
        auto rows = store_->read_estimated(layout_.farm, previous, args.date, args.in_db);
        std::erase_if(rows, [](const EstimatedReading& e) { return e.quality != Quality::repaired; });
        overlay_minutes(job.input, rows);
      }
      pending_prediction_.push_back(std::move(job));
      break;
    }
    case CommandKind::train_model:
    case CommandKind::generate_reports: break;
  }
}

void Fog::on_outlier(const OutlierResult& r) {
  const std::string who = layout_.farm + ".fog";
  if (!r.report) {
    log::warn(calendar_now(), who, "outlier run for {} failed: {}", r.job.sensor, r.error);
    return;
  }
  const auto& report = *r.report;
  EstimatedPacket packet{layout_.farm, "estimated", {}, {}, {}};
  for (std::size_t i = 0; i < report.observed.size(); ++i) {
    if (!report.repaired.replaced[i]) continue;
    packet.rows.push_back({r.job.sensor, report.observed.at[i], Quality::repaired, 0, report.repaired.series.value[i]});
  }
  for (const auto& w : report.repaired.warnings) log::warn(calendar_now(), who, "repair {}: {}", r.job.sensor, w);
  log::info(calendar_now(), who, "outliers of {}: {} flagged, {} values repaired ({})", r.job.sensor,
            report.flagged.size(), packet.rows.size(), anomaly::to_string(report.method));
  store_->append_estimated(layout_.farm, packet.rows);

  packet.report_name = fmt::format("{}_{}_{}", r.job.sensor, format_date(r.job.start), format_date(r.job.end));
  std::ostringstream csv;
  anomaly::write_report_csv(csv, report);
  packet.report_csv = csv.str();
  const fs::path dir = store_->farm_dir(layout_.farm) / "reports" / "outliers";
  fs::create_directories(dir);
  std::ofstream(dir / (packet.report_name + ".csv"), std::ios::binary) << packet.report_csv;
  pending_estimated_.push_back(std::move(packet));
}

void Fog::on_prediction(const PredictionResult& r) {
  const std::string who = layout_.farm + ".fog";
  if (!r.error.empty()) {
    log::warn(calendar_now(), who, "prediction for {} failed: {}", format_date(r.date), r.error);
    return;
  }
  store_->append_estimated(layout_.farm, r.rows, r.out_db);

  ErrorReport report{layout_.farm, r.date, std::nullopt, 0};
  const auto truth = store_->read_raw(layout_.farm, r.date, r.date);
  const auto errors = reports::prediction_errors(truth, r.rows);
  if (auto it = errors.find(""); it != errors.end()) {
    double sum = 0.0;
    for (const auto& e : it->second) {
      sum += e.mae * static_cast<double>(e.count);
      report.count += e.count;
    }
    report.mae = sum / static_cast<double>(report.count);
  }
  log::info(calendar_now(), who, "{} predictions for {} stored in '{}', MAE {}", r.rows.size(), format_date(r.date),
            r.out_db, report.mae ? fmt::format("{:.2f}", *report.mae) : "n/a");
  pending_estimated_.push_back({layout_.farm, r.out_db, r.rows, {}, {}});
  pending_error_.push_back(std::move(report));
}

}  // namespace heliofarm::farm
