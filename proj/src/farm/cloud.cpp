#include <algorithm>
#include <fstream>
#include <thread>

#include <fmt/format.h>

#include "heliofarm/core/log.hpp"
#include "heliofarm/farm/atomics.hpp"
#include "heliofarm/reports/reports.hpp"

namespace heliofarm::farm {

namespace fs = std::filesystem;

Cloud::Cloud(std::string name, std::vector<FarmLayout> layouts, CloudOptions options)
    : devs::Atomic(std::move(name)), layouts_(std::move(layouts)), options_(std::move(options)) {
  std::sort(layouts_.begin(), layouts_.end(), [](const auto& a, const auto& b) { return a.farm < b.farm; });
}

void Cloud::initialize() {
  store_ = std::make_unique<Datastore>(options_.store);
  passivate();
}

double Cloud::threshold(const std::string& farm) const {
  auto it = options_.farm_thresholds.find(farm);
  return it == options_.farm_thresholds.end() ? options_.retrain_threshold : it->second;
}

const FarmLayout* Cloud::layout(const std::string& farm) const {
  for (const auto& l : layouts_) {
    if (l.farm == farm) return &l;
  }
  return nullptr;
}

void Cloud::lambda() {
  for (auto& m : pending_) out_model.add(std::move(m));
}

void Cloud::delta_int() {
  pending_.clear();
  passivate();
}

void Cloud::delta_ext(devs::SimTime) {
  // Data first, so commands in the same bag see it.
  for (const auto& p : in_packet) {
    store_->append_raw(p->readings);
    ++packets_;
    raw_rows_ += p->readings.size();
    log::info(calendar_now(), "cloud", "daily packet {} {} with {} readings stored", p->farm, format_date(p->day),
              p->readings.size());
  }
  for (const auto& p : in_estimated) {
    store_->append_estimated(p->farm, p->rows, p->table);
    if (!p->report_name.empty()) {
      const fs::path dir = store_->farm_dir(p->farm) / "reports" / "outliers";
      fs::create_directories(dir);
      std::ofstream(dir / (p->report_name + ".csv"), std::ios::binary) << p->report_csv;
    }
  }
  for (const auto& e : in_error) {
    if (!e->mae) continue;
    const double limit = threshold(e->farm);
    if (*e->mae <= limit) continue;
    log::warn(calendar_now(), "cloud", "{} forecast MAE {:.2f} above {:.2f} on {}: retraining", e->farm, *e->mae, limit,
              format_date(e->date));
    TrainJob job{"local", e->farm, e->date, e->date, 1, true};
    if (auto it = last_job_.find(e->farm); it != last_job_.end()) {
      job.endpoint = it->second.endpoint;
      job.epochs = it->second.epochs;
    }
    train(job);
  }
  for (const auto& c : in_cmd) {
    switch (c->kind) {
      case CommandKind::train_model: {
        const auto a = train_model_args(*c);
        train({a.endpoint, a.farm, a.start, a.end, a.epochs, false});
        break;
      }
      case CommandKind::generate_reports: generate_reports(generate_reports_args(*c)); break;
      case CommandKind::passivate: store_->flush(); break;
      default: break;
    }
  }
  if (pending_.empty()) {
    passivate();
  } else {
    hold_in("deploy", 0.0);
  }
}

void Cloud::exit() {
  if (store_) store_->flush();
}

void Cloud::train(const TrainJob& job) {
  TrainingRecord record{job.farm, {}, job.endpoint, job.start, job.end, job.self_triggered, false, false, {}};
  record.id = fmt::format("{}-{}-{}", job.farm, format_datetime(calendar_now(), 'T'), trainings_.size());
  std::replace(record.id.begin(), record.id.end(), ':', '-');
  const FarmLayout* farm = layout(job.farm);
  if (farm == nullptr) {
    log::warn(calendar_now(), "cloud", "training request for unknown farm '{}'", job.farm);
    trainings_.push_back(std::move(record));
    return;
  }
  if (!job.self_triggered) last_job_[job.farm] = job;

  trainsvc::TrainRequest request;
  request.id = record.id;
  request.farm = job.farm;
  request.start = job.start;
  request.end = job.end;
  request.epochs = job.epochs;
  request.seed = options_.seed;
  request.workers = options_.train_workers;
  request.model = options_.model;
  for (const auto& s : farm->sensors) request.sensors.push_back({s.id, s.lat, s.lon, s.period});

  const Timestamp vt = calendar_now();
  try {
    request.days = trainsvc::to_day_data(trainsvc::load_training_days(*store_, *farm, job.start, job.end));
    auto progress = [&](const trainsvc::TrainProgress& p) {
      log::info(vt, "cloud", "train {} epoch {} mae={:.4f} mse={:.4f}", record.id, p.metrics.epoch, p.metrics.mae,
                p.metrics.mse);
    };
    std::optional<trainsvc::TrainResult> result;
    if (job.endpoint != "local") {
      for (int attempt = 0; attempt < options_.attempts && !result; ++attempt) {
        try {
          result = trainsvc::remote_train(job.endpoint, request, progress, options_.client);
        } catch (const trainsvc::TransportError& e) {
          log::warn(vt, "cloud", "training service {} unreachable (attempt {}/{}): {}", job.endpoint, attempt + 1,
                    options_.attempts, e.what());
          if (attempt + 1 < options_.attempts) std::this_thread::sleep_for(options_.backoff * (1 << attempt));
        }
      }
      if (!result) {
        log::warn(vt, "cloud", "falling back to local training for {}", record.id);
        record.fell_back = true;
      }
    }
    if (!result) result = trainsvc::remote_train("local", request, progress);

    store_->write_checkpoint(job.farm, record.id, result->checkpoint);
    auto model = std::make_shared<const gridcast::ForecastModel>(gridcast::decode_checkpoint(result->checkpoint));
    pending_.push_back({job.farm, record.id, std::move(model), result->checkpoint});
    record.metrics = result->metrics;
    record.ok = true;
    log::info(vt, "cloud", "model {} trained ({} epochs, final mae={:.4f})", record.id, result->metrics.size(),
              result->metrics.empty() ? 0.0 : result->metrics.back().mae);
  } catch (const std::exception& e) {
    log::warn(vt, "cloud", "training {} failed: {}", record.id, e.what());
  }
  trainings_.push_back(std::move(record));
}

void Cloud::generate_reports(const GenerateReportsArgs& args) {
  const Timestamp vt = calendar_now();
  const FarmLayout* farm = layout(args.farm);
  if (farm == nullptr) {
    log::warn(vt, "cloud", "report requested for unknown farm '{}'", args.farm);
    return;
  }
  const fs::path out = fs::path(args.out_dir).is_absolute() ? fs::path(args.out_dir) : options_.report_root / args.out_dir;
  try {
    store_->flush();
    std::vector<reports::FarmReport> all;
    for (const auto& l : layouts_) all.push_back(reports::collect_farm_report(*store_, l, args.start, args.end));
    for (const auto& r : all) {
      if (r.summary.farm == args.farm) reports::write_fog_report(r, out);
    }
    reports::write_cloud_report(all, out);
    ++reports_;
    log::info(vt, "cloud", "reports for {} ({} to {}) written to {}", args.farm, format_date(args.start),
              format_date(args.end), out.string());
  } catch (const std::exception& e) {
    log::warn(vt, "cloud", "report generation failed: {}", e.what());
  }
}

}  // namespace heliofarm::farm
