#include "heliofarm/gridcast/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

namespace heliofarm::gridcast {

bool is_daylight(Timestamp at) {
  const auto minute = seconds_of_day(at) / 60;
  const auto second = seconds_of_day(at) % 60;
  return minute >= kDaylightFirstMinute && (minute < kDaylightLastMinute || (minute == kDaylightLastMinute && second == 0));
}

std::vector<double> grid_frames(const MinuteMatrix& m, const GridMapper& mapper, const Standardizer& s) {
  const int P = mapper.spec().pixels();
  const std::size_t n = m.sensors.size();
  std::vector<double> frames(static_cast<std::size_t>(m.minutes) * P);
  std::vector<std::optional<double>> values(n);
  const double dark = s.standardize(0.0);
  for (int k = 0; k < m.minutes; ++k) {
    double* frame = frames.data() + static_cast<std::size_t>(k) * P;
    if (!is_daylight(m.time_of(k))) {
      std::fill_n(frame, P, dark);
      continue;
    }
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& v = m.at(k, i);
      values[i] = v ? std::optional<double>(s.standardize(*v)) : std::nullopt;
      any = any || v.has_value();
    }
    if (any) {
      mapper.to_grid(values, std::span<double>(frame, P));
    } else if (k > 0) {
      std::copy_n(frame - P, P, frame);
    } else {
      std::fill_n(frame, P, dark);
    }
  }
  return frames;
}

std::vector<int> window_anchors(int frames, const ModelConfig& config) {
  std::vector<int> out;
  for (int t = config.n_x - 1; t + config.max_horizon() <= frames - 1; ++t) out.push_back(t);
  return out;
}

SampleSet build_samples(std::span<const FrameRun> runs, const ModelConfig& config) {
  SampleSet set;
  set.n_x = config.n_x;
  set.n_y = config.n_y();
  set.pixels = config.pixels();
  const std::size_t P = set.pixels;
  for (const auto& run : runs) {
    if (run.frames.size() != run.at.size() * P) throw std::invalid_argument("frame run size mismatch");
    for (int t : window_anchors(static_cast<int>(run.at.size()), config)) {
      const auto first = run.frames.begin() + static_cast<std::ptrdiff_t>((t - config.n_x + 1) * P);
      set.x.insert(set.x.end(), first, first + static_cast<std::ptrdiff_t>(config.n_x * P));
      for (int h : config.horizons) {
        const auto target = run.frames.begin() + static_cast<std::ptrdiff_t>((t + h) * P);
        set.y.insert(set.y.end(), target, target + static_cast<std::ptrdiff_t>(P));
      }
      set.anchor.push_back(run.at[t]);
      ++set.count;
    }
  }
  return set;
}

TrainingData prepare_training(std::span<const MinuteMatrix> days, std::span<const GeoPoint> locations,
                              const GridSpec& grid, const ModelConfig& config, Windowing windowing,
                              std::optional<Standardizer> standardizer) {
  if (days.empty()) throw InsufficientDataError("no training days");
  if (!standardizer) {
    std::vector<double> values;
    for (const auto& day : days) {
      for (int k = 0; k < day.minutes; ++k) {
        if (!is_daylight(day.time_of(k))) continue;
        for (std::size_t i = 0; i < day.sensors.size(); ++i) {
          if (const auto& v = day.at(k, i)) values.push_back(*v);
        }
      }
    }
    if (values.empty()) throw InsufficientDataError("no readings in the training interval");
    standardizer = fit_standardizer(values);
  }
  const GridMapper mapper(grid, {locations.begin(), locations.end()});
  const std::size_t P = grid.pixels();

  std::vector<FrameRun> runs;
  for (const auto& day : days) {
    if (day.minutes != 24 * 60 || seconds_of_day(day.start) != 0) {
      throw std::invalid_argument("training days must span midnight to midnight");
    }
    auto frames = grid_frames(day, mapper, *standardizer);
    if (windowing == Windowing::daylight) {
      FrameRun run;
      const auto first = frames.begin() + static_cast<std::ptrdiff_t>(kDaylightFirstMinute * P);
      run.frames.assign(first, first + static_cast<std::ptrdiff_t>(kDaylightFrames * P));
      for (int k = 0; k < kDaylightFrames; ++k) run.at.push_back(day.time_of(kDaylightFirstMinute + k));
      runs.push_back(std::move(run));
      continue;
    }
    // Continuous: extend the current run when this day follows the previous one.
    if (runs.empty() || runs.back().at.back() + std::chrono::minutes{1} != day.start) runs.emplace_back();
    FrameRun& run = runs.back();
    run.frames.insert(run.frames.end(), frames.begin(), frames.end());
    for (int k = 0; k < day.minutes; ++k) run.at.push_back(day.time_of(k));
  }
  TrainingData data{*standardizer, build_samples(runs, config)};
  if (data.samples.count == 0) throw InsufficientDataError("dataset is smaller than one training window");
  return data;
}

std::vector<EpochMetrics> train(ForecastModel& model, const SampleSet& samples, const TrainOptions& options) {
  if (options.epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (options.batch < 1) throw std::invalid_argument("batch size must be at least 1");
  if (samples.count == 0) throw InsufficientDataError("no training samples");
  const Network net(model.config);
  if (model.params.size() != net.parameters()) throw ContractError("model parameters do not match its architecture");
  if (samples.n_x != model.config.n_x || samples.n_y != model.config.n_y() || samples.pixels != model.config.pixels()) {
    throw ContractError("sample shapes do not match the model");
  }

  const std::size_t N = net.parameters();
  const std::size_t B = static_cast<std::size_t>(options.batch);
  std::vector<double> m(N, 0.0), v(N, 0.0), grad(N);
  std::vector<std::vector<double>> per_sample(B, std::vector<double>(N));
  std::vector<Workspace> workspaces(B);
  std::vector<double> losses(B), maes(B);
  std::vector<std::size_t> order(samples.count);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(options.seed);
  tbb::task_arena arena(std::max(1, options.workers));
  long step = 0;

  std::vector<EpochMetrics> history;
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum_mse = 0.0, sum_mae = 0.0;
    for (std::size_t start = 0; start < samples.count; start += B) {
      if (options.cancelled && options.cancelled()) throw TrainingAborted("training cancelled");
      const std::size_t size = std::min(B, samples.count - start);
      auto work = [&](std::size_t j) {
        auto& g = per_sample[j];
        std::fill(g.begin(), g.end(), 0.0);
        const std::size_t idx = order[start + j];
        losses[j] = net.loss_and_grad(model.params, samples.x_of(idx), samples.y_of(idx), g, workspaces[j], &maes[j]);
      };
      if (options.workers > 1) {
        arena.execute([&] {
          tbb::parallel_for(tbb::blocked_range<std::size_t>(0, size), [&](const auto& r) {
            for (std::size_t j = r.begin(); j != r.end(); ++j) work(j);
          });
        });
      } else {
        for (std::size_t j = 0; j < size; ++j) work(j);
      }
      // Fixed-order reduction keeps results independent of scheduling.
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t j = 0; j < size; ++j) {
        if (!std::isfinite(losses[j])) {
          throw TrainingAborted(fmt::format("non-finite loss at epoch {} (sample anchored {})", epoch,
                                            format_datetime(samples.anchor.empty() ? Timestamp{} : samples.anchor[order[start + j]])));
        }
        sum_mse += losses[j];
        sum_mae += maes[j];
        const double* g = per_sample[j].data();
        for (std::size_t p = 0; p < N; ++p) grad[p] += g[p];
      }
      ++step;
      const double scale = 1.0 / static_cast<double>(size);
      const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(step));
      for (std::size_t p = 0; p < N; ++p) {
        const double g = grad[p] * scale;
        m[p] = options.beta1 * m[p] + (1.0 - options.beta1) * g;
        v[p] = options.beta2 * v[p] + (1.0 - options.beta2) * g * g;
        model.params[p] -= options.learning_rate * (m[p] / c1) / (std::sqrt(v[p] / c2) + options.epsilon);
      }
    }
    const EpochMetrics em{epoch, sum_mae / static_cast<double>(samples.count), sum_mse / static_cast<double>(samples.count)};
    history.push_back(em);
    if (options.on_epoch) options.on_epoch(em);
  }
  return history;
}

}  // namespace heliofarm::gridcast
