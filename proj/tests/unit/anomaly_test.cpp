#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "heliofarm/anomaly/anomaly.hpp"

namespace {

using namespace heliofarm;
using namespace heliofarm::anomaly;

const Timestamp kStart = parse_datetime("2010-06-01 00:00:00");

// Samples f(t) with t in days every `step` minutes.
template <class F>
TimeSeries sample(F f, int points, int step = 60) {
  TimeSeries s;
  for (int i = 0; i < points; ++i) {
    const Timestamp at = kStart + std::chrono::minutes{i * step};
    s.at.push_back(at);
    s.value.push_back(f(i * step / 1440.0));
  }
  return s;
}

FitConfig plain(int J, int N) {
  FitConfig c;
  c.changepoints = J;
  c.fourier_order = N;
  return c;
}

TEST(Fit, RecoversLine) {
  const auto s = sample([](double t) { return 3 + 2 * t; }, 200);
  const auto m = fit(s, plain(0, 1));
  EXPECT_NEAR(m.k, 2, 1e-6);
  EXPECT_NEAR(m.m, 3, 1e-6);
  EXPECT_LE(m.sigma, 1e-8);
}

TEST(Fit, RecoversSingleHarmonic) {
  const auto s = sample([](double t) { return std::sin(2 * std::numbers::pi * t); }, 24 * 7);
  const auto m = fit(s, plain(0, 3));
  ASSERT_EQ(m.fourier.size(), 6u);
  EXPECT_NEAR(m.fourier[0], 0, 1e-6);
  EXPECT_NEAR(m.fourier[1], 1, 1e-6);
  for (std::size_t i = 2; i < 6; ++i) EXPECT_NEAR(m.fourier[i], 0, 1e-6);
  EXPECT_NEAR(m.k, 0, 1e-6);
  EXPECT_LE(m.sigma, 1e-8);
}

TEST(Fit, ConstantSeriesWithDefaults) {
  const auto s = sample([](double) { return 42.5; }, 24 * 10);
  const auto m = fit(s);
  EXPECT_NEAR(m.m, 42.5, 1e-6);
  EXPECT_NEAR(m.k, 0, 1e-6);
  for (double d : m.deltas) EXPECT_NEAR(d, 0, 1e-6);
  for (double f : m.fourier) EXPECT_NEAR(f, 0, 1e-6);
  EXPECT_LE(m.sigma, 1e-8);
}

TEST(Fit, HingeFollowsKinkAndExtrapolatesFinalSlope) {
  // Slope 1 until day 4, slope -2 afterwards; a changepoint lands on day 4 exactly.
  auto f = [](double t) { return t < 4 ? t : 4 - 2 * (t - 4); };
  const auto s = sample(f, 24 * 10 + 1);
  FitConfig c = plain(2, 1);  // changepoints at 0.8·10·{1,2}/2 = {4, 8}
  const auto m = fit(s, c);
  EXPECT_NEAR(m.changepoints[0], 4.0, 1e-12);
  EXPECT_LT(m.sigma, 1e-3);
  const Timestamp later = kStart + std::chrono::days{12};
  EXPECT_NEAR(m.predict(later), f(12), 1e-2);
}

TEST(Fit, Errors) {
  const auto few = sample([](double t) { return t; }, 5);
  EXPECT_THROW(fit(few, plain(0, 1)), InsufficientDataError);
  // Two points per day at the same clock times cannot separate harmonic 2 from the constant.
  TimeSeries aliased;
  for (int d = 0; d < 20; ++d) {
    for (int h : {0, 12}) {
      aliased.at.push_back(kStart + std::chrono::days{d} + std::chrono::hours{h});
      aliased.value.push_back(1.0);
    }
  }
  EXPECT_THROW(fit(aliased, plain(0, 2)), FitError);
}

TEST(Band, HalfWidth) {
  EXPECT_NEAR(band_z(0.99), 2.5758, 1e-4);
  TrendModel m;
  m.fourier = {0, 0};
  m.sigma = 10;
  const std::vector<Timestamp> at{kStart};
  const auto b = predict_with_band(m, at);
  EXPECT_NEAR(b.high[0] - b.yhat[0], 25.758, 1e-3);
  m.sigma = 0;
  const auto z = predict_with_band(m, at);
  EXPECT_EQ(z.low[0], z.yhat[0]);
  EXPECT_EQ(z.high[0], z.yhat[0]);
}

TEST(Band, InSampleMatchesFit) {
  const auto s = sample([](double t) { return 5 + t + std::cos(2 * std::numbers::pi * t); }, 24 * 4);
  const auto m = fit(s, plain(0, 2));
  const auto b = predict_with_band(m, s.at);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(b.yhat[i], *s.value[i], 1e-8);
}

struct Injected {
  TimeSeries series;
  std::set<std::size_t> spikes;
};

Injected noisy_with_spikes(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0, 10);
  auto truth = [](double t) {
    return 500 + 300 * std::sin(2 * std::numbers::pi * t) + 100 * std::cos(4 * std::numbers::pi * t) + 5 * t;
  };
  Injected out;
  out.series = sample([&](double t) { return truth(t) + noise(rng); }, 1440, 10);  // 10 days
  std::uniform_int_distribution<std::size_t> pick(0, 1439);
  while (out.spikes.size() < 50) out.spikes.insert(pick(rng));
  int sign = 1;
  for (std::size_t i : out.spikes) {
    out.series.value[i] = *out.series.value[i] + sign * 50.0;
    sign = -sign;
  }
  return out;
}

TEST(Detect, InjectedSpikes) {
  const auto data = noisy_with_spikes(21);
  const auto report = run_workflow(data.series, FitConfig{}, RepairMethod::linear);
  std::size_t hits = 0;
  for (std::size_t i : report.flagged) hits += data.spikes.count(i);
  const double recall = static_cast<double>(hits) / data.spikes.size();
  const double fp = static_cast<double>(report.flagged.size() - hits) / (data.series.size() - data.spikes.size());
  EXPECT_GE(recall, 0.9);
  EXPECT_LE(fp, 0.02);
  // Repaired points sit back inside the band.
  TimeSeries fixed = report.repaired.series;
  const auto again = detect(fixed, report.band);
  for (std::size_t i : again) EXPECT_FALSE(report.repaired.replaced[i]) << i;
}

TEST(Detect, NoOutliersAndGrossSpike) {
  auto s = sample([](double t) { return 100 + 3 * t; }, 100);
  const auto b = predict_with_band(fit(s, plain(0, 1)), s.at);
  EXPECT_TRUE(detect(s, b).empty());
  Band tight{b.yhat, b.yhat, b.yhat};
  for (auto& v : tight.low) v -= 1;
  for (auto& v : tight.high) v += 1;
  s.value[40] = *s.value[40] + 10;
  s.value[41] = std::nullopt;
  EXPECT_EQ(detect(s, tight), std::vector<std::size_t>{40});
}

TEST(Detect, HigherLevelNeverFlagsMore) {
  const auto data = noisy_with_spikes(4);
  std::size_t previous = SIZE_MAX;
  for (double level : {0.8, 0.9, 0.95, 0.99, 0.999}) {
    FitConfig c;
    c.level = level;
    const auto n = run_workflow(data.series, c, RepairMethod::linear).flagged.size();
    EXPECT_LE(n, previous);
    previous = n;
  }
}

TEST(Repair, Midpoint) {
  TimeSeries s{{kStart, kStart + std::chrono::minutes{1}, kStart + std::chrono::minutes{2}}, {10.0, 999.0, 30.0}};
  const std::vector<std::size_t> flagged{1};
  const auto r = repair(s, flagged, RepairMethod::linear);
  EXPECT_EQ(*r.series.value[1], 20.0);
  EXPECT_TRUE(r.replaced[1]);
  EXPECT_FALSE(r.replaced[0]);
}

TEST(Repair, NoFlagsIsIdentity) {
  const auto s = sample([](double t) { return t * t; }, 30);
  const auto r = repair(s, {}, RepairMethod::cubic);
  EXPECT_EQ(r.series.value, s.value);
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Repair, PolynomialExactness) {
  auto parabola = [](double t) { return 3 - 7 * t + 11 * t * t; };
  auto cubic = [](double t) { return 1 + t - 4 * t * t + 9 * t * t * t; };
  auto s = sample(parabola, 12);
  std::vector<std::size_t> flagged{5, 6};
  s.value[5] = -1e6;
  auto r = repair(s, flagged, RepairMethod::quadratic);
  EXPECT_NEAR(*r.series.value[5], parabola(5 / 24.0), 1e-9);
  EXPECT_NEAR(*r.series.value[6], parabola(6 / 24.0), 1e-9);
  auto c = sample(cubic, 12);
  c.value[4] = std::nullopt;
  r = repair(c, flagged, RepairMethod::cubic);
  for (std::size_t i : {4, 5, 6}) EXPECT_NEAR(*r.series.value[i], cubic(i / 24.0), 1e-9);
}

TEST(Repair, SplineIsExactOnLinesAndKeepsOthers) {
  auto s = sample([](double t) { return 2 + 5 * t; }, 20);
  const auto before = s.value;
  const std::vector<std::size_t> flagged{3, 10, 11};
  for (std::size_t i : flagged) s.value[i] = 0;
  const auto r = repair(s, flagged, RepairMethod::spline);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (r.replaced[i]) {
      EXPECT_NEAR(*r.series.value[i], *before[i], 1e-9);
    } else {
      EXPECT_EQ(r.series.value[i], s.value[i]);  // bit-identical outside the repair
    }
  }
}

TEST(Repair, BoundaryHoldsNearestWithWarning) {
  const auto s = sample([](double t) { return 100 * t; }, 6);
  const std::vector<std::size_t> flagged{0, 5};
  const auto r = repair(s, flagged, RepairMethod::linear);
  EXPECT_EQ(*r.series.value[0], *s.value[1]);
  EXPECT_EQ(*r.series.value[5], *s.value[4]);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Report, CsvRoundTrip) {
  const auto data = noisy_with_spikes(2);
  const auto report = run_workflow(data.series, FitConfig{}, RepairMethod::linear);
  std::ostringstream out;
  write_report_csv(out, report);
  const auto rows = parse_report_csv(out.str());
  ASSERT_EQ(rows.size(), data.series.size());
  std::size_t flagged = 0;
  for (const auto& r : rows) flagged += r.flagged;
  EXPECT_EQ(flagged, report.flagged.size());
  EXPECT_EQ(rows[0].observed, data.series.value[0]);
}

}  // namespace
