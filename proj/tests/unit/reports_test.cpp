#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include <fmt/format.h>

#include "heliofarm/core/text.hpp"
#include "heliofarm/reports/reports.hpp"

namespace {

using namespace heliofarm;
using namespace heliofarm::reports;
namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("heliofarm_reports_" + name);
  fs::remove_all(dir);
  return dir;
}

Timestamp at(const char* text) { return parse_datetime(text); }

FarmLayout three_sensors() {
  FarmLayout layout{"F", {}};
  const double lat[] = {10.000, 10.001, 10.002};
  const double lon[] = {20.000, 20.002, 20.001};
  for (int i = 0; i < 3; ++i) {
    SensorConfig s;
    s.id = fmt::format("S{}", i + 1);
    s.farm = "F";
    s.lat = lat[i];
    s.lon = lon[i];
    layout.sensors.push_back(s);
  }
  return layout;
}

// Two-pass mean and population standard deviation.
std::pair<double, double> oracle_stats(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}

TEST(Summary, ConstantSensor) {
  const auto dir = scratch("constant");
  Datastore store(dir);
  for (int k = 0; k < 10; ++k) store.append_raw({"F", "S1", at("2010-06-01 06:00:00") + std::chrono::minutes{k}, 500.0});
  const auto s = summarize(store, "F", parse_date("2010-06-01"), parse_date("2010-06-01"));
  ASSERT_EQ(s.sensors.size(), 1u);
  EXPECT_EQ(s.sensors[0].measured.count, 10u);
  EXPECT_DOUBLE_EQ(s.sensors[0].measured.mean, 500.0);
  EXPECT_DOUBLE_EQ(s.sensors[0].measured.std, 0.0);
  EXPECT_FALSE(s.mae().has_value());
}

TEST(Summary, HandDatasetMatchesTwoPassOracle) {
  const auto dir = scratch("hand");
  Datastore store(dir);
  // 3 sensors, 5 instants, one null.
  const std::vector<std::vector<std::optional<double>>> values = {
      {100.0, 250.5, 300.0, std::nullopt, 410.25},
      {90.0, 91.0, 92.5, 93.0, 1000.0},
      {0.0, 0.0, 12.0, 7.5, 3.25},
  };
  for (int k = 0; k < 5; ++k) {
    for (int s = 0; s < 3; ++s) {
      store.append_raw({"F", fmt::format("S{}", s + 1), at("2010-06-01 12:00:00") + std::chrono::minutes{k},
                        values[s][k]});
    }
  }
  const std::vector<EstimatedReading> est = {
      {"S1", at("2010-06-01 12:03:00"), Quality::repaired, 0, 350.0},
      {"S2", at("2010-06-01 12:01:00"), Quality::predicted, 1, 95.0},
      {"S2", at("2010-06-01 12:02:00"), Quality::predicted, 1, 90.5},
      {"S3", at("2010-06-01 12:02:00"), Quality::predicted, 11, 20.0},
  };
  store.append_estimated("F", est);
  const auto s = summarize(store, "F", parse_date("2010-06-01"), parse_date("2010-06-01"));

  std::vector<double> all;
  for (int i = 0; i < 3; ++i) {
    std::vector<double> v;
    for (const auto& x : values[i]) {
      if (x) v.push_back(*x);
    }
    all.insert(all.end(), v.begin(), v.end());
    const auto [mean, sd] = oracle_stats(v);
    EXPECT_NEAR(s.sensors[i].measured.mean, mean, 1e-9);
    EXPECT_NEAR(s.sensors[i].measured.std, sd, 1e-9);
    EXPECT_EQ(s.sensors[i].measured.count, v.size());
  }
  EXPECT_EQ(s.sensors[0].measured.nulls, 1u);
  const auto [mean, sd] = oracle_stats(all);
  EXPECT_NEAR(s.measured.mean, mean, 1e-9);
  EXPECT_NEAR(s.measured.std, sd, 1e-9);
  EXPECT_EQ(s.repaired.count, 1u);
  EXPECT_EQ(s.predicted.count, 3u);

  // h=1: |95-91|, |90.5-92.5|; h=11: |20-12|
  ASSERT_EQ(s.errors.size(), 2u);
  EXPECT_EQ(s.errors[0].horizon_min, 1);
  EXPECT_NEAR(s.errors[0].mae, 3.0, 1e-12);
  EXPECT_NEAR(s.errors[0].mse, 10.0, 1e-12);
  EXPECT_NEAR(s.errors[0].mape, (4.0 / 91 + 2.0 / 92.5) / 2, 1e-12);
  EXPECT_NEAR(s.errors[1].mae, 8.0, 1e-12);
  EXPECT_NEAR(*s.mae(), 14.0 / 3, 1e-12);
  EXPECT_TRUE(exceeds_threshold(s, 14.0 / 3 - 1));
  EXPECT_FALSE(exceeds_threshold(s, 14.0 / 3 + 1));
}

TEST(Summary, PerfectForecastHasZeroError) {
  std::vector<SensorReading> raw;
  std::vector<EstimatedReading> est;
  for (int k = 0; k < 30; ++k) {
    const auto t = at("2010-06-01 10:00:00") + std::chrono::minutes{k};
    raw.push_back({"F", "S1", t, 400.0 + k});
    for (int h : {1, 11}) est.push_back({"S1", t, Quality::predicted, h, 400.0 + k});
  }
  const auto errors = prediction_errors(raw, est);
  for (const auto& e : errors.at("")) {
    EXPECT_EQ(e.count, 30u);
    EXPECT_EQ(e.mae, 0.0);
    EXPECT_EQ(e.mape, 0.0);
  }
}

TEST(Summary, EmptyIntervalIsNotAnError) {
  Datastore store(scratch("empty"));
  const auto s = summarize(store, "F", parse_date("2010-06-01"), parse_date("2010-06-02"));
  EXPECT_TRUE(s.sensors.empty());
  EXPECT_EQ(s.measured.count, 0u);
}

TEST(Heatmap, UniformFieldAndSingleFrame) {
  const auto layout = three_sensors();
  const auto grid = gridcast::fit_grid(layout.locations(), 6, 5);
  std::vector<SensorReading> rows;
  for (int k = 0; k < 4; ++k) {
    for (const auto& s : layout.sensors) rows.push_back({"F", s.id, at("2010-06-01 12:00:00") + std::chrono::minutes{k}, 321.0});
  }
  const auto h = heatmap(rows, layout, grid);
  EXPECT_EQ(h.frames, 4u);
  for (double v : h.mean) EXPECT_DOUBLE_EQ(v, 321.0);

  const std::vector<SensorReading> one = {{"F", "S1", at("2010-06-01 12:00:00"), 10.0},
                                          {"F", "S2", at("2010-06-01 12:00:00"), std::nullopt},
                                          {"F", "S3", at("2010-06-01 12:00:00"), 30.0}};
  const auto single = heatmap(one, layout, grid);
  const gridcast::GridMapper mapper(grid, layout.locations());
  EXPECT_EQ(single.mean, mapper.to_grid(std::vector<std::optional<double>>{10.0, std::nullopt, 30.0}));
  EXPECT_THROW(heatmap(std::vector<SensorReading>{}, layout, grid), NoDataError);
}

TEST(Heatmap, HotSensorOwnsItsVoronoiCell) {
  const auto layout = three_sensors();
  const auto grid = gridcast::fit_grid(layout.locations(), 10, 10);
  std::vector<SensorReading> rows;
  for (int k = 0; k < 5; ++k) {
    const auto t = at("2010-06-01 12:00:00") + std::chrono::minutes{k};
    rows.push_back({"F", "S1", t, 100.0});
    rows.push_back({"F", "S2", t, 900.0});
    rows.push_back({"F", "S3", t, 100.0});
  }
  const auto h = heatmap(rows, layout, grid);
  // Brute-force nearest site per pixel center, longitude scaled by cos(mean grid latitude).
  const double scale = std::cos((grid.lat_min + grid.lat_max) / 2 * M_PI / 180.0);
  const auto locs = layout.locations();
  for (int r = 0; r < grid.height; ++r) {
    for (int c = 0; c < grid.width; ++c) {
      const auto p = grid.center(r, c);
      int best = 0;
      double best_d = 1e300;
      for (int s = 0; s < 3; ++s) {
        const double dy = p.lat - locs[s].lat, dx = (p.lon - locs[s].lon) * scale;
        if (dx * dx + dy * dy < best_d) {
          best_d = dx * dx + dy * dy;
          best = s;
        }
      }
      EXPECT_DOUBLE_EQ(h.mean[r * grid.width + c], best == 1 ? 900.0 : 100.0) << r << "," << c;
    }
  }
}

TEST(Heatmap, DaylightOnlySkipsNight) {
  const auto layout = three_sensors();
  const auto grid = gridcast::fit_grid(layout.locations(), 4, 4);
  const std::vector<SensorReading> rows = {{"F", "S1", at("2010-06-01 03:00:00"), 0.0},
                                           {"F", "S1", at("2010-06-01 12:00:00"), 800.0}};
  EXPECT_EQ(heatmap(rows, layout, grid, true).mean[0], 800.0);
  EXPECT_EQ(heatmap(rows, layout, grid, false).mean[0], 400.0);
}

void fill_day(Datastore& store, const FarmLayout& layout) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 5.0);
  std::vector<EstimatedReading> est;
  for (int m = 0; m < 1440; ++m) {
    const auto t = at("2010-06-01 00:00:00") + std::chrono::minutes{m};
    for (const auto& s : layout.sensors) {
      const double clear = std::max(0.0, 900 * std::sin(M_PI * (m - 300) / 900.0));
      store.append_raw({layout.farm, s.id, t, clear + (clear > 0 ? noise(rng) : 0.0)});
      if (m % 10 == 0 && clear > 0) est.push_back({s.id, t, Quality::predicted, 11, clear});
    }
  }
  est.push_back({"S2", at("2010-06-01 12:00:00"), Quality::repaired, 0, 850.0});
  store.append_estimated(layout.farm, est);
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

TEST(Render, FogReportStructure) {
  const auto dir = scratch("render");
  Datastore store(dir / "store");
  const auto layout = three_sensors();
  fill_day(store, layout);
  fs::create_directories(store.farm_dir("F") / "reports" / "outliers");
  {
    std::ofstream out(store.farm_dir("F") / "reports" / "outliers" / "S1_2010-06-01_2010-06-01.csv");
    out << "at,observed,yhat,low,high,flagged,repaired\n"
           "2010-06-01T12:00:00,5000,800,700,900,1,810\n"
           "2010-06-01T12:01:00,801,800,700,900,0,801\n";
  }
  const auto report = collect_farm_report(store, layout, parse_date("2010-06-01"), parse_date("2010-06-01"));
  const auto html = render_fog_html(report);
  EXPECT_EQ(count(html, "<svg class=\"sensor-plot\""), 3u);
  EXPECT_EQ(count(html, "<svg class=\"heatmap\""), 1u);
  EXPECT_EQ(count(html, "<svg class=\"sensor-map\""), 1u);
  EXPECT_EQ(count(html, "<table class=\"summary\""), 1u);
  EXPECT_EQ(count(html, "<table class=\"outliers\""), 1u);
  EXPECT_EQ(count(html, "</title></rect>"), 100u);  // heatmap cells
  EXPECT_EQ(html.find("http"), std::string::npos);
  EXPECT_NE(html.find("h=11"), std::string::npos);

  write_fog_report(report, dir / "out");
  write_cloud_report(std::span(&report, 1), dir / "out");
  const auto first = read_file((dir / "out" / "F" / "fog_report.html").string());
  const auto cloud = read_file((dir / "out" / "cloud_report.html").string());
  EXPECT_EQ(first, html);
  EXPECT_EQ(cloud.find("http"), std::string::npos);
  EXPECT_NE(cloud.find("F/fog_report.html"), std::string::npos);

  // Same inputs, same bytes.
  const auto again = collect_farm_report(store, layout, parse_date("2010-06-01"), parse_date("2010-06-01"));
  write_fog_report(again, dir / "out2");
  EXPECT_EQ(read_file((dir / "out2" / "F" / "fog_report.html").string()), first);

  // summary.csv mirrors the table: one line per table row plus the header.
  const auto csv = read_file((dir / "out" / "F" / "summary.csv").string());
  EXPECT_EQ(count(csv, "\n"), count(html, "<tr><td") - 1 + 1);  // minus the flagged outlier row, plus header
}

TEST(Render, EmptyFarmHasPlaceholders) {
  FarmReport empty;
  empty.summary.farm = "Nowhere";
  const auto html = render_fog_html(empty);
  EXPECT_NE(html.find("<html"), std::string::npos);
  EXPECT_NE(html.find("</html>"), std::string::npos);
  EXPECT_GE(count(html, "no data"), 3u);
  EXPECT_EQ(count(html, "<svg"), 0u);
}

}  // namespace
