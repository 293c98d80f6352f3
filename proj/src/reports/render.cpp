#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "heliofarm/core/text.hpp"
#include "heliofarm/reports/reports.hpp"

namespace heliofarm::reports {

namespace fs = std::filesystem;

namespace {

constexpr int kPlotBuckets = 720;

std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Bucketed means so a day of one-second data still draws as a few hundred points.
class Bucketer {
 public:
  Bucketer(Timestamp start, Timestamp end) : start_(start) {
    const auto span = (end - start).count();
    width_ = std::max<std::int64_t>(60, (span + kPlotBuckets - 1) / kPlotBuckets);
  }

  void add(Timestamp at, double v) {
    const auto k = (at - start_).count() / width_;
    auto& b = buckets_[k];
    b.first += v;
    ++b.second;
  }

  PlotSeries series(std::string label) const {
    PlotSeries s{std::move(label), {}, {}};
    for (const auto& [k, b] : buckets_) {
      s.at.push_back(start_ + std::chrono::seconds{k * width_});
      s.ghi.push_back(b.first / static_cast<double>(b.second));
    }
    return s;
  }

 private:
  Timestamp start_;
  std::int64_t width_;
  std::map<std::int64_t, std::pair<double, std::size_t>> buckets_;
};

struct Rgb {
  int r, g, b;
};

// Linear scale from 0 to `max` over a blue-yellow-red ramp.
Rgb color_of(double v, double max) {
  static constexpr Rgb stops[] = {{49, 54, 149}, {69, 117, 180}, {171, 217, 233}, {254, 224, 144}, {244, 109, 67},
                                  {165, 0, 38}};
  constexpr int n = static_cast<int>(std::size(stops)) - 1;
  const double t = max > 0 ? std::clamp(v / max, 0.0, 1.0) * n : 0.0;
  const int i = std::min(static_cast<int>(t), n - 1);
  const double f = t - i;
  auto mix = [&](int a, int b) { return static_cast<int>(std::lround(a + (b - a) * f)); };
  return {mix(stops[i].r, stops[i + 1].r), mix(stops[i].g, stops[i + 1].g), mix(stops[i].b, stops[i + 1].b)};
}

std::string hex(Rgb c) { return fmt::format("#{:02x}{:02x}{:02x}", c.r, c.g, c.b); }

const char* kStyle =
    "body{font-family:sans-serif;margin:24px;color:#222}"
    "table{border-collapse:collapse;font-size:13px}"
    "td,th{border:1px solid #bbb;padding:2px 6px;text-align:right}"
    "th{background:#eee}td.id{text-align:left}"
    "svg{background:#fafafa;border:1px solid #ddd;margin:4px 0}"
    ".placeholder{color:#888;font-style:italic}";

std::string page(const std::string& title, const std::string& body) {
  return fmt::format(
      "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{0}</title>\n"
      "<style>{1}</style>\n</head>\n<body>\n<h1>{0}</h1>\n{2}</body>\n</html>\n",
      escape(title), kStyle, body);
}

std::string num(double v) { return fmt::format("{:.2f}", v); }

// One row per (farm, sensor, series); the HTML table and summary.csv share it.
struct Row {
  std::string farm, sensor, series;
  std::size_t count = 0;
  std::optional<std::size_t> nulls;
  std::optional<double> mean, std, mae, mse, mape;

  Row(std::string f, std::string s, std::string name, std::size_t n)
      : farm(std::move(f)), sensor(std::move(s)), series(std::move(name)), count(n) {}
};

void stats_rows(std::vector<Row>& rows, const std::string& farm, const std::string& sensor, const Stats& measured,
                const Stats& repaired, const Stats& predicted, const std::vector<HorizonError>& errors) {
  auto add = [&](const char* name, const Stats& s, bool with_nulls) {
    Row r{farm, sensor, name, s.count};
    if (with_nulls) r.nulls = s.nulls;
    if (s.count > 0) {
      r.mean = s.mean;
      r.std = s.std;
    }
    rows.push_back(std::move(r));
  };
  add("measured", measured, true);
  add("repaired", repaired, false);
  add("predicted", predicted, false);
  for (const auto& e : errors) {
    Row r{farm, sensor, fmt::format("h={}", e.horizon_min), e.count};
    r.mae = e.mae;
    r.mse = e.mse;
    r.mape = e.mape;
    rows.push_back(std::move(r));
  }
}

std::vector<Row> table_rows(std::span<const FarmSummary> farms, bool per_sensor) {
  std::vector<Row> rows;
  for (const auto& f : farms) {
    stats_rows(rows, f.farm, "*", f.measured, f.repaired, f.predicted, f.errors);
    if (!per_sensor) continue;
    for (const auto& s : f.sensors) stats_rows(rows, f.farm, s.sensor, s.measured, s.repaired, s.predicted, s.errors);
  }
  return rows;
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : ""; }

std::string html_table(const std::vector<Row>& rows) {
  if (rows.empty()) return "<p class=\"placeholder\">no data</p>\n";
  std::string out =
      "<table class=\"summary\">\n<tr><th>farm</th><th>sensor</th><th>series</th><th>count</th><th>nulls</th>"
      "<th>mean</th><th>std</th><th>MAE</th><th>MSE</th><th>MAPE</th></tr>\n";
  for (const auto& r : rows) {
    out += fmt::format(
        "<tr><td class=\"id\">{}</td><td class=\"id\">{}</td><td class=\"id\">{}</td><td>{}</td><td>{}</td>"
        "<td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>\n",
        escape(r.farm), escape(r.sensor), r.series, r.count, r.nulls ? fmt::format("{}", *r.nulls) : "", opt(r.mean),
        opt(r.std), opt(r.mae), opt(r.mse), opt(r.mape));
  }
  return out + "</table>\n";
}

std::string csv_rows(const std::vector<Row>& rows) {
  std::string out = "farm,sensor,series,count,nulls,mean,std,mae,mse,mape\n";
  auto full = [](const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); };
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.farm, r.sensor, r.series, r.count,
                       r.nulls ? fmt::format("{}", *r.nulls) : "", full(r.mean), full(r.std), full(r.mae),
                       full(r.mse), full(r.mape));
  }
  return out;
}

const char* series_color(const std::string& label, int& predicted_seen) {
  if (label == "measured") return "#1f77b4";
  if (label == "repaired") return "#2ca02c";
  static const char* predicted[] = {"#d62728", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};
  return predicted[predicted_seen++ % std::size(predicted)];
}

std::string sensor_plot(const std::string& sensor, const std::vector<PlotSeries>& series, Timestamp start,
                        Timestamp end) {
  constexpr int w = 760, h = 220, left = 50, right = 110, top = 10, bottom = 30;
  double ymax = 100.0;
  for (const auto& s : series) {
    for (double v : s.ghi) ymax = std::max(ymax, v);
  }
  ymax = std::ceil(ymax / 100.0) * 100.0;
  const double span = static_cast<double>((end - start).count());
  auto x = [&](Timestamp t) { return left + (w - left - right) * static_cast<double>((t - start).count()) / span; };
  auto y = [&](double v) { return top + (h - top - bottom) * (1.0 - v / ymax); };

  std::string out = fmt::format("<svg class=\"sensor-plot\" data-sensor=\"{}\" width=\"{}\" height=\"{}\">\n",
                                escape(sensor), w, h);
  out += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#444\"/>\n", left, h - bottom,
                     w - right, h - bottom);
  out += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#444\"/>\n", left, top, left,
                     h - bottom);
  for (int k = 0; k <= 4; ++k) {
    const double v = ymax * k / 4;
    out += fmt::format("<text x=\"{}\" y=\"{:.1f}\" font-size=\"10\" text-anchor=\"end\">{:.0f}</text>\n", left - 4,
                       y(v) + 3, v);
  }
  out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\">{}</text>\n", left, h - 8, format_datetime(start));
  out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{}</text>\n", w - right, h - 8,
                     format_datetime(end));
  int legend = 0, predicted_seen = 0;
  for (const auto& s : series) {
    if (s.at.empty()) continue;
    const char* color = series_color(s.label, predicted_seen);
    if (s.label == "repaired") {
      for (std::size_t i = 0; i < s.at.size(); ++i) {
        out += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"2\" fill=\"{}\"/>\n", x(s.at[i]), y(s.ghi[i]),
                           color);
      }
    } else {
      out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1\" points=\"", color);
      for (std::size_t i = 0; i < s.at.size(); ++i) {
        out += fmt::format("{}{:.1f},{:.1f}", i ? " " : "", x(s.at[i]), y(s.ghi[i]));
      }
      out += "\"/>\n";
    }
    const int ly = top + 12 + 14 * legend++;
    out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>", w - right + 10, ly - 9,
                       color);
    out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\">{}</text>\n", w - right + 24, ly, escape(s.label));
  }
  return out + "</svg>\n";
}

std::string sensor_map(const HeatmapData& map) {
  constexpr int w = 420, h = 320, pad = 60;
  const auto& g = map.grid;
  auto x = [&](double lon) { return pad + (w - 2 * pad) * (lon - g.lon_min) / (g.lon_max - g.lon_min); };
  auto y = [&](double lat) { return pad / 2 + (h - 1.5 * pad) * (g.lat_max - lat) / (g.lat_max - g.lat_min); };
  std::string out = fmt::format("<svg class=\"sensor-map\" width=\"{}\" height=\"{}\">\n", w, h);
  out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"none\" stroke=\"#444\"/>\n",
                     pad, pad / 2, x(g.lon_max) - pad, y(g.lat_min) - pad / 2);
  out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\">lon {:.4f}</text>\n", pad, h - pad / 2 + 14,
                     g.lon_min);
  out += fmt::format("<text x=\"{:.1f}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">lon {:.4f}</text>\n",
                     x(g.lon_max), h - pad / 2 + 14, g.lon_max);
  out += fmt::format("<text x=\"{}\" y=\"{:.1f}\" font-size=\"10\" text-anchor=\"end\">lat {:.4f}</text>\n", pad - 4,
                     y(g.lat_max) + 4, g.lat_max);
  out += fmt::format("<text x=\"{}\" y=\"{:.1f}\" font-size=\"10\" text-anchor=\"end\">lat {:.4f}</text>\n", pad - 4,
                     y(g.lat_min), g.lat_min);
  for (std::size_t s = 0; s < map.locations.size(); ++s) {
    const auto& p = map.locations[s];
    out += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"4\" fill=\"#d62728\"/>", x(p.lon), y(p.lat));
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"9\">{}</text>\n", x(p.lon) + 5, y(p.lat) - 5,
                       escape(map.sensors[s]));
  }
  return out + "</svg>\n";
}

std::string heatmap_svg(const HeatmapData& map) {
  constexpr int cell = 28, legend_w = 90;
  const auto& g = map.grid;
  const double max = map.mean.empty() ? 0.0 : *std::max_element(map.mean.begin(), map.mean.end());
  const int w = g.width * cell + legend_w, h = std::max(g.height * cell, 140);
  std::string out = fmt::format("<svg class=\"heatmap\" width=\"{}\" height=\"{}\">\n", w, h);
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      const double v = map.mean[r * g.width + c];
      out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"><title>{}</title></rect>\n",
                         c * cell, r * cell, cell, cell, hex(color_of(v, max)), num(v));
    }
  }
  // Legend: linear scale from 0 to the largest pixel mean.
  const int lx = g.width * cell + 10;
  constexpr int steps = 10;
  for (int k = 0; k < steps; ++k) {
    const double v = max * (steps - 1 - k) / (steps - 1);
    out += fmt::format("<rect class=\"legend\" x=\"{}\" y=\"{}\" width=\"14\" height=\"12\" fill=\"{}\"/>\n", lx,
                       10 + 12 * k, hex(color_of(v, max)));
  }
  out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\">{:.0f} W/m2</text>\n", lx + 18, 20, max);
  out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\">0 W/m2</text>\n", lx + 18, 10 + 12 * steps);
  return out + "</svg>\n";
}

std::string outlier_html(const OutlierSection& section) {
  std::size_t flagged = 0, repaired = 0;
  for (const auto& r : section.rows) {
    flagged += r.flagged;
    repaired += r.repaired.has_value() && r.repaired != r.observed;
  }
  std::string out = fmt::format("<h3>{}</h3>\n<p>{} points, {} flagged, {} values replaced</p>\n",
                                escape(section.name), section.rows.size(), flagged, repaired);
  if (flagged == 0) return out + "<p class=\"placeholder\">no outliers flagged</p>\n";
  out += "<table class=\"outliers\">\n<tr><th>at</th><th>observed</th><th>expected</th><th>low</th><th>high</th>"
         "<th>repaired</th></tr>\n";
  for (const auto& r : section.rows) {
    if (!r.flagged) continue;
    out += fmt::format("<tr><td class=\"id\">{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>\n",
                       format_datetime(r.at), opt(r.observed), num(r.yhat), num(r.low), num(r.high),
                       opt(r.repaired));
  }
  return out + "</table>\n";
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
}

}  // namespace

FarmReport collect_farm_report(Datastore& store, const FarmLayout& layout, Date first, Date last,
                               const std::string& table) {
  FarmReport report;
  report.summary = summarize(store, layout.farm, first, last, table);
  const Timestamp start{first}, end{last + std::chrono::days{1}};

  const auto raw = store.read_raw(layout.farm, first, last);
  const auto estimated = store.read_estimated(layout.farm, first, last, table);
  if (!layout.sensors.empty()) {
    try {
      report.map = heatmap(raw, layout, gridcast::fit_grid(layout.locations()), true);
    } catch (const NoDataError&) {
    }
  }

  std::map<std::string, std::map<std::string, Bucketer>> buckets;
  auto bucket = [&](const std::string& sensor, const std::string& label) -> Bucketer& {
    auto& per = buckets[sensor];
    return per.try_emplace(label, start, end).first->second;
  };
  for (const auto& r : raw) {
    if (r.ghi) bucket(r.sensor, "measured").add(r.at, *r.ghi);
  }
  std::map<std::string, std::vector<std::pair<Timestamp, double>>> repaired;
  for (const auto& e : estimated) {
    if (!e.ghi) continue;
    if (e.quality == Quality::repaired) {
      repaired[e.sensor].emplace_back(e.at, *e.ghi);
    } else {
      bucket(e.sensor, fmt::format("h={}", e.horizon_min)).add(e.at, *e.ghi);
    }
  }
  for (const auto& s : report.summary.sensors) {
    auto& plots = report.plots[s.sensor];
    auto& per = buckets[s.sensor];
    if (auto it = per.find("measured"); it != per.end()) plots.push_back(it->second.series("measured"));
    if (auto it = repaired.find(s.sensor); it != repaired.end()) {
      PlotSeries p{"repaired", {}, {}};
      for (const auto& [at, v] : it->second) {
        p.at.push_back(at);
        p.ghi.push_back(v);
      }
      plots.push_back(std::move(p));
    }
    std::vector<std::pair<int, std::string>> horizons;
    for (const auto& [label, _] : per) {
      if (label.starts_with("h=")) horizons.emplace_back(std::stoi(label.substr(2)), label);
    }
    std::sort(horizons.begin(), horizons.end());
    for (const auto& [_, label] : horizons) plots.push_back(per.at(label).series(label));
  }

  const fs::path dir = store.farm_dir(layout.farm) / "reports" / "outliers";
  if (fs::exists(dir)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      OutlierSection section{file.stem().string(), {}};
      for (auto& row : anomaly::parse_report_csv(read_file(file.string()))) {
        if (row.at >= start && row.at < end) section.rows.push_back(std::move(row));
      }
      if (!section.rows.empty()) report.outliers.push_back(std::move(section));
    }
  }
  return report;
}

std::string render_fog_html(const FarmReport& report) {
  const auto& s = report.summary;
  const Timestamp start{s.first}, end{s.last + std::chrono::days{1}};
  std::string body = fmt::format("<p>Interval {} to {}</p>\n", format_date(s.first), format_date(s.last));

  body += "<h2>Summary</h2>\n";
  body += html_table(table_rows(std::span(&s, 1), true));

  body += "<h2>Sensor locations</h2>\n";
  body += report.map ? sensor_map(*report.map) : "<p class=\"placeholder\">no data</p>\n";
  body += "<h2>Heat map</h2>\n";
  if (report.map) {
    body += fmt::format("<p>Mean daylight GHI per pixel over {} frames.</p>\n", report.map->frames);
    body += heatmap_svg(*report.map);
  } else {
    body += "<p class=\"placeholder\">no data</p>\n";
  }

  body += "<h2>Sensor readings</h2>\n";
  if (report.plots.empty()) body += "<p class=\"placeholder\">no data</p>\n";
  for (const auto& [sensor, series] : report.plots) {
    body += fmt::format("<h3>{}</h3>\n", escape(sensor));
    body += sensor_plot(sensor, series, start, end);
  }

  body += "<h2>Outliers</h2>\n";
  if (report.outliers.empty()) body += "<p class=\"placeholder\">no outlier reports</p>\n";
  for (const auto& section : report.outliers) body += outlier_html(section);
  return page(fmt::format("Fog report: {}", s.farm), body);
}

std::string render_cloud_html(std::span<const FarmReport> farms) {
  std::vector<FarmSummary> summaries;
  for (const auto& f : farms) summaries.push_back(f.summary);
  std::string body = "<h2>Farms</h2>\n";
  if (farms.empty()) {
    body += "<p class=\"placeholder\">no data</p>\n";
  } else {
    body += "<ul>\n";
    for (const auto& f : farms) {
      const auto mae = f.summary.mae();
      body += fmt::format("<li><a href=\"{0}/fog_report.html\">{0}</a>: {1} to {2}, {3} sensors, MAE {4}</li>\n",
                          escape(f.summary.farm), format_date(f.summary.first), format_date(f.summary.last),
                          f.summary.sensors.size(), mae ? num(*mae) : "n/a");
    }
    body += "</ul>\n";
  }
  body += "<h2>Summary</h2>\n";
  body += html_table(table_rows(summaries, false));
  return page("Cloud report", body);
}

std::string summary_csv(std::span<const FarmSummary> farms) { return csv_rows(table_rows(farms, true)); }

void write_fog_report(const FarmReport& farm, const fs::path& out_dir) {
  const fs::path dir = out_dir / farm.summary.farm;
  write_text(dir / "fog_report.html", render_fog_html(farm));
  write_text(dir / "summary.csv", summary_csv(std::span(&farm.summary, 1)));
}

void write_cloud_report(std::span<const FarmReport> farms, const fs::path& out_dir) {
  std::vector<FarmSummary> summaries;
  for (const auto& f : farms) summaries.push_back(f.summary);
  write_text(out_dir / "cloud_report.html", render_cloud_html(farms));
  write_text(out_dir / "summary.csv", csv_rows(table_rows(summaries, false)));
}

}  // namespace heliofarm::reports
