#include "heliofarm/store/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "heliofarm/core/text.hpp"

namespace heliofarm {

std::size_t Dataset::rows() const {
  std::size_t n = 0;
  for (const auto& [_, s] : series) n += s.size();
  return n;
}

Dataset parse_dataset(std::string_view csv, std::string_view origin) {
  LineReader lines(csv);
  std::string_view line;
  if (!lines.next(line) || trim(line) != "at,sensor,ghi") {
    throw std::runtime_error(fmt::format("{}: expected header 'at,sensor,ghi'", origin));
  }
  Dataset data;
  bool sorted = true;
  while (lines.next(line)) {
    if (trim(line).empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string_view::npos) {
      throw std::runtime_error(fmt::format("{}:{}: expected 3 fields", origin, lines.line_number()));
    }
    const auto at = try_parse_datetime(trim(line.substr(0, c1)));
    if (!at) throw std::runtime_error(fmt::format("{}:{}: bad timestamp", origin, lines.line_number()));
    const auto sensor = trim(line.substr(c1 + 1, c2 - c1 - 1));
    const auto value = trim(line.substr(c2 + 1));
    std::optional<double> ghi;
    if (!value.empty()) {
      ghi = parse_double(value);
      if (!ghi) throw std::runtime_error(fmt::format("{}:{}: bad ghi '{}'", origin, lines.line_number(), value));
    }
    auto it = data.series.find(sensor);
    if (it == data.series.end()) it = data.series.emplace(std::string(sensor), SensorSeries{}).first;
    auto& s = it->second;
    if (!s.at.empty() && *at <= s.at.back()) sorted = false;
    s.at.push_back(*at);
    s.ghi.push_back(ghi);
  }
  if (!sorted) {
    for (auto& [id, s] : data.series) {
      std::vector<std::size_t> order(s.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return s.at[a] < s.at[b]; });
      SensorSeries sorted_series;
      for (auto k : order) {
        if (!sorted_series.at.empty() && sorted_series.at.back() == s.at[k]) {
          throw std::runtime_error(
              fmt::format("{}: duplicate timestamp {} for sensor '{}'", origin, format_datetime(s.at[k]), id));
        }
        sorted_series.at.push_back(s.at[k]);
        sorted_series.ghi.push_back(s.ghi[k]);
      }
      s = std::move(sorted_series);
    }
  }
  return data;
}

Dataset load_dataset(const std::string& path) { return parse_dataset(read_file(path), path); }

void write_dataset(std::ostream& out, const Dataset& data) {
  struct Cursor {
    const std::string* id;
    const SensorSeries* s;
    std::size_t k = 0;
  };
  std::vector<Cursor> cursors;
  for (const auto& [id, s] : data.series) cursors.push_back({&id, &s});
  out << "at,sensor,ghi\n";
  fmt::memory_buffer buf;
  while (true) {
    const Cursor* best = nullptr;
    for (const auto& c : cursors) {
      if (c.k < c.s->size() && (best == nullptr || c.s->at[c.k] < best->s->at[best->k])) best = &c;
    }
    if (best == nullptr) break;
    const Timestamp t = best->s->at[best->k];
    const std::string when = format_datetime(t, 'T');
    for (auto& c : cursors) {
      if (c.k < c.s->size() && c.s->at[c.k] == t) {
        buf.clear();
        if (const auto& v = c.s->ghi[c.k]) {
          fmt::format_to(std::back_inserter(buf), "{},{},{}\n", when, *c.id, *v);
        } else {
          fmt::format_to(std::back_inserter(buf), "{},{},\n", when, *c.id);
        }
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        ++c.k;
      }
    }
  }
}

void save_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_dataset(out, data);
}

}  // namespace heliofarm
