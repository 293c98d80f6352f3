#include "heliofarm/store/datastore.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "heliofarm/core/text.hpp"

namespace heliofarm {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kRawHeader = "at,sensor,ghi";
constexpr std::string_view kEstimatedHeader = "at,sensor,quality,horizon_min,ghi";
constexpr std::size_t kFlushBytes = 1 << 20;

void append_value(std::string& buf, const std::optional<double>& v) {
  if (v) fmt::format_to(std::back_inserter(buf), "{}", *v);
}

template <class Row, class Fn>
void read_days(const fs::path& dir, Date from, Date to, std::string_view header, Fn&& parse_row,
               std::vector<Row>& out) {
  for (Date d = from; d <= to; d += std::chrono::days{1}) {
    const fs::path file = dir / (format_date(d) + ".csv");
    if (!fs::exists(file)) continue;
    const std::string text = read_file(file.string());
    LineReader lines(text);
    std::string_view line;
    if (!lines.next(line) || line != header) throw DatastoreError(fmt::format("{}: bad header", file.string()));
    while (lines.next(line)) {
      if (line.empty()) continue;
      const auto f = split(line, ',');
      out.push_back(parse_row(f, file, lines.line_number()));
    }
  }
}

std::optional<double> parse_optional(std::string_view field, const fs::path& file, std::size_t line) {
  if (field.empty()) return std::nullopt;
  auto v = parse_double(field);
  if (!v) throw DatastoreError(fmt::format("{}:{}: bad value '{}'", file.string(), line, field));
  return v;
}

Timestamp parse_at(std::string_view field, const fs::path& file, std::size_t line) {
  auto at = try_parse_datetime(field);
  if (!at) throw DatastoreError(fmt::format("{}:{}: bad timestamp '{}'", file.string(), line, field));
  return *at;
}

}  // namespace

Datastore::Datastore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw DatastoreError(fmt::format("cannot create datastore root '{}': {}", root_.string(), ec.message()));
}

Datastore::~Datastore() {
  try {
    flush();
  } catch (...) {
  }
}

Datastore::Writer& Datastore::writer(const fs::path& file, std::string_view header) {
  if (last_writer_ != nullptr && file == last_path_) return *last_writer_;
  auto it = writers_.find(file);
  if (it == writers_.end()) {
    std::error_code ec;
    fs::create_directories(file.parent_path(), ec);
    const bool fresh = !fs::exists(file);
    auto w = std::make_unique<Writer>();
    w->out.open(file, std::ios::binary | std::ios::app);
    if (!w->out) throw DatastoreError(fmt::format("cannot open '{}' for writing", file.string()));
    if (fresh) {
      w->buffer.append(header);
      w->buffer.push_back('\n');
    }
    it = writers_.emplace(file, std::move(w)).first;
  }
  last_writer_ = it->second.get();
  last_path_ = file;
  return *last_writer_;
}

Datastore::Writer& Datastore::table_writer(const std::string& farm, std::string_view table, Date day,
                                           std::string_view header) {
  if (last_table_writer_ != nullptr && day == last_day_ && farm == last_farm_ && table == last_table_) {
    return *last_table_writer_;
  }
  last_table_writer_ = &writer(root_ / farm / table / (format_date(day) + ".csv"), header);
  last_farm_ = farm;
  last_table_ = table;
  last_day_ = day;
  return *last_table_writer_;
}

const std::string& Datastore::formatted(Timestamp at) {
  if (at != fmt_second_ || fmt_cache_.empty()) {
    fmt_second_ = at;
    fmt_cache_ = format_datetime(at, 'T');
  }
  return fmt_cache_;
}

void Datastore::append_raw(const SensorReading& r) {
  if (r.quality != Quality::measured) {
    throw DatastoreError(fmt::format("raw table only accepts measured readings ({} {})", r.farm, r.sensor));
  }
  auto [it, inserted] = last_raw_.try_emplace({r.farm, r.sensor}, r.at);
  if (!inserted) {
    if (r.at <= it->second) {
      throw DatastoreError(fmt::format("duplicate or out-of-order raw reading {} {} {}", r.farm, r.sensor,
                                       format_datetime(r.at)));
    }
    it->second = r.at;
  }
  Writer& w = table_writer(r.farm, "raw", day_of(r.at), kRawHeader);
  w.buffer.append(formatted(r.at));
  w.buffer.push_back(',');
  w.buffer.append(r.sensor);
  w.buffer.push_back(',');
  append_value(w.buffer, r.ghi);
  w.buffer.push_back('\n');
  ++raw_counts_[r.farm];
  if (w.buffer.size() > kFlushBytes) {
    w.out.write(w.buffer.data(), static_cast<std::streamsize>(w.buffer.size()));
    w.buffer.clear();
    if (!w.out) throw DatastoreError(fmt::format("write failed on '{}' raw table", r.farm));
  }
}

void Datastore::append_raw(std::span<const SensorReading> rows) {
  for (const auto& r : rows) append_raw(r);
}

void Datastore::append_estimated(const std::string& farm, std::span<const EstimatedReading> rows,
                                 const std::string& table) {
  if (table == "raw") throw DatastoreError("estimated rows cannot be written to the raw table");
  for (const auto& r : rows) {
    if (r.quality == Quality::measured) {
      throw DatastoreError(fmt::format("estimated table only accepts repaired or predicted readings ({} {})", farm,
                                       r.sensor));
    }
    Writer& w = table_writer(farm, table, day_of(r.at), kEstimatedHeader);
    fmt::format_to(std::back_inserter(w.buffer), "{},{},{},{},", formatted(r.at), r.sensor, to_string(r.quality),
                   r.horizon_min);
    append_value(w.buffer, r.ghi);
    w.buffer.push_back('\n');
  }
}

void Datastore::flush() {
  for (auto& [path, w] : writers_) {
    if (w->buffer.empty()) continue;
    w->out.write(w->buffer.data(), static_cast<std::streamsize>(w->buffer.size()));
    w->buffer.clear();
    w->out.flush();
    if (!w->out) throw DatastoreError(fmt::format("write failed on '{}'", path.string()));
  }
}

std::vector<SensorReading> Datastore::read_raw(const std::string& farm, Date from, Date to) {
  flush();
  std::vector<SensorReading> out;
  read_days<SensorReading>(
      root_ / farm / "raw", from, to, kRawHeader,
      [&](const std::vector<std::string_view>& f, const fs::path& file, std::size_t line) {
        if (f.size() != 3) throw DatastoreError(fmt::format("{}:{}: expected 3 fields", file.string(), line));
        return SensorReading{farm, std::string(f[1]), parse_at(f[0], file, line), parse_optional(f[2], file, line),
                             Quality::measured};
      },
      out);
  return out;
}

std::vector<EstimatedReading> Datastore::read_estimated(const std::string& farm, Date from, Date to,
                                                        const std::string& table) {
  flush();
  std::vector<EstimatedReading> out;
  read_days<EstimatedReading>(
      root_ / farm / table, from, to, kEstimatedHeader,
      [&](const std::vector<std::string_view>& f, const fs::path& file, std::size_t line) {
        if (f.size() != 5) throw DatastoreError(fmt::format("{}:{}: expected 5 fields", file.string(), line));
        auto horizon = parse_int(f[3]);
        if (!horizon) throw DatastoreError(fmt::format("{}:{}: bad horizon", file.string(), line));
        return EstimatedReading{std::string(f[1]), parse_at(f[0], file, line), parse_quality(f[2]),
                                static_cast<int>(*horizon), parse_optional(f[4], file, line)};
      },
      out);
  return out;
}

std::vector<Date> Datastore::raw_days(const std::string& farm) const {
  std::vector<Date> days;
  const fs::path dir = root_ / farm / "raw";
  if (!fs::exists(dir)) return days;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".csv") continue;
    if (auto d = try_parse_date(entry.path().stem().string())) days.push_back(*d);
  }
  std::sort(days.begin(), days.end());
  return days;
}

std::uint64_t Datastore::raw_rows(const std::string& farm) const {
  auto it = raw_counts_.find(farm);
  return it == raw_counts_.end() ? 0 : it->second;
}

void Datastore::write_checkpoint(const std::string& farm, const std::string& id, std::span<const std::uint8_t> bytes) {
  const fs::path dir = root_ / farm / "models";
  fs::create_directories(dir);
  const fs::path tmp = dir / (id + ".ckpt.tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DatastoreError(fmt::format("cannot write checkpoint '{}'", tmp.string()));
  }
  fs::rename(tmp, dir / (id + ".ckpt"));
}

std::vector<std::uint8_t> Datastore::read_checkpoint(const std::string& farm, const std::string& id) const {
  const std::string text = read_file((root_ / farm / "models" / (id + ".ckpt")).string());
  return {text.begin(), text.end()};
}

std::vector<std::string> Datastore::checkpoints(const std::string& farm) const {
  std::vector<std::string> ids;
  const fs::path dir = root_ / farm / "models";
  if (!fs::exists(dir)) return ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".ckpt") ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

fs::path Datastore::reports_dir(const std::string& farm) const {
  const fs::path dir = root_ / farm / "reports";
  fs::create_directories(dir);
  return dir;
}

}  // namespace heliofarm
