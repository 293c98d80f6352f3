#include "heliofarm/trainsvc/protocol.hpp"

#include <json.hpp>
#include <sodium.h>

#include <fmt/format.h>

namespace heliofarm::trainsvc {

using nlohmann::json;

namespace {

void ensure_sodium() {
  static const int ok = sodium_init();
  if (ok < 0) throw std::runtime_error("libsodium initialisation failed");
}

json metrics_json(const gridcast::EpochMetrics& m) { return {{"epoch", m.epoch}, {"mae", m.mae}, {"mse", m.mse}}; }

gridcast::EpochMetrics metrics_from(const json& j) {
  return {j.at("epoch").get<int>(), j.at("mae").get<double>(), j.at("mse").get<double>()};
}

json grid_json(const gridcast::GridSpec& g) {
  return {{"height", g.height}, {"width", g.width}, {"lat_min", g.lat_min},
          {"lat_max", g.lat_max}, {"lon_min", g.lon_min}, {"lon_max", g.lon_max}};
}

gridcast::GridSpec grid_from(const json& j) {
  return {j.at("height").get<int>(),     j.at("width").get<int>(),      j.at("lat_min").get<double>(),
          j.at("lat_max").get<double>(), j.at("lon_min").get<double>(), j.at("lon_max").get<double>()};
}

json values_json(const std::vector<std::optional<double>>& v) {
  json a = json::array();
  for (const auto& x : v) a.push_back(x ? json(*x) : json(nullptr));
  return a;
}

std::vector<std::optional<double>> values_from(const json& a) {
  std::vector<std::optional<double>> v;
  v.reserve(a.size());
  for (const auto& x : a) v.push_back(x.is_null() ? std::nullopt : std::optional<double>(x.get<double>()));
  return v;
}

json to_json(const TrainRequest& r) {
  const auto& c = r.model;
  json j = {{"type", "TrainRequest"},
            {"id", r.id},
            {"farm", r.farm},
            {"start", format_date(r.start)},
            {"end", format_date(r.end)},
            {"epochs", r.epochs},
            {"seed", r.seed},
            {"workers", r.workers},
            {"windowing", r.windowing == gridcast::Windowing::daylight ? "daylight" : "continuous"},
            {"model",
             {{"cells", c.cells},
              {"kernel", c.kernel},
              {"filters", c.filters},
              {"dense", c.dense},
              {"n_x", c.n_x},
              {"horizons", c.horizons},
              {"height", c.height},
              {"width", c.width}}}};
  j["grid"] = r.grid ? grid_json(*r.grid) : json(nullptr);
  json sensors = json::array();
  for (const auto& s : r.sensors) sensors.push_back({{"id", s.id}, {"lat", s.lat}, {"lon", s.lon}, {"period", s.period}});
  j["sensors"] = std::move(sensors);
  if (r.store_root) {
    j["payload"] = {{"mode", "reference"}, {"store", *r.store_root}};
  } else {
    json days = json::array();
    for (const auto& d : r.days) {
      json values = json::array();
      for (const auto& v : d.values) values.push_back(values_json(v));
      days.push_back({{"date", format_date(d.day)}, {"values", std::move(values)}});
    }
    j["payload"] = {{"mode", "inline"}, {"days", std::move(days)}};
  }
  j["base_checkpoint"] = r.base_checkpoint.empty() ? json(nullptr) : json(to_base64(r.base_checkpoint));
  return j;
}

TrainRequest request_from(const json& j) {
  TrainRequest r;
  r.id = j.at("id").get<std::string>();
  r.farm = j.at("farm").get<std::string>();
  r.start = parse_date(j.at("start").get<std::string>());
  r.end = parse_date(j.at("end").get<std::string>());
  r.epochs = j.at("epochs").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.workers = j.value("workers", 1);
  const auto windowing = j.value("windowing", std::string("daylight"));
  if (windowing == "daylight") {
    r.windowing = gridcast::Windowing::daylight;
  } else if (windowing == "continuous") {
    r.windowing = gridcast::Windowing::continuous;
  } else {
    throw ProtocolError(fmt::format("unknown windowing '{}'", windowing));
  }
  const auto& m = j.at("model");
  r.model.cells = m.at("cells").get<int>();
  r.model.kernel = m.at("kernel").get<int>();
  r.model.filters = m.at("filters").get<int>();
  r.model.dense = m.at("dense").get<int>();
  r.model.n_x = m.at("n_x").get<int>();
  r.model.horizons = m.at("horizons").get<std::vector<int>>();
  r.model.height = m.at("height").get<int>();
  r.model.width = m.at("width").get<int>();
  if (!j.at("grid").is_null()) r.grid = grid_from(j.at("grid"));
  for (const auto& s : j.at("sensors")) {
    r.sensors.push_back({s.at("id").get<std::string>(), s.at("lat").get<double>(), s.at("lon").get<double>(),
                         s.at("period").get<double>()});
  }
  const auto& p = j.at("payload");
  const auto mode = p.at("mode").get<std::string>();
  if (mode == "reference") {
    r.store_root = p.at("store").get<std::string>();
  } else if (mode == "inline") {
    for (const auto& d : p.at("days")) {
      DayData day{parse_date(d.at("date").get<std::string>()), {}};
      for (const auto& v : d.at("values")) day.values.push_back(values_from(v));
      r.days.push_back(std::move(day));
    }
  } else {
    throw ProtocolError(fmt::format("unknown payload mode '{}'", mode));
  }
  if (!j.at("base_checkpoint").is_null()) r.base_checkpoint = from_base64(j.at("base_checkpoint").get<std::string>());
  return r;
}

struct ToJson {
  json operator()(const TrainRequest& r) const { return to_json(r); }
  json operator()(const TrainProgress& p) const {
    json j = metrics_json(p.metrics);
    j["type"] = "TrainProgress";
    j["id"] = p.id;
    return j;
  }
  json operator()(const TrainResult& r) const {
    json metrics = json::array();
    for (const auto& m : r.metrics) metrics.push_back(metrics_json(m));
    return {{"type", "TrainResult"},
            {"id", r.id},
            {"checkpoint", to_base64(r.checkpoint)},
            {"metrics", std::move(metrics)},
            {"wall_seconds", r.wall_seconds}};
  }
  json operator()(const ErrorReply& e) const { return {{"type", "ErrorReply"}, {"id", e.id}, {"message", e.message}}; }
};

}  // namespace

std::string to_base64(std::span<const std::uint8_t> bytes) {
  ensure_sodium();
  std::string out(sodium_base64_ENCODED_LEN(bytes.size(), sodium_base64_VARIANT_ORIGINAL), '\0');
  sodium_bin2base64(out.data(), out.size(), bytes.data(), bytes.size(), sodium_base64_VARIANT_ORIGINAL);
  out.resize(out.size() - 1);  // trailing NUL
  return out;
}

std::vector<std::uint8_t> from_base64(std::string_view text) {
  ensure_sodium();
  std::vector<std::uint8_t> out(text.size() / 4 * 3 + 3);
  std::size_t len = 0;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len, nullptr,
                        sodium_base64_VARIANT_ORIGINAL) != 0) {
    throw ProtocolError("invalid base64 payload");
  }
  out.resize(len);
  return out;
}

std::vector<std::uint8_t> encode_frame(const Message& m) {
  const std::string body = std::visit(ToJson{}, m).dump();
  if (body.size() > kMaxFrameBytes) {
    throw FrameTooLarge(fmt::format("frame body of {} bytes exceeds the {} byte limit", body.size(), kMaxFrameBytes));
  }
  std::vector<std::uint8_t> out(4 + body.size());
  const auto n = static_cast<std::uint32_t>(body.size());
  out[0] = static_cast<std::uint8_t>(n >> 24);
  out[1] = static_cast<std::uint8_t>(n >> 16);
  out[2] = static_cast<std::uint8_t>(n >> 8);
  out[3] = static_cast<std::uint8_t>(n);
  std::copy(body.begin(), body.end(), out.begin() + 4);
  return out;
}

std::uint32_t frame_length(std::span<const std::uint8_t, 4> h) {
  return (std::uint32_t{h[0]} << 24) | (std::uint32_t{h[1]} << 16) | (std::uint32_t{h[2]} << 8) | std::uint32_t{h[3]};
}

Message decode_body(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw ProtocolError(fmt::format("malformed frame body: {}", e.what()));
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    throw ProtocolError("frame body has no 'type' field");
  }
  const auto type = j["type"].get<std::string>();
  try {
    if (type == "TrainRequest") return request_from(j);
    if (type == "TrainProgress") return TrainProgress{j.at("id").get<std::string>(), metrics_from(j)};
    if (type == "TrainResult") {
      TrainResult r;
      r.id = j.at("id").get<std::string>();
      r.checkpoint = from_base64(j.at("checkpoint").get<std::string>());
      for (const auto& m : j.at("metrics")) r.metrics.push_back(metrics_from(m));
      r.wall_seconds = j.at("wall_seconds").get<double>();
      return r;
    }
    if (type == "ErrorReply") return ErrorReply{j.at("id").get<std::string>(), j.at("message").get<std::string>()};
  } catch (const json::exception& e) {
    throw ProtocolError(fmt::format("malformed {}: {}", type, e.what()));
  } catch (const std::invalid_argument& e) {
    throw ProtocolError(fmt::format("malformed {}: {}", type, e.what()));
  }
  throw UnsupportedMessage(fmt::format("unsupported message type '{}'", type));
}

Message decode_frame(std::span<const std::uint8_t> bytes, std::size_t* consumed) {
  if (bytes.size() < 4) throw TruncatedFrame("frame header is incomplete");
  const std::uint32_t n = frame_length(bytes.first<4>());
  if (n > kMaxFrameBytes) throw FrameTooLarge(fmt::format("frame length {} exceeds the limit", n));
  if (bytes.size() < 4 + static_cast<std::size_t>(n)) {
    throw TruncatedFrame(fmt::format("frame announces {} bytes, {} available", n, bytes.size() - 4));
  }
  if (consumed) *consumed = 4 + n;
  return decode_body(std::string_view(reinterpret_cast<const char*>(bytes.data()) + 4, n));
}

}  // namespace heliofarm::trainsvc
