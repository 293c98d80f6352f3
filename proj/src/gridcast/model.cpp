#include "heliofarm/gridcast/model.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include <fmt/format.h>

namespace heliofarm::gridcast {

namespace {

constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  template <class T>
  void put(T v) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    out.insert(out.end(), raw, raw + sizeof(T));
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw CheckpointError("checkpoint is truncated");
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, raw, sizeof(T));
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<double> ForecastModel::forward(std::span<const double> x) const {
  const Network net(config);
  Workspace ws;
  std::vector<double> y(config.output_size());
  net.forward(params, x, y, ws);
  return y;
}

ForecastModel make_model(ModelConfig config, const GridSpec& grid, std::uint64_t seed) {
  config.height = grid.height;
  config.width = grid.width;
  auto params = glorot_init(config, seed);
  return {std::move(config), grid, {}, std::move(params)};
}

std::vector<std::uint8_t> encode_checkpoint(const ForecastModel& m) {
  Writer w;
  for (char c : {'H', 'F', 'C', 'K'}) w.put<char>(c);
  w.put<std::uint32_t>(kVersion);
  const auto& c = m.config;
  for (int v : {c.cells, c.kernel, c.filters, c.dense, c.n_x, c.n_y()}) w.put<std::int32_t>(v);
  for (int h : c.horizons) w.put<std::int32_t>(h);
  w.put<std::int32_t>(m.grid.height);
  w.put<std::int32_t>(m.grid.width);
  for (double v : {m.grid.lat_min, m.grid.lat_max, m.grid.lon_min, m.grid.lon_max}) w.put<double>(v);
  w.put<double>(m.standardizer.mu);
  w.put<double>(m.standardizer.sigma);
  w.put<std::uint64_t>(m.params.size());
  for (double v : m.params) w.put<double>(v);
  return std::move(w.out);
}

ForecastModel decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  for (char expected : {'H', 'F', 'C', 'K'}) {
    if (r.get<char>() != expected) throw CheckpointError("not a heliofarm checkpoint");
  }
  if (const auto v = r.get<std::uint32_t>(); v != kVersion) {
    throw CheckpointError(fmt::format("unsupported checkpoint version {}", v));
  }
  ForecastModel m;
  auto& c = m.config;
  c.cells = r.get<std::int32_t>();
  c.kernel = r.get<std::int32_t>();
  c.filters = r.get<std::int32_t>();
  c.dense = r.get<std::int32_t>();
  c.n_x = r.get<std::int32_t>();
  const int n_y = r.get<std::int32_t>();
  if (n_y < 1 || n_y > 1024) throw CheckpointError("checkpoint has an invalid horizon count");
  c.horizons.resize(n_y);
  for (int& h : c.horizons) h = r.get<std::int32_t>();
  m.grid.height = c.height = r.get<std::int32_t>();
  m.grid.width = c.width = r.get<std::int32_t>();
  m.grid.lat_min = r.get<double>();
  m.grid.lat_max = r.get<double>();
  m.grid.lon_min = r.get<double>();
  m.grid.lon_max = r.get<double>();
  m.standardizer.mu = r.get<double>();
  m.standardizer.sigma = r.get<double>();
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(fmt::format("checkpoint has an invalid model config: {}", e.what()));
  }
  const auto count = r.get<std::uint64_t>();
  if (count != parameter_count(c)) {
    throw CheckpointError(fmt::format("checkpoint holds {} parameters, architecture needs {}", count, parameter_count(c)));
  }
  m.params.resize(count);
  for (double& v : m.params) v = r.get<double>();
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint parameters");
  if (!(m.standardizer.sigma > 0.0)) throw CheckpointError("checkpoint standardizer has sigma <= 0");
  return m;
}

}  // namespace heliofarm::gridcast
