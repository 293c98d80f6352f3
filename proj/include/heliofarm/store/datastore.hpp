#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "heliofarm/store/types.hpp"

namespace heliofarm {

class DatastoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Append-only per-farm tables under one root:
///
///   <root>/<farm>/raw/<YYYY-MM-DD>.csv          at,sensor,ghi
///   <root>/<farm>/estimated/<YYYY-MM-DD>.csv    at,sensor,quality,horizon_min,ghi
///   <root>/<farm>/models/<id>.ckpt
///   <root>/<farm>/reports/
///
/// Writers are buffered; every read flushes first. One writer per instance.
class Datastore {
 public:
  explicit Datastore(std::filesystem::path root);
  ~Datastore();

  Datastore(const Datastore&) = delete;
  Datastore& operator=(const Datastore&) = delete;

  const std::filesystem::path& root() const { return root_; }

  /// Raw rows must be measured and strictly increasing in time per (farm, sensor).
  void append_raw(const SensorReading& r);
  void append_raw(std::span<const SensorReading> rows);
  void append_estimated(const std::string& farm, std::span<const EstimatedReading> rows,
                        const std::string& table = "estimated");
  void flush();

  /// Rows of days [from, to], inclusive, in file order.
  std::vector<SensorReading> read_raw(const std::string& farm, Date from, Date to);
  std::vector<EstimatedReading> read_estimated(const std::string& farm, Date from, Date to,
                                               const std::string& table = "estimated");
  /// Days with a raw file, ascending.
  std::vector<Date> raw_days(const std::string& farm) const;

  std::uint64_t raw_rows(const std::string& farm) const;

  void write_checkpoint(const std::string& farm, const std::string& id, std::span<const std::uint8_t> bytes);
  std::vector<std::uint8_t> read_checkpoint(const std::string& farm, const std::string& id) const;
  std::vector<std::string> checkpoints(const std::string& farm) const;

  std::filesystem::path reports_dir(const std::string& farm) const;
  std::filesystem::path farm_dir(const std::string& farm) const { return root_ / farm; }

 private:
  struct Writer {
    std::ofstream out;
    std::string buffer;
  };
  Writer& writer(const std::filesystem::path& file, std::string_view header);
  Writer& table_writer(const std::string& farm, std::string_view table, Date day, std::string_view header);
  const std::string& formatted(Timestamp at);

  std::filesystem::path root_;
  std::map<std::filesystem::path, std::unique_ptr<Writer>> writers_;
  std::map<std::pair<std::string, std::string>, Timestamp> last_raw_;
  std::map<std::string, std::uint64_t> raw_counts_;
  Writer* last_writer_ = nullptr;
  std::filesystem::path last_path_;
  Writer* last_table_writer_ = nullptr;
  std::string last_farm_, last_table_;
  Date last_day_{};
  Timestamp fmt_second_{};
  std::string fmt_cache_;
};

}  // namespace heliofarm
