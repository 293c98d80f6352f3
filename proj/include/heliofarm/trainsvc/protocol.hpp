#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "heliofarm/gridcast/train.hpp"

namespace heliofarm::trainsvc {

inline constexpr std::size_t kMaxFrameBytes = 256u << 20;

struct SensorSite {
  std::string id;
  double lat = 0.0;
  double lon = 0.0;
  double period = 60.0;

  friend bool operator==(const SensorSite&, const SensorSite&) = default;
};

/// One UTC day of minute values, values[s][minute] for sensor s of the request.
struct DayData {
  Date day{};
  std::vector<std::vector<std::optional<double>>> values;

  friend bool operator==(const DayData&, const DayData&) = default;
};

struct TrainRequest {
  std::string id;
  std::string farm;
  Date start{};
  Date end{};
  int epochs = 1;
  std::uint64_t seed = 42;
  int workers = 1;
  gridcast::ModelConfig model;
  std::optional<gridcast::GridSpec> grid;  // fitted from the sensor sites when absent
  gridcast::Windowing windowing = gridcast::Windowing::daylight;
  std::vector<SensorSite> sensors;
  std::vector<DayData> days;               // inline payload
  std::optional<std::string> store_root;   // datastore reference instead of inline days
  std::vector<std::uint8_t> base_checkpoint;

  friend bool operator==(const TrainRequest&, const TrainRequest&) = default;
};

struct TrainProgress {
  std::string id;
  gridcast::EpochMetrics metrics;

  friend bool operator==(const TrainProgress&, const TrainProgress&) = default;
};

struct TrainResult {
  std::string id;
  std::vector<std::uint8_t> checkpoint;
  std::vector<gridcast::EpochMetrics> metrics;
  double wall_seconds = 0.0;

  friend bool operator==(const TrainResult&, const TrainResult&) = default;
};

struct ErrorReply {
  std::string id;
  std::string message;

  friend bool operator==(const ErrorReply&, const ErrorReply&) = default;
};

using Message = std::variant<TrainRequest, TrainProgress, TrainResult, ErrorReply>;

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FrameTooLarge : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

class TruncatedFrame : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

/// Body parsed but its `type` is not one we know.
class UnsupportedMessage : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

/// 4-byte big-endian body length followed by a JSON body with a `type` field.
std::vector<std::uint8_t> encode_frame(const Message& m);

/// Decodes one complete frame; throws TruncatedFrame if `bytes` is shorter than the frame.
/// `consumed`, when given, receives the frame length.
Message decode_frame(std::span<const std::uint8_t> bytes, std::size_t* consumed = nullptr);

Message decode_body(std::string_view body);
std::uint32_t frame_length(std::span<const std::uint8_t, 4> header);

std::string to_base64(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> from_base64(std::string_view text);

}  // namespace heliofarm::trainsvc
