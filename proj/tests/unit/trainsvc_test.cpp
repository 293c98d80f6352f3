#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <filesystem>
#include <future>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "heliofarm/farm/synth.hpp"
#include "heliofarm/trainsvc/service.hpp"

namespace {

using namespace heliofarm;
using namespace heliofarm::trainsvc;

TrainRequest tiny_request(int epochs, const std::string& id = "job-1") {
  farm::FarmSpec spec = farm::almeria_spec();
  spec.sensors = 6;
  const auto synth = farm::synth_generate(spec, parse_date("2010-06-01"), parse_date("2010-06-01"), 3);
  std::vector<SensorReading> rows;
  for (const auto& [sid, s] : synth.data.series) {
    for (std::size_t i = 0; i < s.size(); ++i) rows.push_back({spec.farm, sid, s.at[i], s.ghi[i]});
  }
  const std::vector<MinuteMatrix> days{resample_minutes(rows, synth.layout, Timestamp{parse_date("2010-06-01")}, 1440)};
  TrainRequest r;
  r.id = id;
  r.farm = spec.farm;
  r.start = r.end = parse_date("2010-06-01");
  r.epochs = epochs;
  r.seed = 42;
  r.model.height = r.model.width = 4;
  r.model.filters = 2;
  for (const auto& s : synth.layout.sensors) r.sensors.push_back({s.id, s.lat, s.lon, s.period});
  r.days = to_day_data(days);
  return r;
}

int raw_connect(std::uint16_t port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in a{};
  a.sin_family = AF_INET;
  a.sin_port = htons(port);
  a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  EXPECT_EQ(::connect(fd, reinterpret_cast<sockaddr*>(&a), sizeof a), 0);
  return fd;
}

std::vector<std::uint8_t> read_some(int fd) {
  std::vector<std::uint8_t> all;
  std::uint8_t buf[4096];
  ssize_t n;
  while ((n = ::recv(fd, buf, sizeof buf, 0)) > 0) all.insert(all.end(), buf, buf + n);
  return all;
}

TEST(Codec, RoundTripsEveryMessage) {
  TrainRequest minimal;
  minimal.id = "r";
  minimal.farm = "Oahu";
  minimal.start = minimal.end = parse_date("2010-06-01");
  EXPECT_EQ(std::get<TrainRequest>(decode_frame(encode_frame(minimal))), minimal);

  TrainRequest full = tiny_request(2);
  full.days[0].values[0][3] = std::nullopt;
  full.grid = gridcast::GridSpec{4, 4, 1.5, 2.5, -3, -2};
  full.windowing = gridcast::Windowing::continuous;
  full.base_checkpoint = {0, 1, 2, 250, 251};
  full.seed = 0xFFFF'FFFF'FFFF'FFF0ull;
  EXPECT_EQ(std::get<TrainRequest>(decode_frame(encode_frame(full))), full);

  TrainRequest ref = minimal;
  ref.store_root = "/tmp/store";
  EXPECT_EQ(std::get<TrainRequest>(decode_frame(encode_frame(ref))), ref);

  const TrainProgress p{"r", {3, 0.125, 0.0625}};
  EXPECT_EQ(std::get<TrainProgress>(decode_frame(encode_frame(p))), p);
  const TrainResult res{"r", {9, 8, 7}, {{1, 0.3, 0.2}, {2, 0.1 + 0.2, 1e-300}}, 1.25};
  EXPECT_EQ(std::get<TrainResult>(decode_frame(encode_frame(res))), res);
  const ErrorReply e{"r", "boom"};
  EXPECT_EQ(std::get<ErrorReply>(decode_frame(encode_frame(e))), e);
}

TEST(Codec, FramingErrors) {
  auto bytes = encode_frame(ErrorReply{"x", "y"});
  EXPECT_EQ(bytes[0], 0);
  EXPECT_EQ(frame_length(std::span<const std::uint8_t, 4>(bytes.data(), 4)), bytes.size() - 4);
  // Header claims 100 bytes, 50 arrive.
  std::vector<std::uint8_t> truncated{0, 0, 0, 100};
  truncated.resize(54, '{');
  EXPECT_THROW(decode_frame(truncated), TruncatedFrame);
  const std::vector<std::uint8_t> huge{0x10, 0x00, 0x00, 0x01};
  EXPECT_THROW(decode_frame(huge), FrameTooLarge);
  const std::string bad = R"({"type":"Bogus"})";
  EXPECT_THROW(decode_body(bad), UnsupportedMessage);
  EXPECT_THROW(decode_body("not json"), ProtocolError);
  EXPECT_THROW(decode_body(R"({"type":"TrainProgress"})"), ProtocolError);
}

TEST(Endpoint, Parse) {
  const auto e = parse_endpoint("127.0.0.1:7000");
  EXPECT_EQ(e.host, "127.0.0.1");
  EXPECT_EQ(e.port, 7000);
  EXPECT_THROW(parse_endpoint("nohost"), std::invalid_argument);
  EXPECT_THROW(parse_endpoint("h:99999"), std::invalid_argument);
}

TEST(Service, ProgressCadenceAndLocalEquivalence) {
  TrainServer server({});
  const auto port = server.start();
  const auto request = tiny_request(3);
  std::vector<int> epochs;
  const auto remote = remote_train(fmt::format("127.0.0.1:{}", port), request,
                                   [&](const TrainProgress& p) { epochs.push_back(p.metrics.epoch); });
  EXPECT_EQ(epochs, (std::vector<int>{1, 2, 3}));
  const auto local = remote_train("local", request);
  EXPECT_EQ(remote.checkpoint, local.checkpoint);
  EXPECT_EQ(remote.metrics, local.metrics);
  EXPECT_EQ(remote.metrics.size(), 3u);
  EXPECT_NO_THROW(gridcast::decode_checkpoint(remote.checkpoint));
}

TEST(Service, OneEpochOneMetric) {
  EXPECT_EQ(remote_train("local", tiny_request(1)).metrics.size(), 1u);
}

TEST(Service, UnknownTypeGetsUnsupportedReply) {
  TrainServer server({});
  const auto port = server.start();
  const int fd = raw_connect(port);
  const std::string body = R"({"type":"Bogus","id":"z"})";
  std::vector<std::uint8_t> frame{0, 0, 0, static_cast<std::uint8_t>(body.size())};
  frame.insert(frame.end(), body.begin(), body.end());
  ASSERT_EQ(::send(fd, frame.data(), frame.size(), 0), static_cast<ssize_t>(frame.size()));
  const auto reply = read_some(fd);
  ::close(fd);
  const auto msg = decode_frame(reply);
  ASSERT_TRUE(std::holds_alternative<ErrorReply>(msg));
  EXPECT_NE(std::get<ErrorReply>(msg).message.find("unsupported"), std::string::npos);
}

TEST(Service, TrainingFailureIsReported) {
  TrainServer server({});
  const auto port = server.start();
  auto bad = tiny_request(1);
  bad.days[0].values.pop_back();
  EXPECT_THROW(remote_train(fmt::format("127.0.0.1:{}", port), bad), RemoteError);
}

TEST(Service, FifoWithCapOne) {
  std::mutex mu;
  std::vector<std::string> events;
  ServerOptions opts;
  opts.concurrency = 1;
  opts.on_job = [&](const std::string& id, bool started) {
    std::lock_guard lock(mu);
    events.push_back((started ? "start " : "end ") + id);
  };
  TrainServer server(opts);
  const auto port = server.start();
  const auto ep = fmt::format("127.0.0.1:{}", port);
  auto first = std::async(std::launch::async, [&] { return remote_train(ep, tiny_request(3, "A")); });
  // Make sure A is queued first.
  for (int i = 0; i < 200; ++i) {
    {
      std::lock_guard lock(mu);
      if (!events.empty()) break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  auto second = std::async(std::launch::async, [&] { return remote_train(ep, tiny_request(1, "B")); });
  first.get();
  second.get();
  server.stop();
  EXPECT_EQ(events, (std::vector<std::string>{"start A", "end A", "start B", "end B"}));
}

TEST(Service, DroppedConnectionPersistsNothing) {
  const auto dir = std::filesystem::temp_directory_path() / "heliofarm_persist";
  std::filesystem::remove_all(dir);
  std::promise<void> ended;
  ServerOptions opts;
  opts.persist_dir = dir;
  opts.on_job = [&](const std::string& id, bool started) {
    if (!started && id == "drop") ended.set_value();
  };
  TrainServer server(opts);
  const auto port = server.start();
  const int fd = raw_connect(port);
  const auto frame = encode_frame(tiny_request(50, "drop"));
  ASSERT_EQ(::send(fd, frame.data(), frame.size(), 0), static_cast<ssize_t>(frame.size()));
  std::uint8_t header[4];
  ASSERT_EQ(::recv(fd, header, 4, MSG_WAITALL), 4);  // first progress frame: training is running
  ::close(fd);
  ASSERT_EQ(ended.get_future().wait_for(std::chrono::seconds(60)), std::future_status::ready);
  EXPECT_FALSE(std::filesystem::exists(dir / "Almeria" / "drop.ckpt"));

  // A completed exchange does persist.
  remote_train(fmt::format("127.0.0.1:{}", port), tiny_request(1, "keep"));
  server.stop();
  EXPECT_TRUE(std::filesystem::exists(dir / "Almeria" / "keep.ckpt"));
}

TEST(Service, UnreachableEndpointFailsFast) {
  // Bind a port, then close it so nothing listens there.
  std::uint16_t port;
  {
    TrainServer s({});
    port = s.start();
  }
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_THROW(remote_train(fmt::format("127.0.0.1:{}", port), tiny_request(1)), TransportError);
  EXPECT_LT(std::chrono::steady_clock::now() - t0, std::chrono::seconds(10));
}

}  // namespace
