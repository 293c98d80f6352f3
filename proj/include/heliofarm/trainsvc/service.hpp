#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "heliofarm/store/datastore.hpp"
#include "heliofarm/trainsvc/protocol.hpp"

namespace heliofarm::trainsvc {

using ProgressFn = std::function<void(const TrainProgress&)>;

/// Minute matrices (midnight to midnight) for days [start, end] of `farm`: raw readings with
/// repaired estimates laid over them.
std::vector<MinuteMatrix> load_training_days(Datastore& store, const FarmLayout& layout, Date start, Date end);

/// Inline payload for `days`, sensors in layout order.
std::vector<DayData> to_day_data(std::span<const MinuteMatrix> days);

/// The training job both endpoints run. `cancelled` is polled between minibatches.
TrainResult train_from_request(const TrainRequest& request, const ProgressFn& progress = {},
                               const std::function<bool()>& cancelled = {});

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The service answered with an ErrorReply.
class RemoteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
};

/// Parses `host:port`; throws std::invalid_argument.
Endpoint parse_endpoint(std::string_view text);

struct ClientOptions {
  std::chrono::milliseconds connect_timeout{10'000};
  std::chrono::milliseconds idle_timeout{120'000};
};

/// `local` trains in-process; `host:port` exchanges frames with a training service.
TrainResult remote_train(std::string_view endpoint, const TrainRequest& request, const ProgressFn& progress = {},
                         const ClientOptions& options = {});

struct ServerOptions {
  std::string bind = "127.0.0.1:0";
  int concurrency = 2;
  std::chrono::milliseconds idle_timeout{120'000};
  /// When set, checkpoints are written to `<persist_dir>/<farm>/<id>.ckpt` after the result is delivered.
  std::optional<std::filesystem::path> persist_dir;
  /// Called when a job starts and when it ends (after the terminal frame); useful for tests and logs.
  std::function<void(const std::string& id, bool started)> on_job;
};

class TrainServer {
 public:
  explicit TrainServer(ServerOptions options);
  ~TrainServer();

  TrainServer(const TrainServer&) = delete;
  TrainServer& operator=(const TrainServer&) = delete;

  /// Binds and starts accepting; returns the bound port.
  std::uint16_t start();
  void stop();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();
  std::uint16_t port() const { return port_; }

 private:
  void accept_loop();
  void serve(int fd);
  bool acquire_slot(std::uint64_t ticket, int fd);
  void release_slot();

  ServerOptions options_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::thread> workers_;
  std::uint64_t next_ticket_ = 0;
  std::deque<std::uint64_t> queue_;
  int running_ = 0;
};

}  // namespace heliofarm::trainsvc
