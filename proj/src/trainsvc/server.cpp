#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

#include "heliofarm/core/log.hpp"
#include "heliofarm/core/text.hpp"
#include "heliofarm/trainsvc/service.hpp"
#include "socket.hpp"

namespace heliofarm::trainsvc {

namespace {

Timestamp wall_now() { return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()); }

}  // namespace

Endpoint parse_endpoint(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon + 1 == text.size()) {
    throw std::invalid_argument(fmt::format("endpoint '{}' must be host:port or 'local'", text));
  }
  const auto port = parse_int(text.substr(colon + 1));
  if (!port || *port < 0 || *port > 65535) throw std::invalid_argument(fmt::format("bad port in endpoint '{}'", text));
  std::string host(text.substr(0, colon));
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  return {host, static_cast<std::uint16_t>(*port)};
}

TrainServer::TrainServer(ServerOptions options) : options_(std::move(options)) {
  if (options_.concurrency < 1) throw std::invalid_argument("training concurrency must be at least 1");
}

TrainServer::~TrainServer() { stop(); }

std::uint16_t TrainServer::start() {
  const Endpoint ep = parse_endpoint(options_.bind);
  net::Socket s = net::listen_on(ep.host, ep.port);
  port_ = net::local_port(s.fd());
  listen_fd_ = s.release();
  acceptor_ = std::thread([this] { accept_loop(); });
  return port_;
}

void TrainServer::stop() {
  if (stopping_.exchange(true)) return;
  if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
  cv_.notify_all();
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
  listen_fd_ = -1;
  cv_.notify_all();
}

void TrainServer::wait() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return stopping_.load(); });
}

void TrainServer::accept_loop() {
  while (!stopping_) {
    pollfd p{listen_fd_, POLLIN, 0};
    const int rc = ::poll(&p, 1, 200);
    if (rc <= 0) continue;
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) continue;
    std::lock_guard lock(mu_);
    workers_.emplace_back([this, fd] { serve(fd); });
  }
}

bool TrainServer::acquire_slot(std::uint64_t ticket, int fd) {
  std::unique_lock lock(mu_);
  queue_.push_back(ticket);
  while (true) {
    if (stopping_ || net::peer_closed(fd)) {
      queue_.erase(std::find(queue_.begin(), queue_.end(), ticket));
      cv_.notify_all();
      return false;
    }
    if (queue_.front() == ticket && running_ < options_.concurrency) {
      queue_.pop_front();
      ++running_;
      cv_.notify_all();
      return true;
    }
    cv_.wait_for(lock, std::chrono::milliseconds(100));
  }
}

void TrainServer::release_slot() {
  std::lock_guard lock(mu_);
  --running_;
  cv_.notify_all();
}

void TrainServer::serve(int raw_fd) {
  net::Socket sock(raw_fd);
  const int fd = sock.fd();
  Message msg;
  try {
    if (net::read_frame(fd, msg, options_.idle_timeout) != net::ReadStatus::ok) return;
  } catch (const UnsupportedMessage& e) {
    net::send_all(fd, encode_frame(ErrorReply{"", fmt::format("unsupported: {}", e.what())}));
    return;
  } catch (const ProtocolError& e) {
    net::send_all(fd, encode_frame(ErrorReply{"", fmt::format("protocol error: {}", e.what())}));
    return;
  }
  auto* request = std::get_if<TrainRequest>(&msg);
  if (request == nullptr) {
    net::send_all(fd, encode_frame(ErrorReply{"", "unsupported: expected a TrainRequest"}));
    return;
  }

  std::uint64_t ticket;
  {
    std::lock_guard lock(mu_);
    ticket = next_ticket_++;
  }
  if (!acquire_slot(ticket, fd)) return;
  struct SlotGuard {
    TrainServer* server;
    ~SlotGuard() { server->release_slot(); }
  } guard{this};
  if (options_.on_job) options_.on_job(request->id, true);
  log::info(wall_now(), "trainsvc", "job {} started farm={} epochs={}", request->id, request->farm, request->epochs);

  bool dropped = false;
  std::optional<TrainResult> result;
  std::string failure;
  try {
    result = train_from_request(
        *request,
        [&](const TrainProgress& p) {
          if (!dropped && !net::send_all(fd, encode_frame(p))) dropped = true;
        },
        [&] { return dropped || stopping_ || (dropped = net::peer_closed(fd)); });
  } catch (const gridcast::TrainingAborted& e) {
    failure = e.what();
  } catch (const std::exception& e) {
    failure = e.what();
  }

  bool delivered = false;
  if (dropped) {
    log::warn(wall_now(), "trainsvc", "job {} aborted: client disconnected", request->id);
  } else if (result) {
    delivered = net::send_all(fd, encode_frame(*result));
  } else {
    net::send_all(fd, encode_frame(ErrorReply{request->id, failure}));
  }
  if (delivered && options_.persist_dir) {
    const auto dir = *options_.persist_dir / request->farm;
    std::filesystem::create_directories(dir);
    const auto tmp = dir / (request->id + ".ckpt.tmp");
    {
      std::ofstream out(tmp, std::ios::binary);
      out.write(reinterpret_cast<const char*>(result->checkpoint.data()),
                static_cast<std::streamsize>(result->checkpoint.size()));
    }
    std::filesystem::rename(tmp, dir / (request->id + ".ckpt"));
  }
  log::info(wall_now(), "trainsvc", "job {} finished delivered={}", request->id, delivered);
  if (options_.on_job) options_.on_job(request->id, false);
}

TrainResult remote_train(std::string_view endpoint, const TrainRequest& request, const ProgressFn& progress,
                         const ClientOptions& options) {
  if (endpoint == "local") return train_from_request(request, progress);
  const Endpoint ep = parse_endpoint(endpoint);
  net::Socket sock = net::connect_to(ep.host, ep.port, options.connect_timeout);
  if (!net::send_all(sock.fd(), encode_frame(request))) throw TransportError("connection lost while sending request");
  while (true) {
    Message msg;
    net::ReadStatus st;
    try {
      st = net::read_frame(sock.fd(), msg, options.idle_timeout);
    } catch (const ProtocolError& e) {
      throw TransportError(fmt::format("bad frame from {}: {}", endpoint, e.what()));
    }
    if (st == net::ReadStatus::timeout) throw TransportError(fmt::format("no frame from {} within the idle timeout", endpoint));
    if (st == net::ReadStatus::closed) throw TransportError(fmt::format("{} closed the connection early", endpoint));
    if (auto* p = std::get_if<TrainProgress>(&msg)) {
      if (progress) progress(*p);
    } else if (auto* r = std::get_if<TrainResult>(&msg)) {
      return std::move(*r);
    } else if (auto* e = std::get_if<ErrorReply>(&msg)) {
      throw RemoteError(e->message);
    } else {
      throw TransportError("unexpected message from training service");
    }
  }
}

}  // namespace heliofarm::trainsvc
