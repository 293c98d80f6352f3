#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "heliofarm/trainsvc/protocol.hpp"

namespace heliofarm::trainsvc::net {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& o) noexcept : fd_(o.release()) {}
  Socket& operator=(Socket&& o) noexcept;

  int fd() const { return fd_; }
  int release() {
    const int fd = fd_;
    fd_ = -1;
    return fd;
  }
  explicit operator bool() const { return fd_ >= 0; }

 private:
  int fd_ = -1;
};

/// Connects with a deadline; throws TransportError.
Socket connect_to(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout);

/// Listening socket on host:port (port 0 picks a free one).
Socket listen_on(const std::string& host, std::uint16_t port);
std::uint16_t local_port(int fd);

/// Sends the whole buffer; false when the peer is gone.
bool send_all(int fd, const std::vector<std::uint8_t>& bytes);

enum class ReadStatus { ok, closed, timeout };

/// Reads exactly bytes.size() bytes, waiting at most `timeout` for each chunk.
ReadStatus read_exact(int fd, std::uint8_t* data, std::size_t size, std::chrono::milliseconds timeout);

/// Reads one frame. Throws TruncatedFrame when the peer closes mid-frame, FrameTooLarge, or
/// ProtocolError; returns ReadStatus::closed / timeout with no message otherwise.
ReadStatus read_frame(int fd, Message& out, std::chrono::milliseconds timeout);

/// True when the peer has closed its end (non-blocking check).
bool peer_closed(int fd);

}  // namespace heliofarm::trainsvc::net
