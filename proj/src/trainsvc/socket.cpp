#include "socket.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <fmt/format.h>

#include "heliofarm/trainsvc/service.hpp"

namespace heliofarm::trainsvc::net {

Socket::~Socket() {
  if (fd_ >= 0) ::close(fd_);
}

Socket& Socket::operator=(Socket&& o) noexcept {
  if (this != &o) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = o.release();
  }
  return *this;
}

namespace {

struct AddrInfo {
  addrinfo* head = nullptr;
  ~AddrInfo() {
    if (head) freeaddrinfo(head);
  }
};

void resolve(const std::string& host, std::uint16_t port, bool passive, AddrInfo& out) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  const std::string service = std::to_string(port);
  const int rc = getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &out.head);
  if (rc != 0) throw TransportError(fmt::format("cannot resolve '{}': {}", host, gai_strerror(rc)));
}

}  // namespace

Socket connect_to(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout) {
  AddrInfo ai;
  resolve(host, port, false, ai);
  std::string last_error = "no address";
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (addrinfo* a = ai.head; a != nullptr; a = a->ai_next) {
    Socket s(::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol));
    if (!s) continue;
    const int flags = fcntl(s.fd(), F_GETFL, 0);
    fcntl(s.fd(), F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(s.fd(), a->ai_addr, a->ai_addrlen);
    if (rc != 0 && errno != EINPROGRESS) {
      last_error = std::strerror(errno);
      continue;
    }
    if (rc != 0) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      pollfd p{s.fd(), POLLOUT, 0};
      rc = ::poll(&p, 1, static_cast<int>(std::max<long long>(0, left.count())));
      if (rc == 0) throw TransportError(fmt::format("connect to {}:{} timed out", host, port));
      int err = 0;
      socklen_t len = sizeof err;
      getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
      if (rc < 0 || err != 0) {
        last_error = std::strerror(rc < 0 ? errno : err);
        continue;
      }
    }
    fcntl(s.fd(), F_SETFL, flags);
    int one = 1;
    setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return s;
  }
  throw TransportError(fmt::format("cannot connect to {}:{}: {}", host, port, last_error));
}

Socket listen_on(const std::string& host, std::uint16_t port) {
  AddrInfo ai;
  resolve(host, port, true, ai);
  std::string last_error = "no address";
  for (addrinfo* a = ai.head; a != nullptr; a = a->ai_next) {
    Socket s(::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol));
    if (!s) continue;
    int one = 1;
    setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(s.fd(), a->ai_addr, a->ai_addrlen) == 0 && ::listen(s.fd(), 16) == 0) return s;
    last_error = std::strerror(errno);
  }
  throw TransportError(fmt::format("cannot bind {}:{}: {}", host, port, last_error));
}

std::uint16_t local_port(int fd) {
  sockaddr_storage addr{};
  socklen_t len = sizeof addr;
  getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  if (addr.ss_family == AF_INET6) return ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);
  return ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
}

bool send_all(int fd, const std::vector<std::uint8_t>& bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

ReadStatus read_exact(int fd, std::uint8_t* data, std::size_t size, std::chrono::milliseconds timeout) {
  std::size_t got = 0;
  while (got < size) {
    pollfd p{fd, POLLIN, 0};
    const int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (rc < 0 && errno == EINTR) continue;
    if (rc == 0) return ReadStatus::timeout;
    const ssize_t n = ::recv(fd, data + got, size - got, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return ReadStatus::closed;
    got += static_cast<std::size_t>(n);
  }
  return ReadStatus::ok;
}

ReadStatus read_frame(int fd, Message& out, std::chrono::milliseconds timeout) {
  std::uint8_t header[4];
  const auto hs = read_exact(fd, header, 4, timeout);
  if (hs != ReadStatus::ok) return hs;
  const std::uint32_t n = frame_length(std::span<const std::uint8_t, 4>(header, 4));
  if (n > kMaxFrameBytes) throw FrameTooLarge(fmt::format("frame length {} exceeds the limit", n));
  std::string body(n, '\0');
  const auto bs = read_exact(fd, reinterpret_cast<std::uint8_t*>(body.data()), n, timeout);
  if (bs == ReadStatus::closed) throw TruncatedFrame("connection closed in the middle of a frame");
  if (bs == ReadStatus::timeout) throw TruncatedFrame("timed out in the middle of a frame");
  out = decode_body(body);
  return ReadStatus::ok;
}

bool peer_closed(int fd) {
  char c;
  const ssize_t n = ::recv(fd, &c, 1, MSG_PEEK | MSG_DONTWAIT);
  if (n == 0) return true;
  if (n < 0) return errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR;
  return false;
}

}  // namespace heliofarm::trainsvc::net
