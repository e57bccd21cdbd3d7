#pragma once

// TCP transport for split execution: an edge client that never waits past an
// absolute deadline, and a server that plays the cloud tail.

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <cstring>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "edgesplit/error.hpp"
#include "edgesplit/runtime.hpp"
#include "edgesplit/wire.hpp"

namespace edgesplit {

using Clock = std::chrono::steady_clock;

class TransportError : public Error {
 public:
  using Error::Error;
};

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  int fd() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }
  void close() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }
  void shutdown() noexcept {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }

 private:
  int fd_ = -1;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

inline Endpoint parse_endpoint(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos) throw ArgumentError("expected host:port, got '" + s + "'");
  Endpoint e;
  e.host = s.substr(0, colon);
  const std::string_view digits = std::string_view(s).substr(colon + 1);
  unsigned port = 0;
  const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
  if (e.host.empty() || digits.empty() || ec != std::errc{} || end != digits.data() + digits.size() || port > 65535)
    throw ArgumentError("bad endpoint '" + s + "', expected host:port");
  e.port = static_cast<std::uint16_t>(port);
  return e;
}

namespace detail {

// poll() against an absolute deadline with nanosecond resolution.
inline int poll_until(pollfd& p, std::optional<Clock::time_point> deadline) {
  if (!deadline) return ::ppoll(&p, 1, nullptr, nullptr);
  const auto left = std::chrono::duration_cast<std::chrono::nanoseconds>(*deadline - Clock::now()).count();
  timespec ts{};
  if (left > 0) {
    ts.tv_sec = static_cast<time_t>(left / 1'000'000'000);
    ts.tv_nsec = static_cast<long>(left % 1'000'000'000);
  }
  return ::ppoll(&p, 1, &ts, nullptr);
}

inline sockaddr_in resolve(const Endpoint& e) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (int rc = ::getaddrinfo(e.host.c_str(), nullptr, &hints, &res); rc != 0 || !res)
    throw TransportError("cannot resolve '" + e.host + "': " + ::gai_strerror(rc));
  sockaddr_in addr = *reinterpret_cast<sockaddr_in*>(res->ai_addr);
  ::freeaddrinfo(res);
  addr.sin_port = htons(e.port);
  return addr;
}

// Send everything or give up at the deadline. Returns false on timeout or
// connection loss.
inline bool send_all(int fd, std::span<const std::uint8_t> data, std::optional<Clock::time_point> deadline) {
  std::size_t off = 0;
  while (off < data.size()) {
    if (deadline && Clock::now() >= *deadline) return false;
    pollfd p{fd, POLLOUT, 0};
    const int rc = poll_until(p, deadline);
    if (rc < 0 && errno == EINTR) continue;
    if (rc <= 0) return false;
    const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) continue;
      return false;
    }
    off += static_cast<std::size_t>(n);
  }
  return true;
}

enum class RecvStatus { Data, Timeout, Closed };

// Append whatever is available to `buf`, waiting at most until the deadline.
inline RecvStatus recv_some(int fd, std::vector<std::uint8_t>& buf, std::optional<Clock::time_point> deadline) {
  for (;;) {
    pollfd p{fd, POLLIN, 0};
    const int rc = poll_until(p, deadline);
    if (rc < 0 && errno == EINTR) continue;
    if (rc < 0) return RecvStatus::Closed;
    if (rc == 0) return RecvStatus::Timeout;
    std::uint8_t tmp[64 * 1024];
    const ssize_t n = ::recv(fd, tmp, sizeof tmp, 0);
    if (n < 0 && (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK)) continue;
    if (n <= 0) return RecvStatus::Closed;
    buf.insert(buf.end(), tmp, tmp + n);
    return RecvStatus::Data;
  }
}

inline void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// client

enum class ReplyStatus { Ok, Timeout };

struct OffloadReply {
  ReplyStatus status = ReplyStatus::Timeout;
  ControlOutput control;
  bool connection_lost = false;
};

class ClientConnection {
 public:
  static ClientConnection connect(const Endpoint& e, std::chrono::milliseconds timeout = std::chrono::seconds(5)) {
    Socket s(::socket(AF_INET, SOCK_STREAM, 0));
    if (!s.valid()) throw TransportError(std::string("socket: ") + std::strerror(errno));
    const sockaddr_in addr = detail::resolve(e);
    ::fcntl(s.fd(), F_SETFL, ::fcntl(s.fd(), F_GETFL) | O_NONBLOCK);
    if (::connect(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
      if (errno != EINPROGRESS) throw TransportError(std::string("connect: ") + std::strerror(errno));
      pollfd p{s.fd(), POLLOUT, 0};
      if (::poll(&p, 1, static_cast<int>(timeout.count())) <= 0) throw TransportError("connect timed out");
      int err = 0;
      socklen_t len = sizeof err;
      ::getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
      if (err != 0) throw TransportError(std::string("connect: ") + std::strerror(err));
    }
    detail::set_nodelay(s.fd());
    ClientConnection c;
    c.sock_ = std::move(s);
    return c;
  }

  bool connected() const noexcept { return sock_.valid(); }
  void close() { sock_.close(); }

  // Round trip of a ping frame, or nullopt on timeout.
  std::optional<double> ping(std::uint64_t id, Clock::time_point deadline) {
    if (!connected()) return std::nullopt;
    const auto t0 = Clock::now();
    if (!detail::send_all(sock_.fd(), wire::encode_ping(wire::MsgType::Ping, id), deadline)) return lost();
    for (;;) {
      while (auto frame = next_frame()) {
        if (wire::check_preamble(*frame) == wire::MsgType::Pong && wire::decode_ping(*frame) == id)
          return std::chrono::duration<double>(Clock::now() - t0).count();
      }
      const auto st = detail::recv_some(sock_.fd(), rx_, deadline);
      if (st == detail::RecvStatus::Timeout) return std::nullopt;
      if (st == detail::RecvStatus::Closed) return lost();
    }
  }

  // Sends `request` and waits for the matching response until `deadline`.
  // Responses for other timesteps are discarded. Never blocks past the
  // deadline; a lost connection reports Timeout.
  OffloadReply offload(const wire::RequestFrame& request, Clock::time_point deadline) {
    OffloadReply reply;
    if (!connected() || Clock::now() >= deadline) {
      reply.connection_lost = !connected();
      return reply;
    }
    if (!detail::send_all(sock_.fd(), wire::encode_request(request), deadline)) {
      // a partially written frame leaves the stream unusable
      sock_.close();
      reply.connection_lost = true;
      return reply;
    }
    for (;;) {
      try {
        while (auto frame = next_frame()) {
          if (wire::check_preamble(*frame) != wire::MsgType::Response) continue;
          const auto resp = wire::decode_response(*frame);
          if (resp.timestep != request.timestep) {
            ++discarded_;
            continue;
          }
          reply.status = ReplyStatus::Ok;
          reply.control = resp.control;
          return reply;
        }
      } catch (const FrameError&) {
        sock_.close();
        reply.connection_lost = true;
        return reply;
      }
      if (Clock::now() >= deadline) return reply;
      const auto st = detail::recv_some(sock_.fd(), rx_, deadline);
      if (st == detail::RecvStatus::Timeout) return reply;
      if (st == detail::RecvStatus::Closed) {
        sock_.close();
        reply.connection_lost = true;
        return reply;
      }
    }
  }

  std::size_t discarded_responses() const noexcept { return discarded_; }

 private:
  std::optional<std::vector<std::uint8_t>> next_frame() {
    const std::size_t len = wire::frame_length(rx_);
    if (len == 0 || rx_.size() < len) return std::nullopt;
    std::vector<std::uint8_t> f(rx_.begin(), rx_.begin() + static_cast<std::ptrdiff_t>(len));
    rx_.erase(rx_.begin(), rx_.begin() + static_cast<std::ptrdiff_t>(len));
    return f;
  }

  std::nullopt_t lost() {
    sock_.close();
    return std::nullopt;
  }

  Socket sock_;
  std::vector<std::uint8_t> rx_;
  std::size_t discarded_ = 0;
};

inline OffloadReply client_offload(ClientConnection& conn, const wire::RequestFrame& request,
                                   Clock::time_point deadline) {
  return conn.offload(request, deadline);
}

// Offload channel over a live connection. Phase timings are wall-clock; the
// transmit phase is the time spent writing the request.
class SocketChannel final : public OffloadChannel {
 public:
  explicit SocketChannel(ClientConnection& conn) : conn_(conn) {}

  OffloadOutcome offload(const OffloadAttempt& a) override {
    OffloadOutcome o;
    const auto t0 = Clock::now();
    const double budget = std::max(0.0, a.failsafe_at_s - a.tx_start_s);
    const auto deadline = t0 + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(budget));
    const OffloadReply reply = conn_.offload(*a.request, deadline);
    const double elapsed = std::min(budget, std::chrono::duration<double>(Clock::now() - t0).count());
    o.finish_s = a.tx_start_s + elapsed;
    if (reply.status == ReplyStatus::Ok) {
      o.responded = true;
      o.control = reply.control;
    }
    return o;
  }

 private:
  ClientConnection& conn_;
};

// ---------------------------------------------------------------------------
// server

struct ServerConfig {
  Endpoint listen;
  std::unordered_map<std::uint16_t, ServerModel> models;
  ServerFaults faults;
};

// Accepts connections on a background thread and serves each connection on
// its own thread. Requests on one connection are processed in order.
class OffloadServer {
 public:
  explicit OffloadServer(ServerConfig cfg) : cfg_(std::move(cfg)) {}
  OffloadServer(const OffloadServer&) = delete;
  OffloadServer& operator=(const OffloadServer&) = delete;
  ~OffloadServer() { stop(); }

  // Binds and starts accepting. Port 0 picks an ephemeral port.
  void start() {
    Socket s(::socket(AF_INET, SOCK_STREAM, 0));
    if (!s.valid()) throw TransportError(std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    const sockaddr_in addr = detail::resolve(cfg_.listen);
    if (::bind(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0)
      throw TransportError(std::string("bind: ") + std::strerror(errno));
    if (::listen(s.fd(), 16) != 0) throw TransportError(std::string("listen: ") + std::strerror(errno));
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
    listener_ = std::move(s);
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  std::uint16_t port() const noexcept { return port_; }
  std::size_t requests_served() const noexcept { return served_.load(); }

  void stop() {
    if (!running_.exchange(false)) return;
    if (accept_thread_.joinable()) accept_thread_.join();
    listener_.close();
    std::vector<std::thread> workers;
    {
      std::lock_guard lock(mu_);
      for (auto& c : conns_) c->shutdown();
      workers = std::move(workers_);
    }
    for (auto& w : workers)
      if (w.joinable()) w.join();
    std::lock_guard lock(mu_);
    conns_.clear();
  }

  // Blocks until `stop()` is called from elsewhere (or a signal handler flips
  // the flag passed in).
  void wait(const std::atomic<bool>& keep_running) {
    while (keep_running && running_) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }

 private:
  void accept_loop() {
    while (running_) {
      pollfd p{listener_.fd(), POLLIN, 0};
      if (::poll(&p, 1, 50) <= 0) continue;
      const int fd = ::accept(listener_.fd(), nullptr, nullptr);
      if (fd < 0) continue;
      detail::set_nodelay(fd);
      auto sock = std::make_shared<Socket>(fd);
      std::lock_guard lock(mu_);
      conns_.push_back(sock);
      workers_.emplace_back([this, sock] { serve_connection(*sock); });
    }
  }

  void serve_connection(Socket& sock) {
    std::vector<std::uint8_t> buf;
    while (running_) {
      std::size_t len = 0;
      try {
        len = wire::frame_length(buf);
      } catch (const FrameError&) {
        break;  // malformed: drop the connection
      }
      if (len == 0 || buf.size() < len) {
        const auto st = detail::recv_some(sock.fd(), buf, Clock::now() + std::chrono::milliseconds(100));
        if (st == detail::RecvStatus::Closed) break;
        continue;
      }
      std::vector<std::uint8_t> frame(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(len));
      buf.erase(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(len));
      try {
        if (!handle_frame(sock, frame)) break;
      } catch (const Error&) {
        break;
      }
    }
    sock.shutdown();
  }

  bool handle_frame(Socket& sock, std::span<const std::uint8_t> frame) {
    switch (wire::check_preamble(frame)) {
      case wire::MsgType::Ping:
        return detail::send_all(sock.fd(), wire::encode_ping(wire::MsgType::Pong, wire::decode_ping(frame)),
                                std::nullopt);
      case wire::MsgType::Request: break;
      default: return false;
    }
    const auto req = wire::decode_request(frame);
    auto it = cfg_.models.find(req.model_id);
    if (it == cfg_.models.end()) return false;

    const auto start = Clock::now();
    const ControlOutput control = evaluate_request(req, it->second.tail_seed);
    double hold = it->second.tail_latency_s;
    if (cfg_.faults.mode == FaultMode::Delay) hold += cfg_.faults.delay_s;
    std::this_thread::sleep_until(start + std::chrono::duration_cast<Clock::duration>(
                                              std::chrono::duration<double>(hold)));
    ++served_;
    if (cfg_.faults.mode == FaultMode::Drop) return true;
    return detail::send_all(sock.fd(), wire::encode_response({req.timestep, control}), std::nullopt);
  }

  ServerConfig cfg_;
  Socket listener_;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::atomic<std::size_t> served_{0};
  std::thread accept_thread_;
  std::mutex mu_;
  std::vector<std::shared_ptr<Socket>> conns_;
  std::vector<std::thread> workers_;
};

}  // namespace edgesplit
