#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "flynn/error.hpp"
#include "flynn/wire.hpp"

#ifndef _WIN32
#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>
#endif

namespace flynn {

using PartyId = std::uint32_t;

enum class MessageKind : std::uint8_t {
  kHello = 0x00,       // u32 sender id; TCP connection setup only
  kSeed = 0x01,        // u64 seed
  kLabelTable = 0x02,  // varint count + strings
  kCounts = 0x03,      // u32 classes, u32 bits, then u32 per entry
  kSparseCounts = 0x04,
  kAbort = 0x05,       // utf-8 reason
};

struct Message {
  MessageKind kind;
  Bytes payload;
};

// Every message travels as [kind:1][length:4 big-endian][payload]; the byte
// meters charge payload plus this 5-byte frame. Connection-setup hello
// frames (TCP only) are not metered, so in-process and TCP meters report the
// same protocol traffic.
inline constexpr std::size_t kFrameOverhead = 5;

struct ByteMeter {
  std::uint64_t sent = 0;
  std::uint64_t received = 0;
  std::uint64_t messages_sent = 0;
  std::uint64_t messages_received = 0;
};

// One party's view of the communication fabric. Messages between a fixed
// pair are delivered exactly once, in order.
class Endpoint {
 public:
  virtual ~Endpoint() = default;
  virtual PartyId id() const = 0;
  virtual void send(PartyId to, MessageKind kind, const Bytes& payload) = 0;
  virtual Message recv(PartyId from) = 0;
  virtual const ByteMeter& meter() const = 0;
};

// ---------------------------------------------------------------------------
// In-process transport: a hub of per-(sender, receiver) FIFO queues guarded
// by one mutex. Safe for tau concurrent party threads.
// ---------------------------------------------------------------------------

class InProcHub {
 public:
  explicit InProcHub(std::uint32_t parties,
                     std::chrono::milliseconds timeout =
                         std::chrono::seconds(30))
      : parties_(parties), timeout_(timeout), meters_(parties) {}

  std::uint32_t parties() const { return parties_; }

  void send(PartyId from, PartyId to, MessageKind kind, const Bytes& payload) {
    check_party(from);
    check_party(to);
    std::lock_guard lock(mutex_);
    if (aborted_) throw TransportError("federation aborted: " + abort_reason_);
    queues_[key(from, to)].push_back({kind, payload});
    meters_[from].sent += payload.size() + kFrameOverhead;
    ++meters_[from].messages_sent;
    cv_.notify_all();
  }

  Message recv(PartyId to, PartyId from) {
    check_party(from);
    check_party(to);
    std::unique_lock lock(mutex_);
    auto& queue = queues_[key(from, to)];
    if (!cv_.wait_for(lock, timeout_, [&] {
          return !queue.empty() || aborted_;
        }))
      throw TransportError("straggler: party " + std::to_string(to) +
                           " timed out waiting for party " +
                           std::to_string(from));
    if (queue.empty() && aborted_)
      throw TransportError("federation aborted: " + abort_reason_);
    Message msg = std::move(queue.front());
    queue.pop_front();
    meters_[to].received += msg.payload.size() + kFrameOverhead;
    ++meters_[to].messages_received;
    return msg;
  }

  // Wakes every blocked receiver with an error; used when one party fails so
  // the rest do not hang until the straggler timeout.
  void abort(const std::string& reason) {
    std::lock_guard lock(mutex_);
    if (!aborted_) {
      aborted_ = true;
      abort_reason_ = reason;
    }
    cv_.notify_all();
  }

  const ByteMeter& meter(PartyId party) const {
    check_party(party);
    return meters_[party];
  }

 private:
  std::uint64_t key(PartyId from, PartyId to) const {
    return std::uint64_t(from) * parties_ + to;
  }

  void check_party(PartyId p) const {
    if (p >= parties_)
      throw TransportError("party id " + std::to_string(p) + " out of range");
  }

  std::uint32_t parties_;
  std::chrono::milliseconds timeout_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::map<std::uint64_t, std::deque<Message>> queues_;
  std::vector<ByteMeter> meters_;
  bool aborted_ = false;
  std::string abort_reason_;
};

class InProcEndpoint final : public Endpoint {
 public:
  InProcEndpoint(std::shared_ptr<InProcHub> hub, PartyId id)
      : hub_(std::move(hub)), id_(id) {}

  PartyId id() const override { return id_; }

  void send(PartyId to, MessageKind kind, const Bytes& payload) override {
    hub_->send(id_, to, kind, payload);
  }

  Message recv(PartyId from) override { return hub_->recv(id_, from); }

  const ByteMeter& meter() const override { return hub_->meter(id_); }

 private:
  std::shared_ptr<InProcHub> hub_;
  PartyId id_;
};

#ifndef _WIN32

// ---------------------------------------------------------------------------
// TCP transport on loopback. Each party owns a listening socket; the first
// sender on a pair dials the peer and introduces itself with a hello frame,
// after which the connection carries both directions. The protocol's message
// pattern guarantees the first message on every pair flows child -> parent,
// so simultaneous dialing does not occur.
// ---------------------------------------------------------------------------

namespace detail {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  Socket& operator=(Socket&& other) noexcept {
    if (this != &other) {
      close_fd();
      fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close_fd(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }

  void write_all(const std::uint8_t* data, std::size_t size) const {
    std::size_t done = 0;
    while (done < size) {
      const auto n = ::send(fd_, data + done, size - done, MSG_NOSIGNAL);
      if (n <= 0) throw TransportError("tcp: send failed");
      done += static_cast<std::size_t>(n);
    }
  }

  void read_all(std::uint8_t* data, std::size_t size) const {
    std::size_t done = 0;
    while (done < size) {
      const auto n = ::recv(fd_, data + done, size - done, 0);
      if (n == 0) throw TransportError("tcp: peer closed connection");
      if (n < 0) throw TransportError("tcp: recv failed or timed out");
      done += static_cast<std::size_t>(n);
    }
  }

 private:
  void close_fd() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }
  int fd_ = -1;
};

inline void write_frame(const Socket& socket, MessageKind kind,
                        const Bytes& payload) {
  std::uint8_t header[kFrameOverhead];
  header[0] = static_cast<std::uint8_t>(kind);
  const auto len = static_cast<std::uint32_t>(payload.size());
  header[1] = (len >> 24) & 0xFF;
  header[2] = (len >> 16) & 0xFF;
  header[3] = (len >> 8) & 0xFF;
  header[4] = len & 0xFF;
  socket.write_all(header, sizeof header);
  if (!payload.empty()) socket.write_all(payload.data(), payload.size());
}

inline Message read_frame(const Socket& socket) {
  std::uint8_t header[kFrameOverhead];
  socket.read_all(header, sizeof header);
  Message msg;
  msg.kind = static_cast<MessageKind>(header[0]);
  const std::uint32_t len = (std::uint32_t(header[1]) << 24) |
                            (std::uint32_t(header[2]) << 16) |
                            (std::uint32_t(header[3]) << 8) |
                            std::uint32_t(header[4]);
  msg.payload.resize(len);
  if (len > 0) socket.read_all(msg.payload.data(), len);
  return msg;
}

}  // namespace detail

class TcpEndpoint final : public Endpoint {
 public:
  // Binds a loopback listener on an ephemeral port. Peer ports must be
  // registered (from the collected roster) before the first send/recv.
  TcpEndpoint(PartyId id, std::uint32_t parties,
              std::chrono::milliseconds timeout = std::chrono::seconds(30))
      : id_(id), parties_(parties), timeout_(timeout) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw TransportError("tcp: cannot create listener");
    listener_ = detail::Socket(fd);
    int reuse = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &reuse, sizeof reuse);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
      throw TransportError("tcp: bind failed");
    if (::listen(fd, static_cast<int>(parties)) != 0)
      throw TransportError("tcp: listen failed");
    socklen_t len = sizeof addr;
    if (::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0)
      throw TransportError("tcp: getsockname failed");
    port_ = ntohs(addr.sin_port);
  }

  std::uint16_t port() const { return port_; }

  void set_roster(std::vector<std::uint16_t> ports) {
    if (ports.size() != parties_)
      throw TransportError("tcp: roster size mismatch");
    ports_ = std::move(ports);
  }

  PartyId id() const override { return id_; }

  void send(PartyId to, MessageKind kind, const Bytes& payload) override {
    detail::Socket& conn = connection_for_send(to);
    detail::write_frame(conn, kind, payload);
    meter_.sent += payload.size() + kFrameOverhead;
    ++meter_.messages_sent;
  }

  Message recv(PartyId from) override {
    detail::Socket& conn = connection_for_recv(from);
    Message msg = detail::read_frame(conn);
    meter_.received += msg.payload.size() + kFrameOverhead;
    ++meter_.messages_received;
    if (msg.kind == MessageKind::kAbort)
      throw TransportError("federation aborted: " +
                           std::string(msg.payload.begin(),
                                       msg.payload.end()));
    return msg;
  }

  const ByteMeter& meter() const override { return meter_; }

 private:
  detail::Socket& connection_for_send(PartyId to) {
    std::lock_guard lock(mutex_);
    auto it = connections_.find(to);
    if (it != connections_.end()) return it->second;
    if (to >= ports_.size()) throw TransportError("tcp: unknown peer");
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw TransportError("tcp: cannot create socket");
    detail::Socket conn(fd);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(ports_[to]);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
      throw TransportError("tcp: connect to party " + std::to_string(to) +
                           " failed");
    configure(conn);
    ByteWriter hello;
    hello.u32(id_);
    detail::write_frame(conn, MessageKind::kHello, hello.take());
    return connections_.emplace(to, std::move(conn)).first->second;
  }

  detail::Socket& connection_for_recv(PartyId from) {
    std::unique_lock lock(mutex_);
    while (true) {
      auto it = connections_.find(from);
      if (it != connections_.end()) return it->second;
      // Accept the next inbound connection; its hello frame names the peer.
      lock.unlock();
      detail::Socket conn = accept_one();
      Message hello = detail::read_frame(conn);
      if (hello.kind != MessageKind::kHello || hello.payload.size() != 4)
        throw TransportError("tcp: malformed hello");
      const PartyId peer = ByteReader(hello.payload).u32();
      lock.lock();
      connections_.emplace(peer, std::move(conn));
    }
  }

  detail::Socket accept_one() {
    timeval tv{};
    tv.tv_sec = static_cast<long>(timeout_.count() / 1000);
    tv.tv_usec = static_cast<long>((timeout_.count() % 1000) * 1000);
    ::setsockopt(listener_.fd(), SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    fd_set fds;
    FD_ZERO(&fds);
    FD_SET(listener_.fd(), &fds);
    if (::select(listener_.fd() + 1, &fds, nullptr, nullptr, &tv) <= 0)
      throw TransportError("straggler: party " + std::to_string(id_) +
                           " timed out waiting for a connection");
    const int fd = ::accept(listener_.fd(), nullptr, nullptr);
    if (fd < 0) throw TransportError("tcp: accept failed");
    detail::Socket conn(fd);
    configure(conn);
    return conn;
  }

  void configure(const detail::Socket& conn) const {
    int nodelay = 1;
    ::setsockopt(conn.fd(), IPPROTO_TCP, TCP_NODELAY, &nodelay,
                 sizeof nodelay);
    timeval tv{};
    tv.tv_sec = static_cast<long>(timeout_.count() / 1000);
    tv.tv_usec = static_cast<long>((timeout_.count() % 1000) * 1000);
    ::setsockopt(conn.fd(), SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  }

  PartyId id_;
  std::uint32_t parties_;
  std::chrono::milliseconds timeout_;
  std::uint16_t port_ = 0;
  detail::Socket listener_;
  std::vector<std::uint16_t> ports_;
  std::mutex mutex_;
  std::map<PartyId, detail::Socket> connections_;
  ByteMeter meter_;
};

#endif  // !_WIN32

}  // namespace flynn
