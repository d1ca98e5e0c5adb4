#include "mcdup/tunnel.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <limits>

#include "mcdup/emulator.hpp"

namespace mcdup {

namespace {

constexpr std::uint8_t kOpHello = 1;
constexpr std::uint8_t kOpDownlinkLoad = 2;
constexpr std::size_t kReceiptEntry = 32;
constexpr std::size_t kReceiptsPerDatagram = 40;
constexpr std::size_t kRecvBuffer = 65536;

void put_be(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_be(const std::uint8_t* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v = (v << 8) | p[i];
  return v;
}

std::uint64_t double_bits(double d) {
  std::uint64_t u;
  std::memcpy(&u, &d, sizeof u);
  return u;
}

double bits_double(std::uint64_t u) {
  double d;
  std::memcpy(&d, &u, sizeof d);
  return d;
}

std::int64_t since(std::chrono::steady_clock::time_point epoch) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - epoch).count();
}

bool same_addr(const sockaddr_in& a, const sockaddr_in& b) {
  return a.sin_addr.s_addr == b.sin_addr.s_addr && a.sin_port == b.sin_port;
}

// Waits until one of the fds is readable or the timeout passes.
void wait_readable(std::vector<pollfd>& fds, std::int64_t timeout_ns) {
  timeout_ns = std::max<std::int64_t>(0, timeout_ns);
  timespec ts{static_cast<time_t>(timeout_ns / 1'000'000'000), static_cast<long>(timeout_ns % 1'000'000'000)};
  for (auto& f : fds) f.revents = 0;
  if (ppoll(fds.data(), fds.size(), &ts, nullptr) < 0 && errno != EINTR) {
    throw TransportError(std::string("poll failed: ") + std::strerror(errno));
  }
}

}  // namespace

sockaddr_in parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) throw ConfigError("endpoint must be host:port, got '" + text + "'");
  sockaddr_in a{};
  a.sin_family = AF_INET;
  std::string host = text.substr(0, colon);
  if (host.empty() || host == "*") host = "0.0.0.0";
  if (host == "localhost") host = "127.0.0.1";
  if (inet_pton(AF_INET, host.c_str(), &a.sin_addr) != 1) throw ConfigError("bad IPv4 address '" + host + "'");
  int port = 0;
  try {
    port = std::stoi(text.substr(colon + 1));
  } catch (const std::logic_error&) {
    throw ConfigError("bad port in '" + text + "'");
  }
  if (port < 0 || port > 65535) throw ConfigError("bad port in '" + text + "'");
  a.sin_port = htons(static_cast<std::uint16_t>(port));
  return a;
}

std::string format_endpoint(const sockaddr_in& a) {
  char buf[INET_ADDRSTRLEN];
  inet_ntop(AF_INET, &a.sin_addr, buf, sizeof buf);
  return std::string(buf) + ":" + std::to_string(ntohs(a.sin_port));
}

UdpSocket::UdpSocket(const sockaddr_in& bind_addr) {
  fd_ = ::socket(AF_INET, SOCK_DGRAM | SOCK_NONBLOCK | SOCK_CLOEXEC, 0);
  if (fd_ < 0) throw TransportError(std::string("socket: ") + std::strerror(errno));
  const int buf = 4 << 20;
  ::setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &buf, sizeof buf);
  ::setsockopt(fd_, SOL_SOCKET, SO_SNDBUF, &buf, sizeof buf);
  if (::bind(fd_, reinterpret_cast<const sockaddr*>(&bind_addr), sizeof bind_addr) < 0) {
    const std::string msg = std::strerror(errno);
    ::close(fd_);
    fd_ = -1;
    throw TransportError("bind " + format_endpoint(bind_addr) + ": " + msg);
  }
}

UdpSocket::~UdpSocket() {
  if (fd_ >= 0) ::close(fd_);
}

UdpSocket::UdpSocket(UdpSocket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

UdpSocket& UdpSocket::operator=(UdpSocket&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

sockaddr_in UdpSocket::local() const {
  sockaddr_in a{};
  socklen_t len = sizeof a;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&a), &len);
  return a;
}

bool UdpSocket::send_to(const std::uint8_t* data, std::size_t len, const sockaddr_in& to) {
  const auto n = ::sendto(fd_, data, len, 0, reinterpret_cast<const sockaddr*>(&to), sizeof to);
  return n == static_cast<ssize_t>(len);
}

long UdpSocket::receive(std::uint8_t* buf, std::size_t cap, sockaddr_in& from) {
  socklen_t len = sizeof from;
  const auto n = ::recvfrom(fd_, buf, cap, 0, reinterpret_cast<sockaddr*>(&from), &len);
  return n < 0 ? -1 : static_cast<long>(n);
}

// ---------------------------------------------------------------- server

TunnelServer::TunnelServer(std::vector<ServerPath> paths, std::size_t dedup_window)
    : epoch_(std::chrono::steady_clock::now()), dedup_(dedup_window) {
  if (paths.empty()) throw ConfigError("tunnel server needs at least one path");
  std::vector<std::string> names;
  for (auto& p : paths) {
    Path path;
    path.name = p.name;
    path.socket = UdpSocket(parse_endpoint(p.bind));
    names.push_back(p.name);
    paths_.push_back(std::move(path));
  }
  accounting_ = LinkShareAccounting(names);
}

std::vector<sockaddr_in> TunnelServer::local_endpoints() const {
  std::vector<sockaddr_in> out;
  for (const auto& p : paths_) out.push_back(p.socket.local());
  return out;
}

std::int64_t TunnelServer::now_ns() const { return since(epoch_); }

void TunnelServer::handle_control(std::size_t path, const TunnelFrame& frame, const sockaddr_in& from) {
  const auto& pl = frame.payload;
  if (pl.empty()) return;
  if (pl[0] == kOpHello) {
    TunnelFrame ack;
    ack.kind = FrameKind::ProbeReply;
    ack.flow_id = kControlFlowId;
    ack.seq = frame.seq;
    ack.send_ts_ns = frame.send_ts_ns;
    ack.payload = {kOpHello, kProtocolRevision, static_cast<std::uint8_t>(path)};
    ack.payload.insert(ack.payload.end(), paths_[path].name.begin(), paths_[path].name.end());
    encode_frame_into(ack, wire_);
    paths_[path].socket.send_to(wire_.data(), wire_.size(), from);
    return;
  }
  if (pl[0] == kOpDownlinkLoad && pl.size() >= 1 + 8 + 4 + 8 + 4 + 8 + 8) {
    const std::uint8_t* p = pl.data() + 1;
    DownlinkLoad load;
    load.request_id = get_be(p, 8);
    load.flow_id = static_cast<std::uint32_t>(get_be(p + 8, 4));
    const double target = bits_double(get_be(p + 12, 8));
    load.payload_bytes = static_cast<std::size_t>(get_be(p + 20, 4));
    load.frames = get_be(p + 24, 8);
    const std::uint64_t mask = get_be(p + 32, 8);
    if (seen_requests_.count(load.request_id)) return;
    seen_requests_[load.request_id] = true;
    if (!(target > 0.0) || load.payload_bytes > kMaxPayload) return;
    for (std::size_t i = 0; i < paths_.size() && i < 64; ++i) {
      if (mask & (std::uint64_t{1} << i)) load.paths.push_back(i);
    }
    load.interval_ns = static_cast<double>(load.payload_bytes) * 8.0 / target * 1e3;
    load.start_ns = now_ns();
    loads_.push_back(load);
  }
}

void TunnelServer::handle(std::size_t path, const std::uint8_t* data, std::size_t len, const sockaddr_in& from) {
  ++stats_.datagrams;
  TunnelFrame frame;
  try {
    frame = decode_frame(std::span<const std::uint8_t>(data, len));
  } catch (const FrameError&) {
    ++stats_.malformed;
    return;
  }
  Path& p = paths_[path];
  if (!p.peer || !same_addr(*p.peer, from)) p.peer = from;

  if (frame.flow_id == kControlFlowId) {
    if (frame.kind == FrameKind::ProbeRequest) handle_control(path, frame, from);
    return;
  }
  if (frame.kind == FrameKind::ProbeRequest) {
    if (frame.flow_id != kMonitorFlowId) on_copy_arrival(dedup_, accounting_, path, frame, now_ns());
    frame.kind = FrameKind::ProbeReply;
    encode_frame_into(frame, wire_);
    if (p.socket.send_to(wire_.data(), wire_.size(), from)) ++stats_.echoed;
    return;
  }
  if (frame.kind == FrameKind::Load) {
    const std::int64_t rx = now_ns();
    if (!on_copy_arrival(dedup_, accounting_, path, frame, rx).accepted()) return;
    ++stats_.load_accepted;
    put_be(p.receipts, frame.seq, 8);
    put_be(p.receipts, frame.send_ts_ns, 8);
    put_be(p.receipts, static_cast<std::uint64_t>(rx), 8);
    put_be(p.receipts, frame.flow_id, 4);
    put_be(p.receipts, frame.payload.size(), 2);
    put_be(p.receipts, path, 1);
    put_be(p.receipts, 0, 1);
    if (p.receipts.size() >= kReceiptEntry * kReceiptsPerDatagram) flush_receipts();
  }
}

void TunnelServer::flush_receipts() {
  for (auto& p : paths_) {
    if (p.receipts.empty() || !p.peer) continue;
    std::size_t off = 0;
    while (off < p.receipts.size()) {
      const std::size_t n = std::min(p.receipts.size() - off, kReceiptEntry * kReceiptsPerDatagram);
      TunnelFrame r;
      r.kind = FrameKind::ProbeReply;
      r.flow_id = kReceiptFlowId;
      r.seq = p.receipt_seq++;
      r.send_ts_ns = static_cast<std::uint64_t>(now_ns());
      r.payload.assign(p.receipts.begin() + static_cast<long>(off), p.receipts.begin() + static_cast<long>(off + n));
      encode_frame_into(r, wire_);
      p.socket.send_to(wire_.data(), wire_.size(), *p.peer);
      off += n;
    }
    p.receipts.clear();
  }
}

std::optional<std::int64_t> TunnelServer::pump_loads() {
  std::optional<std::int64_t> next;
  const std::int64_t now = now_ns();
  TunnelFrame frame;
  frame.kind = FrameKind::Load;
  for (auto& load : loads_) {
    frame.flow_id = load.flow_id;
    frame.payload.assign(load.payload_bytes, 0);
    while (load.sent < load.frames) {
      const std::int64_t due =
          load.start_ns + static_cast<std::int64_t>(std::llround(static_cast<double>(load.sent) * load.interval_ns));
      if (due > now) {
        next = next ? std::min(*next, due) : due;
        break;
      }
      frame.seq = load.sent;
      frame.send_ts_ns = static_cast<std::uint64_t>(std::max(due, std::int64_t{0}));
      encode_frame_into(frame, wire_);
      for (std::size_t path : load.paths) {
        if (paths_[path].peer) paths_[path].socket.send_to(wire_.data(), wire_.size(), *paths_[path].peer);
      }
      ++load.sent;
      ++stats_.load_sent;
    }
  }
  loads_.erase(std::remove_if(loads_.begin(), loads_.end(), [](const DownlinkLoad& l) { return l.sent >= l.frames; }),
               loads_.end());
  return next;
}

void TunnelServer::run(const std::atomic<bool>& stop, std::optional<std::chrono::nanoseconds> duration) {
  std::vector<pollfd> fds;
  for (const auto& p : paths_) fds.push_back(pollfd{p.socket.fd(), POLLIN, 0});
  const std::int64_t end = duration ? now_ns() + duration->count() : std::numeric_limits<std::int64_t>::max();
  std::vector<std::uint8_t> buf(kRecvBuffer);
  while (!stop.load(std::memory_order_relaxed) && now_ns() < end) {
    const auto next_load = pump_loads();
    std::int64_t wait = 50'000'000;
    if (next_load) wait = std::min(wait, *next_load - now_ns());
    wait = std::min(wait, end - now_ns());
    wait_readable(fds, wait);
    for (std::size_t i = 0; i < paths_.size(); ++i) {
      if (!(fds[i].revents & POLLIN)) continue;
      sockaddr_in from{};
      long n;
      while ((n = paths_[i].socket.receive(buf.data(), buf.size(), from)) >= 0) {
        handle(i, buf.data(), static_cast<std::size_t>(n), from);
      }
    }
    flush_receipts();
  }
}

// ---------------------------------------------------------------- client

TunnelClient::TunnelClient(std::vector<ClientPath> paths, std::chrono::milliseconds handshake_timeout,
                           std::size_t dedup_window)
    : epoch_(std::chrono::steady_clock::now()), dedup_(dedup_window) {
  if (paths.empty()) throw ConfigError("tunnel client needs at least one path");
  if (paths.size() > 64) throw ConfigError("at most 64 tunnel paths");
  for (auto& c : paths) {
    if (!(c.egress_delay_ms >= 0.0)) throw ConfigError("egress delay must be >= 0");
    Path p;
    p.remote = parse_endpoint(c.remote);
    p.socket = UdpSocket(parse_endpoint(c.bind));
    p.delay_ns = static_cast<std::int64_t>(std::llround(c.egress_delay_ms * 1e6));
    names_.push_back(c.name);
    p.config = std::move(c);
    paths_.push_back(std::move(p));
  }
  client_accounting_ = LinkShareAccounting(names_);
  server_accounting_ = LinkShareAccounting(names_);
  hello_ok_.assign(paths_.size(), false);
  handshake(handshake_timeout);
}

std::int64_t TunnelClient::now_ns() { return since(epoch_); }

void TunnelClient::transmit(std::size_t path, const std::vector<std::uint8_t>& bytes) {
  Path& p = paths_.at(path);
  if (p.delay_ns == 0) {
    p.socket.send_to(bytes.data(), bytes.size(), p.remote);
  } else {
    p.delayed.push_back(Delayed{now_ns() + p.delay_ns, bytes});
  }
}

void TunnelClient::release_due() {
  const std::int64_t now = now_ns();
  for (auto& p : paths_) {
    while (!p.delayed.empty() && p.delayed.front().release_ns <= now) {
      const auto& d = p.delayed.front();
      p.socket.send_to(d.bytes.data(), d.bytes.size(), p.remote);
      p.delayed.pop_front();
    }
  }
}

void TunnelClient::handshake(std::chrono::milliseconds timeout) {
  const std::int64_t give_up = now_ns() + std::chrono::duration_cast<std::chrono::nanoseconds>(timeout).count();
  std::int64_t next_hello = 0;
  while (true) {
    if (std::all_of(hello_ok_.begin(), hello_ok_.end(), [](bool b) { return b; })) break;
    const std::int64_t now = now_ns();
    if (now >= give_up) {
      std::string missing;
      for (std::size_t i = 0; i < paths_.size(); ++i) {
        if (!hello_ok_[i]) missing += (missing.empty() ? "" : ", ") + names_[i] + " (" + paths_[i].config.remote + ")";
      }
      throw TransportError("no answer from tunnel server on path " + missing);
    }
    if (now >= next_hello) {
      for (std::size_t i = 0; i < paths_.size(); ++i) {
        if (hello_ok_[i]) continue;
        TunnelFrame hello;
        hello.kind = FrameKind::ProbeRequest;
        hello.flow_id = kControlFlowId;
        hello.seq = control_seq_++;
        hello.send_ts_ns = static_cast<std::uint64_t>(now);
        hello.payload = {kOpHello, kProtocolRevision, static_cast<std::uint8_t>(i)};
        encode_frame_into(hello, wire_);
        paths_[i].socket.send_to(wire_.data(), wire_.size(), paths_[i].remote);
      }
      next_hello = now + 200'000'000;
    }
    poll_once(std::min(next_hello, give_up));
  }
  ready_.clear();
}

void TunnelClient::handle(std::size_t path, const std::uint8_t* data, std::size_t len) {
  TunnelFrame frame;
  try {
    frame = decode_frame(std::span<const std::uint8_t>(data, len));
  } catch (const FrameError& e) {
    if (e.code() == FrameErrorCode::UnknownVersion) {
      throw TransportError("tunnel peer on path " + names_[path] + " speaks another frame version");
    }
    ++malformed_;
    return;
  }
  const std::int64_t at = now_ns();

  if (frame.flow_id == kControlFlowId) {
    if (frame.kind == FrameKind::ProbeReply && frame.payload.size() >= 3 && frame.payload[0] == kOpHello) {
      if (frame.payload[1] != kProtocolRevision) {
        throw TransportError("tunnel peer protocol revision " + std::to_string(frame.payload[1]) + ", expected " +
                             std::to_string(kProtocolRevision));
      }
      if (frame.payload[2] < hello_ok_.size()) hello_ok_[frame.payload[2]] = true;
    }
    return;
  }
  if (frame.flow_id == kReceiptFlowId) {
    for (std::size_t off = 0; off + kReceiptEntry <= frame.payload.size(); off += kReceiptEntry) {
      const std::uint8_t* e = frame.payload.data() + off;
      Arrival a;
      a.at = Endpoint::Server;
      a.kind = FrameKind::Load;
      a.seq = get_be(e, 8);
      a.send_ts_ns = get_be(e + 8, 8);
      a.at_ns = static_cast<std::int64_t>(get_be(e + 16, 8));
      a.flow_id = static_cast<std::uint32_t>(get_be(e + 24, 4));
      a.payload_bytes = static_cast<std::size_t>(get_be(e + 28, 2));
      a.link = e[30];
      a.first_copy = true;
      if (a.link < paths_.size()) server_accounting_.credit(a.link);
      ready_.push_back(a);
    }
    return;
  }
  if (frame.kind == FrameKind::ProbeRequest) return;

  bool first;
  if (frame.flow_id == kMonitorFlowId) {
    first = dedup_.accept(frame.flow_id, frame.seq) == DedupDecision::Accept;
  } else {
    first = on_copy_arrival(dedup_, client_accounting_, path, frame, at).accepted();
  }
  ready_.push_back(Arrival{Endpoint::Client, frame.kind, frame.flow_id, frame.seq, frame.send_ts_ns,
                           frame.payload.size(), path, at, first});
}

bool TunnelClient::poll_once(std::int64_t until_ns) {
  std::vector<pollfd> fds;
  for (const auto& p : paths_) fds.push_back(pollfd{p.socket.fd(), POLLIN, 0});
  std::int64_t wake = until_ns;
  for (const auto& p : paths_) {
    if (!p.delayed.empty()) wake = std::min(wake, p.delayed.front().release_ns);
  }
  wait_readable(fds, wake - now_ns());
  bool any = false;
  std::vector<std::uint8_t> buf(kRecvBuffer);
  for (std::size_t i = 0; i < paths_.size(); ++i) {
    if (!(fds[i].revents & POLLIN)) continue;
    sockaddr_in from{};
    long n;
    while ((n = paths_[i].socket.receive(buf.data(), buf.size(), from)) >= 0) {
      handle(i, buf.data(), static_cast<std::size_t>(n));
      any = true;
    }
  }
  release_due();
  return any;
}

std::optional<Arrival> TunnelClient::receive_until(std::int64_t deadline_ns) {
  while (true) {
    release_due();
    if (!ready_.empty()) {
      Arrival a = ready_.front();
      ready_.pop_front();
      return a;
    }
    if (now_ns() >= deadline_ns) {
      poll_once(now_ns());
      if (ready_.empty()) return std::nullopt;
      continue;
    }
    poll_once(deadline_ns);
  }
}

void TunnelClient::send(std::span<const std::size_t> links, const TunnelFrame& frame) {
  encode_frame_into(frame, wire_);
  for (std::size_t l : links) {
    if (l >= paths_.size()) throw TransportError("no such path index " + std::to_string(l));
    transmit(l, wire_);
  }
}

void TunnelClient::start_downlink_load(const DownlinkLoadRequest& req) {
  if (req.links.empty()) throw ConfigError("downlink load needs at least one path");
  std::uint64_t mask = 0;
  for (std::size_t l : req.links) {
    if (l >= paths_.size()) throw TransportError("no such path index " + std::to_string(l));
    mask |= std::uint64_t{1} << l;
  }
  TunnelFrame f;
  f.kind = FrameKind::ProbeRequest;
  f.flow_id = kControlFlowId;
  f.seq = control_seq_++;
  f.send_ts_ns = static_cast<std::uint64_t>(now_ns());
  const std::uint64_t request_id = (static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count()) << 8) ^ f.seq;
  f.payload.push_back(kOpDownlinkLoad);
  put_be(f.payload, request_id, 8);
  put_be(f.payload, req.flow_id, 4);
  put_be(f.payload, double_bits(req.target_mbps), 8);
  put_be(f.payload, req.payload_bytes, 4);
  put_be(f.payload, req.frames, 8);
  put_be(f.payload, mask, 8);
  encode_frame_into(f, wire_);
  // Control goes out on every requested path so one lossy path cannot block it.
  for (std::size_t l : req.links) paths_[l].socket.send_to(wire_.data(), wire_.size(), paths_[l].remote);
}

}  // namespace mcdup
