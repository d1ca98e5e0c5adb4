#pragma once

// Real-socket tunnel over UDP. Each path is one UDP socket pair; the client
// duplicates frames across the paths the policy selects, the server
// deduplicates and reflects probes on the path they arrived on.
//
// Control traffic rides on reserved flow ids:
//   kControlFlowId  hello / downlink-load requests (probe-request kind),
//                   hello acknowledgements (probe-reply kind)
//   kReceiptFlowId  server receive receipts for uplink load (probe-reply kind)

#include <netinet/in.h>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mcdup/dedup.hpp"
#include "mcdup/duplication.hpp"
#include "mcdup/transport.hpp"

namespace mcdup {

inline constexpr std::uint32_t kControlFlowId = 0xFFFFFFFF;
inline constexpr std::uint32_t kReceiptFlowId = 0xFFFFFFFD;
inline constexpr std::uint8_t kProtocolRevision = 1;

// "host:port", IPv4. Port 0 asks the kernel for one.
sockaddr_in parse_endpoint(const std::string& text);
std::string format_endpoint(const sockaddr_in& addr);

class UdpSocket {
 public:
  UdpSocket() = default;
  explicit UdpSocket(const sockaddr_in& bind_addr);
  ~UdpSocket();
  UdpSocket(UdpSocket&& other) noexcept;
  UdpSocket& operator=(UdpSocket&& other) noexcept;
  UdpSocket(const UdpSocket&) = delete;
  UdpSocket& operator=(const UdpSocket&) = delete;

  int fd() const { return fd_; }
  sockaddr_in local() const;
  bool send_to(const std::uint8_t* data, std::size_t len, const sockaddr_in& to);
  // Non-blocking; returns -1 when nothing is queued.
  long receive(std::uint8_t* buf, std::size_t cap, sockaddr_in& from);

 private:
  int fd_ = -1;
};

struct ServerPath {
  std::string name;
  std::string bind;  // host:port
};

struct TunnelServerStats {
  std::uint64_t datagrams = 0;
  std::uint64_t malformed = 0;
  std::uint64_t echoed = 0;
  std::uint64_t load_accepted = 0;
  std::uint64_t load_sent = 0;
};

class TunnelServer {
 public:
  explicit TunnelServer(std::vector<ServerPath> paths, std::size_t dedup_window = kDefaultDedupWindow);

  // Serves until `stop` becomes true (checked at least every 50 ms) or the
  // optional duration elapses.
  void run(const std::atomic<bool>& stop, std::optional<std::chrono::nanoseconds> duration = std::nullopt);

  std::vector<sockaddr_in> local_endpoints() const;
  const TunnelServerStats& stats() const { return stats_; }
  const LinkShareAccounting& accounting() const { return accounting_; }

 private:
  struct Path {
    std::string name;
    UdpSocket socket;
    std::optional<sockaddr_in> peer;
    std::vector<std::uint8_t> receipts;  // pending receipt entries
    std::uint64_t receipt_seq = 0;
  };
  struct DownlinkLoad {
    std::uint64_t request_id = 0;
    std::vector<std::size_t> paths;
    std::uint32_t flow_id = 0;
    double interval_ns = 0.0;
    std::size_t payload_bytes = 0;
    std::uint64_t frames = 0;
    std::uint64_t sent = 0;
    std::int64_t start_ns = 0;
  };

  std::int64_t now_ns() const;
  void handle(std::size_t path, const std::uint8_t* data, std::size_t len, const sockaddr_in& from);
  void handle_control(std::size_t path, const TunnelFrame& frame, const sockaddr_in& from);
  void flush_receipts();
  std::optional<std::int64_t> pump_loads();

  std::vector<Path> paths_;
  std::chrono::steady_clock::time_point epoch_;
  DedupState dedup_;
  LinkShareAccounting accounting_;
  std::vector<DownlinkLoad> loads_;
  std::map<std::uint64_t, bool> seen_requests_;
  TunnelServerStats stats_;
  std::vector<std::uint8_t> wire_;
};

struct ClientPath {
  std::string name;
  std::string remote;                // server path endpoint
  std::string bind = "0.0.0.0:0";
  double egress_delay_ms = 0.0;      // added to every frame this client sends on the path
};

class TunnelClient final : public Transport {
 public:
  // Performs a hello exchange on every path. Throws TransportError when a
  // path does not answer within `handshake_timeout` or the peer speaks a
  // different protocol revision.
  explicit TunnelClient(std::vector<ClientPath> paths,
                        std::chrono::milliseconds handshake_timeout = std::chrono::milliseconds(2000),
                        std::size_t dedup_window = kDefaultDedupWindow);

  const std::vector<std::string>& link_names() const override { return names_; }
  std::int64_t now_ns() override;
  void send(std::span<const std::size_t> links, const TunnelFrame& frame) override;
  std::optional<Arrival> receive_until(std::int64_t deadline_ns) override;
  void start_downlink_load(const DownlinkLoadRequest& request) override;
  bool reproducible() const override { return false; }
  const LinkShareAccounting& accounting(Endpoint e) const override {
    return e == Endpoint::Client ? client_accounting_ : server_accounting_;
  }

  std::uint64_t malformed() const { return malformed_; }

 private:
  struct Delayed {
    std::int64_t release_ns;
    std::vector<std::uint8_t> bytes;
  };
  struct Path {
    ClientPath config;
    UdpSocket socket;
    sockaddr_in remote{};
    std::int64_t delay_ns = 0;
    std::deque<Delayed> delayed;  // release times are non-decreasing
  };

  void transmit(std::size_t path, const std::vector<std::uint8_t>& bytes);
  void release_due();
  bool poll_once(std::int64_t until_ns);
  void handle(std::size_t path, const std::uint8_t* data, std::size_t len);
  void handshake(std::chrono::milliseconds timeout);

  std::vector<Path> paths_;
  std::vector<std::string> names_;
  std::chrono::steady_clock::time_point epoch_;
  std::deque<Arrival> ready_;
  DedupState dedup_;
  LinkShareAccounting client_accounting_;
  LinkShareAccounting server_accounting_;
  std::vector<bool> hello_ok_;
  std::uint64_t control_seq_ = 0;
  std::uint64_t malformed_ = 0;
  std::vector<std::uint8_t> wire_;
};

}  // namespace mcdup
