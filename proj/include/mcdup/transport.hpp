#pragma once

// Client-side view of a multi-link tunnel. The emulator and the UDP tunnel
// both implement it, so the measurement procedures run unchanged on either.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcdup/duplication.hpp"
#include "mcdup/frame.hpp"

namespace mcdup {

enum class Endpoint : std::uint8_t { Client = 0, Server = 1 };

const char* to_string(Endpoint e);

// One copy of a frame reaching an endpoint. Server arrivals are reported for
// load frames only (as receipts); probe requests are echoed by the server.
struct Arrival {
  Endpoint at = Endpoint::Client;
  FrameKind kind = FrameKind::ProbeReply;
  std::uint32_t flow_id = 0;
  std::uint64_t seq = 0;
  std::uint64_t send_ts_ns = 0;  // sender clock, from the header
  std::size_t payload_bytes = 0;
  std::size_t link = 0;
  std::int64_t at_ns = 0;  // receiver clock
  bool first_copy = false;
};

// Server-paced load toward the client.
struct DownlinkLoadRequest {
  std::vector<std::size_t> links;
  std::uint32_t flow_id = 2;
  double target_mbps = 100.0;
  std::size_t payload_bytes = 1200;
  std::int64_t start_ns = 0;  // client clock
  std::uint64_t frames = 0;
};

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Transport {
 public:
  virtual ~Transport() = default;

  virtual const std::vector<std::string>& link_names() const = 0;
  virtual std::int64_t now_ns() = 0;

  // Sends one copy of `frame` on each listed link.
  virtual void send(std::span<const std::size_t> links, const TunnelFrame& frame) = 0;

  // Next arrival at or before the deadline. Returns nullopt once the deadline
  // has passed with nothing left to report; the clock is then at the deadline.
  virtual std::optional<Arrival> receive_until(std::int64_t deadline_ns) = 0;

  virtual void start_downlink_load(const DownlinkLoadRequest& request) = 0;

  // Emulated transports are a pure function of their seed.
  virtual bool reproducible() const = 0;

  // Accounting of first arrivals per link at each endpoint.
  virtual const LinkShareAccounting& accounting(Endpoint e) const = 0;
};

}  // namespace mcdup
