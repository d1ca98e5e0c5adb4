#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "mcdup/dedup.hpp"
#include "mcdup/duplication.hpp"
#include "mcdup/link.hpp"
#include "mcdup/rng.hpp"
#include "mcdup/transport.hpp"

namespace mcdup {

// Copies on this flow feed link estimators but are not measurements and
// are not credited in the share accounting.
inline constexpr std::uint32_t kMonitorFlowId = 0xFFFFFFFE;

enum class EventType : std::uint8_t { Transmit = 0, Receive = 1 };

struct LogEvent {
  std::int64_t t_ns = 0;
  EventType type = EventType::Transmit;
  std::size_t link = 0;
  Direction dir = Direction::Uplink;
  FrameKind kind = FrameKind::ProbeRequest;
  std::uint32_t flow_id = 0;
  std::uint64_t seq = 0;
  std::size_t payload_bytes = 0;
  // Transmit: delivery time or drop reason. Receive: dedup decision.
  std::optional<std::int64_t> deliver_at_ns;
  std::optional<DropReason> drop;
  bool first_copy = false;
};

struct EventLog {
  std::vector<std::string> link_names;
  std::vector<LogEvent> events;

  void write_csv(std::ostream& out) const;
};

// Discrete-event emulation of a client and a server joined by several
// emulated links. Single-threaded.
//
// Pending deliveries are processed in order of (time, link name, seq,
// event ordinal, insertion order); the order is total, so a run is a pure
// function of (links, seed, client actions).
//
// The server reflects every probe-request copy back over the link it arrived
// on, reports load copies as server arrivals, and paces downlink load on
// request. Frames are encoded to wire bytes on transmit and the header is
// decoded again on delivery.
class EmulatedTransport final : public Transport {
 public:
  EmulatedTransport(std::vector<LinkProfile> links, std::uint64_t seed, EventLog* log = nullptr,
                    std::size_t dedup_window = kDefaultDedupWindow);
  EmulatedTransport(const EmulatedTransport&) = delete;
  EmulatedTransport& operator=(const EmulatedTransport&) = delete;

  const std::vector<std::string>& link_names() const override { return names_; }
  std::int64_t now_ns() override { return now_ns_; }
  void send(std::span<const std::size_t> links, const TunnelFrame& frame) override;
  std::optional<Arrival> receive_until(std::int64_t deadline_ns) override;
  void start_downlink_load(const DownlinkLoadRequest& request) override;
  bool reproducible() const override { return true; }
  const LinkShareAccounting& accounting(Endpoint e) const override { return side(e).accounting; }

  LinkChannel& channel(std::size_t link) { return channels_.at(link); }
  const DedupState& dedup(Endpoint e) const { return side(e).dedup; }

 private:
  enum class Ordinal : std::uint8_t { ServerArrival = 0, ClientArrival = 1, ServerSend = 2 };

  struct Event {
    std::int64_t t_ns = 0;
    std::size_t link = 0;
    std::uint64_t seq = 0;
    Ordinal ordinal = Ordinal::ServerArrival;
    std::uint64_t counter = 0;
    FrameHeader header;
    std::size_t load = 0;  // ServerSend: index into loads_
  };

  struct Later {
    const EmulatedTransport* self;
    bool operator()(const Event& a, const Event& b) const;
  };

  struct Side {
    DedupState dedup;
    LinkShareAccounting accounting;
  };

  struct DownlinkLoad {
    DownlinkLoadRequest request;
    double interval_ns = 0.0;
    std::uint64_t sent = 0;
  };

  const Side& side(Endpoint e) const { return e == Endpoint::Client ? client_ : server_; }
  void transmit(std::size_t link, Direction dir, const TunnelFrame& frame, Ordinal on_delivery);
  void push(Event e);
  bool arrive(Side& s, const Event& e, Direction dir);

  std::vector<std::string> names_;
  std::vector<LinkChannel> channels_;
  EventLog* log_;
  std::int64_t now_ns_ = 0;
  std::uint64_t counter_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  Side client_;
  Side server_;
  std::vector<DownlinkLoad> loads_;
  std::vector<std::uint8_t> wire_;
};

}  // namespace mcdup
