#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include "mcdup/frame.hpp"
#include "mcdup/latency_model.hpp"
#include "mcdup/outage.hpp"
#include "mcdup/rng.hpp"

namespace mcdup {

inline constexpr std::size_t kDefaultBucketBytes = 64 * 1024;
inline constexpr std::size_t kDefaultQueueBytes = 256 * 1024;

enum class Direction : std::uint8_t { Uplink = 0, Downlink = 1 };

const char* to_string(Direction d);

// Stochastic model of one interface. Latency and loss apply to both
// directions; capacity may differ per direction.
struct LinkProfile {
  std::string name;
  LatencyModel latency = ConstantLatency{0.0};
  double loss_prob = 0.0;
  double capacity_up_mbps = 100.0;    // payload bits/s, token-bucket rate
  double capacity_down_mbps = 100.0;
  std::size_t bucket_bytes = kDefaultBucketBytes;
  std::size_t queue_bytes = kDefaultQueueBytes;
  OutageProcess outage = NoOutage{};

  double capacity_mbps(Direction d) const { return d == Direction::Uplink ? capacity_up_mbps : capacity_down_mbps; }
};

void validate(const LinkProfile& profile);

enum class DropReason : std::uint8_t { Outage = 0, Loss = 1, Queue = 2 };

const char* to_string(DropReason r);

struct Delivered {
  std::int64_t deliver_at_ns = 0;
};

struct Dropped {
  DropReason reason = DropReason::Loss;
};

using TransmitResult = std::variant<Delivered, Dropped>;

// Runtime state of one emulated interface: outage chain, per-direction
// shapers, and the named random streams.
//
// Draws are keyed by (direction, kind, flow, seq), so a frame's fate on this
// link does not depend on what other links exist. Probe frames skip the
// shaper; load frames queue behind it.
class LinkChannel {
 public:
  LinkChannel(LinkProfile profile, const RngStream& scenario_stream);

  TransmitResult transmit(Direction dir, const TunnelFrame& frame, std::int64_t now_ns);
  TransmitResult transmit(Direction dir, FrameKind kind, std::uint32_t flow_id, std::uint64_t seq,
                          std::size_t payload_bytes, std::int64_t now_ns);

  bool outage_active(std::int64_t now_ns) { return outage_.active(now_ns); }
  const LinkProfile& profile() const { return profile_; }
  const std::string& name() const { return profile_.name; }

 private:
  struct Shaper {
    double rate_bytes_per_ns = 0.0;
    double depth_bytes = 0.0;
    double queue_limit_ns = 0.0;
    double tokens = 0.0;  // starts empty
    std::int64_t updated_ns = 0;
    std::int64_t last_departure_ns = 0;
  };

  // Departure time through the shaper, or nullopt if the queue is full.
  std::optional<std::int64_t> shape(Shaper& s, std::size_t bytes, std::int64_t now_ns);

  LinkProfile profile_;
  RngStream stream_;
  OutageTracker outage_;
  Shaper shaper_[2];
};

}  // namespace mcdup
