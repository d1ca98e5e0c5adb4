#include "mcdup/link.hpp"

#include <algorithm>
#include <cmath>

namespace mcdup {

const char* to_string(Direction d) { return d == Direction::Uplink ? "up" : "down"; }

const char* to_string(DropReason r) {
  switch (r) {
    case DropReason::Outage: return "outage";
    case DropReason::Loss: return "loss";
    case DropReason::Queue: return "queue";
  }
  return "unknown";
}

void validate(const LinkProfile& profile) {
  if (profile.name.empty()) throw ConfigError("link profile needs a name");
  if (!(profile.loss_prob >= 0.0 && profile.loss_prob <= 1.0)) {
    throw ConfigError("link " + profile.name + ": loss_prob must be in [0, 1]");
  }
  if (!(profile.capacity_up_mbps > 0.0) || !(profile.capacity_down_mbps > 0.0)) {
    throw ConfigError("link " + profile.name + ": capacity must be positive");
  }
  validate(profile.latency);
  validate(profile.outage);
}

LinkChannel::LinkChannel(LinkProfile profile, const RngStream& scenario_stream)
    : profile_(std::move(profile)),
      stream_(scenario_stream.split("link").split(profile_.name)),
      outage_(profile_.outage, stream_.split("outage")) {
  validate(profile_);
  for (Direction d : {Direction::Uplink, Direction::Downlink}) {
    Shaper& s = shaper_[static_cast<int>(d)];
    s.rate_bytes_per_ns = profile_.capacity_mbps(d) * 1e6 / 8.0 / 1e9;
    s.depth_bytes = static_cast<double>(profile_.bucket_bytes);
    s.queue_limit_ns = static_cast<double>(profile_.queue_bytes) / s.rate_bytes_per_ns;
  }
}

std::optional<std::int64_t> LinkChannel::shape(Shaper& s, std::size_t bytes, std::int64_t now_ns) {
  const std::int64_t start = std::max(now_ns, s.last_departure_ns);
  double tokens = std::min(s.depth_bytes, s.tokens + static_cast<double>(start - s.updated_ns) * s.rate_bytes_per_ns);
  std::int64_t depart = start;
  const double need = static_cast<double>(bytes);
  if (tokens >= need) {
    tokens -= need;
  } else {
    const auto wait = static_cast<std::int64_t>(std::ceil((need - tokens) / s.rate_bytes_per_ns));
    depart = start + wait;
    tokens = std::clamp(tokens + static_cast<double>(wait) * s.rate_bytes_per_ns - need, 0.0, s.depth_bytes);
  }
  if (static_cast<double>(depart - now_ns) > s.queue_limit_ns) return std::nullopt;
  s.tokens = tokens;
  s.updated_ns = depart;
  s.last_departure_ns = depart;
  return depart;
}

TransmitResult LinkChannel::transmit(Direction dir, const TunnelFrame& frame, std::int64_t now_ns) {
  return transmit(dir, frame.kind, frame.flow_id, frame.seq, frame.payload.size(), now_ns);
}

TransmitResult LinkChannel::transmit(Direction dir, FrameKind kind, std::uint32_t flow_id, std::uint64_t seq,
                                     std::size_t payload_bytes, std::int64_t now_ns) {
  if (outage_.active(now_ns)) return Dropped{DropReason::Outage};

  const RngStream draws =
      stream_.split(static_cast<std::uint64_t>(dir)).split(static_cast<std::uint64_t>(kind)).split(std::uint64_t{flow_id});
  if (profile_.loss_prob > 0.0 && draws.split("loss").uniform(seq) < profile_.loss_prob) {
    return Dropped{DropReason::Loss};
  }

  std::int64_t depart = now_ns;
  if (kind == FrameKind::Load) {
    auto shaped = shape(shaper_[static_cast<int>(dir)], payload_bytes, now_ns);
    if (!shaped) return Dropped{DropReason::Queue};
    depart = *shaped;
  }

  const double delay_ms = sample_one_way_delay(profile_.latency, draws.split("delay"), seq);
  return Delivered{depart + static_cast<std::int64_t>(std::llround(delay_ms * 1e6))};
}

}  // namespace mcdup
