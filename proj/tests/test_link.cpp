#include "doctest.h"

#include <variant>

#include "mcdup/link.hpp"

using namespace mcdup;

namespace {

LinkProfile plain(std::string name, double one_way_ms = 10.0) {
  LinkProfile p;
  p.name = std::move(name);
  p.latency = ConstantLatency{one_way_ms};
  return p;
}

}  // namespace

TEST_CASE("outage window drops frames") {
  auto p = plain("a");
  p.outage = ScheduledOutage{{{10.0, 20.0}}};
  LinkChannel ch(p, RngStream::from_seed(1));
  auto r = ch.transmit(Direction::Uplink, FrameKind::ProbeRequest, 1, 0, 64, 15'000'000'000LL);
  REQUIRE(std::holds_alternative<Dropped>(r));
  CHECK(std::get<Dropped>(r).reason == DropReason::Outage);
  r = ch.transmit(Direction::Uplink, FrameKind::ProbeRequest, 1, 1, 64, 25'000'000'000LL);
  REQUIRE(std::holds_alternative<Delivered>(r));
  CHECK(std::get<Delivered>(r).deliver_at_ns == 25'010'000'000LL);
}

TEST_CASE("loss probability one drops everything") {
  auto p = plain("a");
  p.loss_prob = 1.0;
  LinkChannel ch(p, RngStream::from_seed(1));
  for (std::uint64_t s = 0; s < 1000; ++s) {
    auto r = ch.transmit(Direction::Downlink, FrameKind::Load, 2, s, 1200, static_cast<std::int64_t>(s) * 1000);
    REQUIRE(std::holds_alternative<Dropped>(r));
    CHECK(std::get<Dropped>(r).reason == DropReason::Loss);
  }
}

TEST_CASE("loss rate converges") {
  auto p = plain("a");
  p.loss_prob = 0.05;
  LinkChannel ch(p, RngStream::from_seed(2));
  int lost = 0;
  const int n = 200000;
  for (int s = 0; s < n; ++s) {
    lost += std::holds_alternative<Dropped>(ch.transmit(Direction::Uplink, FrameKind::ProbeRequest, 1, s, 64, s));
  }
  CHECK(std::abs(double(lost) / n - 0.05) < 0.003);
}

TEST_CASE("token bucket: 200 Mbps offered into 100 Mbps for 1 s") {
  auto p = plain("a", 0.0);
  p.capacity_up_mbps = 100.0;
  LinkChannel ch(p, RngStream::from_seed(3));
  const std::size_t payload = 1250;
  const std::int64_t interval = 50'000;  // 1250 B every 50 us = 200 Mbps
  double bits_in_second = 0;
  std::int64_t last_deliver = 0;
  for (std::int64_t i = 0; i < 20000; ++i) {
    const std::int64_t now = i * interval;
    auto r = ch.transmit(Direction::Uplink, FrameKind::Load, 2, static_cast<std::uint64_t>(i), payload, now);
    if (const auto* d = std::get_if<Delivered>(&r)) {
      REQUIRE(d->deliver_at_ns >= now);
      REQUIRE(d->deliver_at_ns >= last_deliver);
      last_deliver = d->deliver_at_ns;
      if (d->deliver_at_ns < 1'000'000'000LL) bits_in_second += payload * 8.0;
    } else {
      CHECK(std::get<Dropped>(r).reason == DropReason::Queue);
    }
  }
  CHECK(bits_in_second <= 100e6 + double(kDefaultBucketBytes) * 8.0);
  CHECK(bits_in_second >= 99e6);
}

TEST_CASE("probe frames bypass the shaper") {
  auto p = plain("a", 5.0);
  p.capacity_up_mbps = 1.0;
  LinkChannel ch(p, RngStream::from_seed(3));
  for (std::uint64_t i = 0; i < 100; ++i) {
    auto r = ch.transmit(Direction::Uplink, FrameKind::ProbeRequest, 1, i, 64, 0);
    REQUIRE(std::holds_alternative<Delivered>(r));
    CHECK(std::get<Delivered>(r).deliver_at_ns == 5'000'000);
  }
}

TEST_CASE("per-direction capacity") {
  auto p = plain("a", 0.0);
  p.capacity_up_mbps = 10.0;
  p.capacity_down_mbps = 100.0;
  LinkChannel ch(p, RngStream::from_seed(3));
  auto up = ch.transmit(Direction::Uplink, FrameKind::Load, 2, 0, 1250, 0);
  auto down = ch.transmit(Direction::Downlink, FrameKind::Load, 2, 0, 1250, 0);
  CHECK(std::get<Delivered>(up).deliver_at_ns == 1'000'000);
  CHECK(std::get<Delivered>(down).deliver_at_ns == 100'000);
}

TEST_CASE("a frame's fate depends only on its identity, not on other traffic") {
  auto p = plain("a");
  p.latency = LognormalLatency{3.0, 0.7, 1.0};
  p.loss_prob = 0.2;
  const RngStream root = RngStream::from_seed(10);
  LinkChannel busy(p, root);
  LinkChannel quiet(p, root);
  for (std::uint64_t s = 0; s < 500; ++s) {
    busy.transmit(Direction::Uplink, FrameKind::ProbeRequest, 7, s, 64, 0);
    busy.transmit(Direction::Downlink, FrameKind::ProbeReply, 1, s, 64, 0);
  }
  for (std::uint64_t s = 0; s < 500; s += 3) {
    auto a = busy.transmit(Direction::Uplink, FrameKind::ProbeRequest, 1, s, 64, 1000);
    auto b = quiet.transmit(Direction::Uplink, FrameKind::ProbeRequest, 1, s, 64, 1000);
    CHECK(a.index() == b.index());
    if (a.index() == 0) CHECK(std::get<Delivered>(a).deliver_at_ns == std::get<Delivered>(b).deliver_at_ns);
  }
}

TEST_CASE("profile validation") {
  auto p = plain("a");
  p.loss_prob = 1.5;
  CHECK_THROWS_AS(validate(p), ConfigError);
  p = plain("a");
  p.capacity_down_mbps = 0.0;
  CHECK_THROWS_AS(validate(p), ConfigError);
  p = plain("");
  CHECK_THROWS_AS(validate(p), ConfigError);
}
