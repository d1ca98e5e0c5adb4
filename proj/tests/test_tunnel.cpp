#include "doctest.h"

#include <algorithm>
#include <atomic>
#include <thread>

#include "mcdup/errors.hpp"
#include "mcdup/probes.hpp"
#include "mcdup/stats.hpp"
#include "mcdup/tunnel.hpp"

using namespace mcdup;

namespace {

struct LoopbackServer {
  TunnelServer server;
  std::atomic<bool> stop{false};
  std::thread thread;

  explicit LoopbackServer(std::size_t paths)
      : server([&] {
          std::vector<ServerPath> p;
          for (std::size_t i = 0; i < paths; ++i) p.push_back({"p" + std::to_string(i), "127.0.0.1:0"});
          return p;
        }()) {
    thread = std::thread([this] { server.run(stop); });
  }
  ~LoopbackServer() {
    stop = true;
    thread.join();
  }

  std::vector<ClientPath> client_paths(std::vector<double> delays_ms) const {
    std::vector<ClientPath> out;
    const auto eps = server.local_endpoints();
    for (std::size_t i = 0; i < eps.size(); ++i) {
      out.push_back({"p" + std::to_string(i), format_endpoint(eps[i]), "127.0.0.1:0", delays_ms.at(i)});
    }
    return out;
  }
};

}  // namespace

TEST_CASE("endpoint parsing") {
  const auto a = parse_endpoint("127.0.0.1:4000");
  CHECK(format_endpoint(a) == "127.0.0.1:4000");
  CHECK(format_endpoint(parse_endpoint("localhost:1")) == "127.0.0.1:1");
  CHECK_THROWS_AS(parse_endpoint("127.0.0.1"), ConfigError);
  CHECK_THROWS_AS(parse_endpoint("300.0.0.1:5"), ConfigError);
  CHECK_THROWS_AS(parse_endpoint("127.0.0.1:70000"), ConfigError);
}

TEST_CASE("handshake fails cleanly without a server") {
  UdpSocket silent(parse_endpoint("127.0.0.1:0"));
  std::vector<ClientPath> paths{{"a", format_endpoint(silent.local()), "127.0.0.1:0", 0.0}};
  CHECK_THROWS_AS(TunnelClient(paths, std::chrono::milliseconds(300)), TransportError);
}

TEST_CASE("client rejects a peer with another frame version") {
  UdpSocket fake(parse_endpoint("127.0.0.1:0"));
  std::atomic<bool> stop{false};
  std::thread t([&] {
    std::vector<std::uint8_t> buf(2048);
    while (!stop) {
      sockaddr_in from{};
      const long n = fake.receive(buf.data(), buf.size(), from);
      if (n < 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        continue;
      }
      buf[2] = 2;
      fake.send_to(buf.data(), static_cast<std::size_t>(n), from);
    }
  });
  std::vector<ClientPath> paths{{"a", format_endpoint(fake.local()), "127.0.0.1:0", 0.0}};
  CHECK_THROWS_AS(TunnelClient(paths, std::chrono::milliseconds(1000)), TransportError);
  stop = true;
  t.join();
}

TEST_CASE("loopback probes with a slow path track the fast path") {
  LoopbackServer srv(2);
  TunnelClient client(srv.client_paths({0.0, 50.0}));
  ProbeConfig cfg;
  cfg.interval_ms = 10;
  cfg.duration_s = 1.0;
  const auto run = run_latency_probe(client, cfg);
  REQUIRE(run.series.samples.size() == 100);
  CHECK(run.series.outage_count() == 0);
  const double med = quantile(ecdf(run.series), 0.5);
  CHECK(med < 5.0);
  // The fast path answers first for every probe.
  const auto& acc = client.accounting(Endpoint::Client);
  CHECK(acc.count(0) == 100);
  CHECK(acc.count(1) == 0);
  CHECK(client.malformed() == 0);
}

TEST_CASE("loopback uplink and downlink load") {
  LoopbackServer srv(2);
  TunnelClient client(srv.client_paths({0.0, 0.0}));
  LoadConfig cfg;
  cfg.target_mbps = 10.0;
  cfg.duration_s = 2.0;
  cfg.drain_s = 0.5;
  for (Direction d : {Direction::Uplink, Direction::Downlink}) {
    cfg.direction = d;
    cfg.flow_id = d == Direction::Uplink ? 2 : 3;
    const auto run = run_load(client, cfg, {0, 1});
    CHECK(run.series.samples.size() == 2);
    // Loopback delivers nearly everything; each accepted frame is unique.
    CHECK(run.accepted.size() >= run.frames_sent * 95 / 100);
    std::vector<std::uint64_t> seqs;
    for (const auto& a : run.accepted) seqs.push_back(a.seq);
    std::sort(seqs.begin(), seqs.end());
    CHECK(std::adjacent_find(seqs.begin(), seqs.end()) == seqs.end());
  }
}
