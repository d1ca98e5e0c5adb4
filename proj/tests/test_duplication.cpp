#include "doctest.h"

#include <limits>
#include <random>

#include "mcdup/duplication.hpp"

using namespace mcdup;

namespace {

SelectorState two_links() {
  SelectorState s;
  s.links = {{"A", std::nullopt, false}, {"B", std::nullopt, false}};
  return s;
}

}  // namespace

TEST_CASE("full duplication selects every link") {
  auto s = two_links();
  CHECK(select_links(FullDuplication{}, s) == std::vector<std::size_t>{0, 1});
  s.links[0].observed_outage = true;
  CHECK(select_links(FullDuplication{}, s) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("empty link set is a configuration error") {
  SelectorState s;
  CHECK_THROWS_AS(select_links(FullDuplication{}, s), ConfigError);
  CHECK_THROWS_AS(validate(FullDuplication{}, std::vector<std::string>{}), ConfigError);
}

TEST_CASE("primary with backup") {
  const PrimaryWithBackup p{"B", 100.0, 10};
  auto s = two_links();
  CHECK(select_links(p, s) == std::vector<std::size_t>{0, 1});
  s.links[1].rtt_estimate_ms = 40.0;
  CHECK(select_links(p, s) == std::vector<std::size_t>{1});
  s.links[1].rtt_estimate_ms = 100.0;
  CHECK(select_links(p, s) == std::vector<std::size_t>{1});
  s.links[1].rtt_estimate_ms = 100.5;
  CHECK(select_links(p, s) == std::vector<std::size_t>{0, 1});
  s.links[1].rtt_estimate_ms = 40.0;
  s.links[1].observed_outage = true;
  CHECK(select_links(p, s) == std::vector<std::size_t>{0, 1});
  CHECK_THROWS_AS(select_links(PrimaryWithBackup{"C", 100.0, 10}, s), ConfigError);
}

TEST_CASE("policy validation") {
  const std::vector<std::string> names = {"A", "B"};
  CHECK_NOTHROW(validate(PrimaryWithBackup{"A", 10.0, 10}, names));
  CHECK_THROWS_AS(validate(PrimaryWithBackup{"C", 10.0, 10}, names), ConfigError);
  CHECK_THROWS_AS(validate(PrimaryWithBackup{"A", 0.0, 10}, names), ConfigError);
  CHECK_THROWS_AS(validate(QualitySwitch{-1.0, 10}, names), ConfigError);
  CHECK_NOTHROW(validate(QualitySwitch{0.0, 10}, names));
}

TEST_CASE("primary-with-backup switch point matches an EWMA replay") {
  const std::vector<double> rtts = {40, 42, 45, 60, 90, 150, 300, 500, 500, 200, 80, 50, 40, 40, 40, 40, 40};
  const double threshold = 100.0;
  const std::size_t window = 10;

  // Oracle: plain EWMA, first sample initializes.
  std::vector<bool> expect_backup;
  double est = 0;
  for (std::size_t i = 0; i < rtts.size(); ++i) {
    est = i == 0 ? rtts[i] : est + 2.0 / (window + 1) * (rtts[i] - est);
    expect_backup.push_back(est > threshold);
  }

  LinkSelector sel(PrimaryWithBackup{"A", threshold, window}, {"A", "B"});
  std::int64_t t = 0;
  for (std::size_t i = 0; i < rtts.size(); ++i) {
    sel.on_probe_sent(0, i, t);
    sel.on_probe_reply(0, i, t, t + static_cast<std::int64_t>(rtts[i] * 1e6));
    const auto chosen = sel.select(t + 1);
    CHECK_MESSAGE((chosen.size() == 2) == expect_backup[i], "probe ", i);
    t += 100'000'000;
  }
  CHECK(std::find(expect_backup.begin(), expect_backup.end(), true) != expect_backup.end());
}

TEST_CASE("unanswered probe marks the link in outage until the next reply") {
  LinkSelector sel(PrimaryWithBackup{"A", 100.0, 10}, {"A", "B"});
  sel.on_probe_sent(0, 0, 0);
  sel.on_probe_reply(0, 0, 0, 30'000'000);
  CHECK(sel.select(40'000'000).size() == 1);
  sel.on_probe_sent(0, 1, 100'000'000);
  CHECK(sel.select(2'100'000'000).size() == 1);
  CHECK(sel.select(2'100'000'001).size() == 2);
  CHECK(sel.state().links[0].observed_outage);
  sel.on_probe_sent(0, 2, 2'200'000'000);
  sel.on_probe_reply(0, 2, 2'200'000'000, 2'230'000'000);
  CHECK(sel.select(2'240'000'000).size() == 1);
}

TEST_CASE("quality switch applies hysteresis") {
  const QualitySwitch q{10.0, 10};
  auto s = two_links();
  CHECK(select_links(q, s).size() == 2);
  s.links[0].rtt_estimate_ms = 50.0;
  CHECK(select_links(q, s).size() == 2);
  s.links[1].rtt_estimate_ms = 60.0;
  CHECK(select_links(q, s) == std::vector<std::size_t>{0});
  s.links[1].rtt_estimate_ms = 45.0;
  CHECK(select_links(q, s) == std::vector<std::size_t>{0});
  s.links[1].rtt_estimate_ms = 39.0;
  CHECK(select_links(q, s) == std::vector<std::size_t>{1});
  s.links[0].rtt_estimate_ms = 35.0;
  CHECK(select_links(q, s) == std::vector<std::size_t>{1});
  s.links[1].observed_outage = true;
  CHECK(select_links(q, s) == std::vector<std::size_t>{0});
  s.links[0].observed_outage = true;
  CHECK(select_links(q, s).size() == 2);
}

TEST_CASE("first arrival is accepted and credited") {
  DedupState d;
  LinkShareAccounting acc({"A", "B"});
  auto a = on_copy_arrival(d, acc, 0, 1, 7, 30'000'000);
  auto b = on_copy_arrival(d, acc, 1, 1, 7, 50'000'000);
  CHECK(a.accepted());
  CHECK(a.delivery_ns == 30'000'000);
  CHECK_FALSE(b.accepted());
  CHECK(acc.count(0) == 1);
  CHECK(acc.count(1) == 0);
  auto c = on_copy_arrival(d, acc, 1, 1, 8, 10);
  CHECK(c.accepted());
  CHECK(acc.count(1) == 1);
  CHECK(acc.total() == 2);
  CHECK(acc.fraction(0) + acc.fraction(1) == doctest::Approx(1.0));
}

TEST_CASE("10,000 scripted frames: shares equal the argmin oracle") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> delay(5.0, 200.0);
  DedupState d;
  LinkShareAccounting acc({"A", "B"});
  std::uint64_t oracle[2] = {0, 0};
  struct Copy {
    double at;
    std::size_t link;
    std::uint64_t seq;
  };
  std::vector<Copy> copies;
  for (std::uint64_t seq = 0; seq < 10000; ++seq) {
    const double send = seq * 10.0;
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 2;
    for (std::size_t l = 0; l < 2; ++l) {
      if (gen() % 10 == 0) continue;
      const double at = send + delay(gen);
      copies.push_back({at, l, seq});
      if (at < best) {
        best = at;
        arg = l;
      }
    }
    if (arg < 2) ++oracle[arg];
  }
  std::sort(copies.begin(), copies.end(), [](const Copy& a, const Copy& b) { return a.at < b.at; });
  for (const auto& c : copies) on_copy_arrival(d, acc, c.link, 1, c.seq, static_cast<std::int64_t>(c.at * 1e6));
  CHECK(acc.count(0) == oracle[0]);
  CHECK(acc.count(1) == oracle[1]);
  CHECK(acc.total() == d.accepted());
}

TEST_CASE("end-to-end rtt is the min over surviving copies") {
  FrameRecord r{0, {40'000'000, 95'000'000}};
  CHECK(end_to_end_rtt(r) == 40.0);
  r.reply_arrival_ns = {std::nullopt, 95'000'000};
  CHECK(end_to_end_rtt(r) == 95.0);
  r.reply_arrival_ns = {std::nullopt, std::nullopt};
  CHECK_FALSE(end_to_end_rtt(r).has_value());
  r.reply_arrival_ns = {2'000'000'001, std::nullopt};
  CHECK_FALSE(end_to_end_rtt(r).has_value());
  r.reply_arrival_ns = {2'000'000'000, std::nullopt};
  CHECK(end_to_end_rtt(r) == 2000.0);
}
