#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>

#include "mcdup/errors.hpp"
#include "mcdup/outage.hpp"

using namespace mcdup;

TEST_CASE("no windows means never in outage") {
  const OutageProcess p = ScheduledOutage{};
  for (double t : {0.0, 1.0, 1e6}) CHECK_FALSE(outage_active(p, t));
  CHECK_FALSE(outage_active(NoOutage{}, 3.0));
}

TEST_CASE("scheduled windows are half open") {
  const OutageProcess p = ScheduledOutage{{{10.0, 20.0}, {30.0, 31.0}}};
  CHECK_FALSE(outage_active(p, 9.999));
  CHECK(outage_active(p, 10.0));
  CHECK(outage_active(p, 15.0));
  CHECK_FALSE(outage_active(p, 20.0));
  CHECK(outage_active(p, 30.5));
  CHECK_FALSE(outage_active(p, 31.0));
}

TEST_CASE("scheduled window validation") {
  CHECK_THROWS_AS(validate(ScheduledOutage{{{5.0, 5.0}}}), ConfigError);
  CHECK_THROWS_AS(validate(ScheduledOutage{{{0.0, 10.0}, {5.0, 12.0}}}), ConfigError);
  CHECK_THROWS_AS(validate(ScheduledOutage{{{20.0, 30.0}, {0.0, 10.0}}}), ConfigError);
  CHECK_THROWS_AS(validate(GilbertElliott{1.5, 0.1, 0.1}), ConfigError);
  CHECK_THROWS_AS(validate(GilbertElliott{0.1, 0.1, 0.0}), ConfigError);
  CHECK_THROWS_AS(validate(RsrpOutage{-100.0, nullptr, ""}), ConfigError);
}

TEST_CASE("rsrp trace: below threshold or no technology is outage") {
  auto trace = std::make_shared<RsrpTrace>(std::vector<RsrpRecord>{
      {0.0, -90.0, "LTE", {}, {}},
      {5.0, -105.0, "LTE", {}, {}},
      {6.0, -105.0, "LTE", {}, {}},
      {6.0, -95.0, "NR", {}, {}},
      {7.0, std::nan(""), "none", {}, {}},
  });
  const OutageProcess p = RsrpOutage{-100.0, trace, "inline"};
  CHECK_FALSE(outage_active(p, 0.0));
  CHECK_FALSE(outage_active(p, 4.99));
  CHECK(outage_active(p, 5.0));
  CHECK_FALSE(outage_active(p, 6.5));
  CHECK(outage_active(p, 7.0));
  CHECK(outage_active(p, 100.0));
  CHECK_THROWS_AS(outage_active(p, -1.0), OutageError);
}

TEST_CASE("rsrp trace ordering is validated") {
  CHECK_THROWS_AS(RsrpTrace({{1.0, -90.0, "LTE", {}, {}}, {0.5, -90.0, "LTE", {}, {}}}), ConfigError);
  CHECK_THROWS_AS(RsrpTrace({{1.0, -90.0, "LTE", {}, {}}, {1.0, -91.0, "LTE", {}, {}}}), ConfigError);
}

TEST_CASE("rsrp trace csv with optional coordinates") {
  const auto path = std::filesystem::temp_directory_path() / "mcdup_rsrp_test.csv";
  {
    std::ofstream out(path);
    out << "time_s,rsrp_dbm,tech,lat,lon\n0,-80,LTE,48.1,11.5\n1,,none\n2,-101,NR\n";
  }
  const RsrpTrace t = RsrpTrace::from_csv(path);
  REQUIRE(t.records().size() == 3);
  CHECK(t.records()[0].lat == 48.1);
  CHECK_FALSE(t.records()[1].visible());
  CHECK_FALSE(t.records()[2].lon.has_value());
  std::filesystem::remove(path);
}

TEST_CASE("synthetic trace with 0.2% no-coverage records gives 0.2% outage") {
  std::vector<RsrpRecord> recs;
  const std::size_t n = 100000;
  const RngStream s = RngStream::from_seed(4);
  std::size_t dark = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool none = s.uniform(i) < 0.002;
    dark += none;
    recs.push_back(none ? RsrpRecord{double(i), std::nan(""), "none", {}, {}}
                        : RsrpRecord{double(i), -85.0, "LTE", {}, {}});
  }
  const OutageProcess p = RsrpOutage{-100.0, std::make_shared<RsrpTrace>(std::move(recs)), ""};
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) hits += outage_active(p, double(i) + 0.5);
  CHECK(hits == dark);
  CHECK(std::abs(double(hits) / n - 0.002) <= 0.0005);
}

TEST_CASE("gilbert-elliott long-run fraction matches the stationary oracle") {
  const GilbertElliott g{0.01, 0.1, 0.1};
  OutageTracker t(g, RngStream::from_seed(8));
  const std::int64_t ticks = 1000000;
  std::int64_t bad = 0;
  for (std::int64_t k = 0; k < ticks; ++k) bad += t.active(k * 100000000LL + 5);
  const double stationary = g.p_good_to_bad / (g.p_good_to_bad + g.p_bad_to_good);
  CHECK(std::abs(double(bad) / ticks - stationary) < 0.005);
}

TEST_CASE("gilbert-elliott state is independent of query order") {
  const GilbertElliott g{0.05, 0.2, 0.1};
  OutageTracker forward(g, RngStream(99));
  OutageTracker backward(g, RngStream(99));
  std::vector<bool> a, b(2000);
  for (int k = 0; k < 2000; ++k) a.push_back(forward.active(k * 100000000LL));
  for (int k = 1999; k >= 0; --k) b[k] = backward.active(k * 100000000LL);
  CHECK(a == b);
  CHECK_FALSE(a[0]);
}

TEST_CASE("stateless query rejects gilbert-elliott") {
  CHECK_THROWS(outage_active(GilbertElliott{0.1, 0.1, 0.1}, 1.0));
}
