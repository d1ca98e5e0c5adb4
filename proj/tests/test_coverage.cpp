#include "doctest.h"

#include <cmath>

#include "mcdup/coverage.hpp"
#include "mcdup/errors.hpp"

using namespace mcdup;

TEST_CASE("technology availability counts instants") {
  std::vector<RsrpRecord> r;
  // 1000 instants; LTE always visible, NR visible in 357 of them.
  for (int i = 0; i < 1000; ++i) {
    r.push_back({double(i), -90.0, "LTE", {}, {}});
    if (i % 1000 < 357) r.push_back({double(i), -95.0, "NR", {}, {}});
  }
  const auto s = coverage_stats(RsrpTrace(r));
  REQUIRE(s.technologies.size() == 2);
  CHECK(s.technologies[0].tech == "LTE");
  CHECK(s.technologies[0].availability_pct == doctest::Approx(100.0));
  CHECK(s.technologies[1].availability_pct == doctest::Approx(35.7));
  CHECK(s.out_of_coverage_pct == 0.0);
  CHECK(s.technologies[0].rsrp_mean_dbm == doctest::Approx(-90.0));
  CHECK(s.technologies[0].rsrp_stddev_db == 0.0);
}

TEST_CASE("one record per instant: rows share equals availability") {
  std::vector<RsrpRecord> r;
  for (int i = 0; i < 1000; ++i) r.push_back({double(i), -90.0, i < 357 ? "NR" : "LTE", {}, {}});
  const auto s = coverage_stats(RsrpTrace(r));
  CHECK(s.technologies[1].tech == "NR");
  CHECK(s.technologies[1].availability_pct == doctest::Approx(35.7));
}

TEST_CASE("below-critical and out-of-coverage shares") {
  std::vector<RsrpRecord> r;
  const RngStream st = RngStream::from_seed(6);
  int visible = 0, below = 0, dark = 0;
  for (int i = 0; i < 20000; ++i) {
    if (st.uniform(2 * i) < 0.01) {
      r.push_back({double(i), std::nan(""), "none", {}, {}});
      ++dark;
      continue;
    }
    const bool low = st.uniform(2 * i + 1) < 0.098;
    r.push_back({double(i), low ? -105.0 : -85.0, "LTE", {}, {}});
    ++visible;
    below += low;
  }
  const auto s = coverage_stats(RsrpTrace(r));
  CHECK(s.below_critical_pct == doctest::Approx(100.0 * below / visible));
  CHECK(std::abs(s.below_critical_pct - 9.8) < 0.5);
  CHECK(s.out_of_coverage_pct == doctest::Approx(100.0 * dark / 20000));
  CHECK(s.technologies[0].availability_pct + s.out_of_coverage_pct == doctest::Approx(100.0));
}

TEST_CASE("empty trace is an error") { CHECK_THROWS_AS(coverage_stats(RsrpTrace{}), ConfigError); }
