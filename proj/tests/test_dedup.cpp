#include "doctest.h"

#include <random>
#include <set>

#include "mcdup/dedup.hpp"

using namespace mcdup;

TEST_CASE("first copy accepted, later copies rejected") {
  DedupState d;
  CHECK(d.accept(1, 7) == DedupDecision::Accept);
  CHECK(d.accept(1, 7) == DedupDecision::Duplicate);
  CHECK(d.accept(2, 7) == DedupDecision::Accept);
  CHECK(d.accepted() == 2);
  CHECK(d.duplicates() == 1);
}

TEST_CASE("sequence numbers that left the window are rejected") {
  DedupState d(64);
  CHECK(d.window() == 64);
  CHECK(d.accept(1, 100) == DedupDecision::Accept);
  CHECK(d.accept(1, 36) == DedupDecision::Duplicate);
  CHECK(d.stale_rejects() == 1);
  CHECK(d.accept(1, 37) == DedupDecision::Accept);
}

TEST_CASE("window rounds up to whole words") {
  CHECK(DedupState(1).window() == 64);
  CHECK(DedupState(65).window() == 128);
  CHECK_THROWS(DedupState(0));
}

TEST_CASE("contiguous_through tracks the decided prefix") {
  DedupState d(64);
  CHECK_FALSE(d.contiguous_through(1).has_value());
  d.accept(1, 1);
  CHECK_FALSE(d.contiguous_through(1).has_value());
  d.accept(1, 0);
  CHECK(d.contiguous_through(1) == 1);
  d.accept(1, 3);
  CHECK(d.contiguous_through(1) == 1);
  d.accept(1, 2);
  CHECK(d.contiguous_through(1) == 3);
  d.accept(1, 200);
  CHECK(d.contiguous_through(1) == 136);
  CHECK(d.evicted_unseen() == 136 - 3);
}

TEST_CASE("matches a set oracle on in-window traffic") {
  std::mt19937_64 gen(11);
  DedupState d(4096);
  std::set<std::uint64_t> seen;
  std::uint64_t top = 0;
  for (int i = 0; i < 200000; ++i) {
    const std::uint64_t base = static_cast<std::uint64_t>(i) / 2;
    const std::uint64_t seq = base + gen() % 1000;
    const bool in_window = seen.empty() || seq + 4096 > top;
    const bool expect = in_window && !seen.count(seq);
    const bool got = d.accept(9, seq) == DedupDecision::Accept;
    REQUIRE(got == expect);
    if (got) {
      seen.insert(seq);
      top = std::max(top, seq);
    }
  }
  CHECK(d.accepted() == seen.size());
}
