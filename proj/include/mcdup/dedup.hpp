#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

namespace mcdup {

inline constexpr std::size_t kDefaultDedupWindow = 4096;

enum class DedupDecision { Accept, Duplicate };

// First-arrival deduplication with a bounded sliding window per flow.
//
// The window covers (top - W, top], where top is the highest sequence number
// accepted so far. Anything at or below top - W is rejected as a duplicate:
// once a sequence number has slid out of the window it is no longer possible
// to tell a late first copy from a repeat. Memory per flow is W bits.
//
// Single owner; callers sharing it across contexts must serialize.
class DedupState {
 public:
  explicit DedupState(std::size_t window = kDefaultDedupWindow);

  DedupDecision accept(std::uint32_t flow_id, std::uint64_t seq);

  std::size_t window() const { return window_; }

  // Highest seq such that every seq <= it has been decided (accepted, or
  // evicted from the window without ever arriving). Empty before any accept.
  std::optional<std::uint64_t> contiguous_through(std::uint32_t flow_id) const;

  // Seqs that left the window without having been accepted.
  std::uint64_t evicted_unseen() const { return evicted_unseen_; }
  // Copies rejected because they were older than the window.
  std::uint64_t stale_rejects() const { return stale_rejects_; }
  std::uint64_t accepted() const { return accepted_; }
  std::uint64_t duplicates() const { return duplicates_; }

 private:
  struct FlowWindow {
    bool any = false;
    std::uint64_t top = 0;
    std::optional<std::uint64_t> contiguous;
    std::vector<std::uint64_t> bits;
  };

  bool test(const FlowWindow& w, std::uint64_t seq) const;
  void set(FlowWindow& w, std::uint64_t seq);
  void clear(FlowWindow& w, std::uint64_t seq);
  void advance_contiguous(FlowWindow& w);

  std::size_t window_;
  std::unordered_map<std::uint32_t, FlowWindow> flows_;
  std::uint64_t evicted_unseen_ = 0;
  std::uint64_t stale_rejects_ = 0;
  std::uint64_t accepted_ = 0;
  std::uint64_t duplicates_ = 0;
};

DedupDecision dedup_accept(DedupState& state, std::uint32_t flow_id, std::uint64_t seq);

}  // namespace mcdup
