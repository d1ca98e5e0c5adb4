#include "mcdup/dedup.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

namespace mcdup {

DedupState::DedupState(std::size_t window) : window_((window + 63) / 64 * 64) {
  if (window == 0) throw std::invalid_argument("dedup window must be positive");
}

bool DedupState::test(const FlowWindow& w, std::uint64_t seq) const {
  const std::uint64_t slot = seq % window_;
  return (w.bits[slot / 64] >> (slot % 64)) & 1U;
}

void DedupState::set(FlowWindow& w, std::uint64_t seq) {
  const std::uint64_t slot = seq % window_;
  w.bits[slot / 64] |= std::uint64_t{1} << (slot % 64);
}

void DedupState::clear(FlowWindow& w, std::uint64_t seq) {
  const std::uint64_t slot = seq % window_;
  w.bits[slot / 64] &= ~(std::uint64_t{1} << (slot % 64));
}

void DedupState::advance_contiguous(FlowWindow& w) {
  std::uint64_t next = w.contiguous ? *w.contiguous + 1 : 0;
  // Everything at or below top - W is decided.
  if (w.top >= window_ && next + window_ <= w.top) {
    next = w.top - window_ + 1;
    w.contiguous = next - 1;
  }
  while (next <= w.top && test(w, next)) {
    w.contiguous = next;
    ++next;
  }
}

DedupDecision DedupState::accept(std::uint32_t flow_id, std::uint64_t seq) {
  FlowWindow& w = flows_[flow_id];
  if (w.bits.empty()) w.bits.assign(window_ / 64, 0);

  if (!w.any) {
    w.any = true;
    w.top = seq;
    if (seq >= window_) evicted_unseen_ += seq - window_ + 1;
    set(w, seq);
    advance_contiguous(w);
    ++accepted_;
    return DedupDecision::Accept;
  }

  if (seq > w.top) {
    const std::uint64_t shift = seq - w.top;
    if (shift < window_) {
      for (std::uint64_t n = w.top + 1; n <= seq; ++n) {
        if (n >= window_) {
          if (!test(w, n)) ++evicted_unseen_;
          clear(w, n);
        }
      }
    } else {
      std::uint64_t held = 0;
      for (std::uint64_t word : w.bits) held += static_cast<std::uint64_t>(std::popcount(word));
      const std::uint64_t valid_old = std::min<std::uint64_t>(w.top + 1, window_);
      evicted_unseen_ += valid_old - held;
      evicted_unseen_ += seq - window_ - w.top;  // never entered the window
      std::fill(w.bits.begin(), w.bits.end(), 0);
    }
    w.top = seq;
    set(w, seq);
    advance_contiguous(w);
    ++accepted_;
    return DedupDecision::Accept;
  }

  if (w.top - seq < window_) {
    if (test(w, seq)) {
      ++duplicates_;
      return DedupDecision::Duplicate;
    }
    set(w, seq);
    advance_contiguous(w);
    ++accepted_;
    return DedupDecision::Accept;
  }

  ++stale_rejects_;
  ++duplicates_;
  return DedupDecision::Duplicate;
}

std::optional<std::uint64_t> DedupState::contiguous_through(std::uint32_t flow_id) const {
  auto it = flows_.find(flow_id);
  if (it == flows_.end()) return std::nullopt;
  return it->second.contiguous;
}

DedupDecision dedup_accept(DedupState& state, std::uint32_t flow_id, std::uint64_t seq) {
  return state.accept(flow_id, seq);
}

}  // namespace mcdup
