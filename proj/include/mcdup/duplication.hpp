#pragma once

// Sender-side link selection and receiver-side first-arrival selection.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mcdup/dedup.hpp"
#include "mcdup/errors.hpp"
#include "mcdup/frame.hpp"

namespace mcdup {

// Every frame on every link.
struct FullDuplication {};

// Primary only while its smoothed RTT stays at or under the threshold and it
// has not been seen in outage; otherwise duplicate on all links.
struct PrimaryWithBackup {
  std::string primary;
  double rtt_threshold_ms = 150.0;
  std::size_t window = 10;  // EWMA span in probes
};

// Single best link by smoothed RTT; switch only when another link beats the
// current one by more than the hysteresis.
struct QualitySwitch {
  double hysteresis_ms = 10.0;
  std::size_t window = 10;
};

using DuplicationPolicy = std::variant<FullDuplication, PrimaryWithBackup, QualitySwitch>;

std::string policy_name(const DuplicationPolicy& policy);
void validate(const DuplicationPolicy& policy, std::span<const std::string> link_names);

struct LinkState {
  std::string name;
  std::optional<double> rtt_estimate_ms;
  bool observed_outage = false;
};

struct SelectorState {
  std::vector<LinkState> links;
  std::optional<std::size_t> current;  // quality-switch only
};

// Indices into state.links, ascending. Throws ConfigError on an empty link
// set or a primary that does not exist.
std::vector<std::size_t> select_links(const DuplicationPolicy& policy, SelectorState& state);

// Exponentially weighted moving average with alpha = 2 / (window + 1).
// The first observation initializes the estimate.
class RttEstimator {
 public:
  explicit RttEstimator(std::size_t window = 10);
  void observe(double rtt_ms);
  std::optional<double> estimate() const { return estimate_; }
  double alpha() const { return alpha_; }

 private:
  double alpha_;
  std::optional<double> estimate_;
};

// Policy plus the per-link observations it needs: smoothed RTT from probe
// reply copies, and outage when a probe copy goes unanswered past the
// outage threshold.
class LinkSelector {
 public:
  LinkSelector(DuplicationPolicy policy, std::vector<std::string> link_names, double outage_threshold_ms = 2000.0);

  std::vector<std::size_t> select(std::int64_t now_ns);
  void on_probe_sent(std::size_t link, std::uint64_t seq, std::int64_t send_ns);
  void on_probe_reply(std::size_t link, std::uint64_t seq, std::int64_t send_ns, std::int64_t arrival_ns);

  const SelectorState& state() const { return state_; }
  const DuplicationPolicy& policy() const { return policy_; }

 private:
  void expire(std::int64_t now_ns);

  struct Pending {
    std::uint64_t seq;
    std::int64_t send_ns;
  };

  DuplicationPolicy policy_;
  SelectorState state_;
  std::vector<RttEstimator> estimators_;
  std::vector<std::deque<Pending>> pending_;
  std::int64_t outage_threshold_ns_;
};

// Per-link count of frames whose accepted (first) copy came over that link.
class LinkShareAccounting {
 public:
  LinkShareAccounting() = default;
  explicit LinkShareAccounting(std::vector<std::string> link_names);

  void credit(std::size_t link);
  std::uint64_t count(std::size_t link) const { return counts_.at(link); }
  std::uint64_t total() const { return total_; }
  double fraction(std::size_t link) const;
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

 private:
  std::vector<std::string> names_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

struct CopyOutcome {
  DedupDecision decision = DedupDecision::Duplicate;
  std::int64_t delivery_ns = 0;  // set on accept
  bool accepted() const { return decision == DedupDecision::Accept; }
};

CopyOutcome on_copy_arrival(DedupState& dedup, LinkShareAccounting& accounting, std::size_t link,
                            const TunnelFrame& frame, std::int64_t arrival_ns);
CopyOutcome on_copy_arrival(DedupState& dedup, LinkShareAccounting& accounting, std::size_t link,
                            std::uint32_t flow_id, std::uint64_t seq, std::int64_t arrival_ns);

// What the prober knows about one probe: when it was sent and when (if ever)
// a reply copy came back over each link.
struct FrameRecord {
  std::int64_t send_ns = 0;
  std::vector<std::optional<std::int64_t>> reply_arrival_ns;  // per link
};

inline constexpr double kDefaultOutageThresholdMs = 2000.0;

// Round trip in ms, or nullopt for a service outage: no reply copy at all,
// or the fastest copy slower than the threshold. Under duplication the
// result is the minimum over the copies that made it back.
std::optional<double> end_to_end_rtt(const FrameRecord& record, double outage_threshold_ms = kDefaultOutageThresholdMs);

}  // namespace mcdup
