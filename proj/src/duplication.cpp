#include "mcdup/duplication.hpp"

#include <algorithm>
#include <cmath>

#include "overloaded.hpp"

namespace mcdup {

std::string policy_name(const DuplicationPolicy& policy) {
  return std::visit(Overloaded{
                        [](const FullDuplication&) { return std::string("full-duplication"); },
                        [](const PrimaryWithBackup&) { return std::string("primary-with-backup"); },
                        [](const QualitySwitch&) { return std::string("quality-switch"); },
                    },
                    policy);
}

void validate(const DuplicationPolicy& policy, std::span<const std::string> link_names) {
  if (link_names.empty()) throw ConfigError("duplication policy needs at least one link");
  std::visit(Overloaded{
                 [](const FullDuplication&) {},
                 [&](const PrimaryWithBackup& p) {
                   if (std::find(link_names.begin(), link_names.end(), p.primary) == link_names.end()) {
                     throw ConfigError("primary link '" + p.primary + "' is not configured");
                   }
                   if (!(p.rtt_threshold_ms > 0.0)) throw ConfigError("rtt_threshold_ms must be > 0");
                   if (p.window == 0) throw ConfigError("estimator window must be >= 1");
                 },
                 [](const QualitySwitch& q) {
                   if (!(q.hysteresis_ms >= 0.0)) throw ConfigError("hysteresis_ms must be >= 0");
                   if (q.window == 0) throw ConfigError("estimator window must be >= 1");
                 },
             },
             policy);
}

namespace {

std::vector<std::size_t> all_links(const SelectorState& state) {
  std::vector<std::size_t> out(state.links.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  return out;
}

}  // namespace

std::vector<std::size_t> select_links(const DuplicationPolicy& policy, SelectorState& state) {
  if (state.links.empty()) throw ConfigError("no links configured");
  return std::visit(
      Overloaded{
          [&](const FullDuplication&) { return all_links(state); },
          [&](const PrimaryWithBackup& p) {
            auto it = std::find_if(state.links.begin(), state.links.end(),
                                   [&](const LinkState& l) { return l.name == p.primary; });
            if (it == state.links.end()) throw ConfigError("primary link '" + p.primary + "' is not configured");
            const bool healthy =
                !it->observed_outage && it->rtt_estimate_ms && *it->rtt_estimate_ms <= p.rtt_threshold_ms;
            if (healthy) return std::vector<std::size_t>{static_cast<std::size_t>(it - state.links.begin())};
            return all_links(state);
          },
          [&](const QualitySwitch& q) {
            std::optional<std::size_t> best;
            for (std::size_t i = 0; i < state.links.size(); ++i) {
              const LinkState& l = state.links[i];
              if (l.observed_outage) continue;
              if (!l.rtt_estimate_ms) {
                state.current.reset();
                return all_links(state);
              }
              if (!best || *l.rtt_estimate_ms < *state.links[*best].rtt_estimate_ms) best = i;
            }
            if (!best) {
              state.current.reset();
              return all_links(state);
            }
            if (state.current) {
              const LinkState& cur = state.links[*state.current];
              const bool usable = !cur.observed_outage && cur.rtt_estimate_ms;
              if (usable && *cur.rtt_estimate_ms <= *state.links[*best].rtt_estimate_ms + q.hysteresis_ms) {
                return std::vector<std::size_t>{*state.current};
              }
            }
            state.current = best;
            return std::vector<std::size_t>{*best};
          },
      },
      policy);
}

RttEstimator::RttEstimator(std::size_t window) : alpha_(2.0 / (static_cast<double>(window) + 1.0)) {
  if (window == 0) throw ConfigError("estimator window must be >= 1");
}

void RttEstimator::observe(double rtt_ms) {
  if (!estimate_) {
    estimate_ = rtt_ms;
  } else {
    estimate_ = *estimate_ + alpha_ * (rtt_ms - *estimate_);
  }
}

namespace {

std::size_t policy_window(const DuplicationPolicy& policy) {
  return std::visit(Overloaded{
                        [](const FullDuplication&) { return std::size_t{10}; },
                        [](const PrimaryWithBackup& p) { return p.window; },
                        [](const QualitySwitch& q) { return q.window; },
                    },
                    policy);
}

}  // namespace

LinkSelector::LinkSelector(DuplicationPolicy policy, std::vector<std::string> link_names, double outage_threshold_ms)
    : policy_(std::move(policy)),
      outage_threshold_ns_(static_cast<std::int64_t>(std::llround(outage_threshold_ms * 1e6))) {
  validate(policy_, link_names);
  if (!(outage_threshold_ms > 0.0)) throw ConfigError("outage threshold must be > 0");
  for (auto& name : link_names) state_.links.push_back(LinkState{std::move(name), std::nullopt, false});
  estimators_.assign(state_.links.size(), RttEstimator(policy_window(policy_)));
  pending_.resize(state_.links.size());
}

void LinkSelector::expire(std::int64_t now_ns) {
  for (std::size_t i = 0; i < pending_.size(); ++i) {
    auto& q = pending_[i];
    while (!q.empty() && now_ns - q.front().send_ns > outage_threshold_ns_) {
      q.pop_front();
      state_.links[i].observed_outage = true;
    }
  }
}

std::vector<std::size_t> LinkSelector::select(std::int64_t now_ns) {
  expire(now_ns);
  return select_links(policy_, state_);
}

void LinkSelector::on_probe_sent(std::size_t link, std::uint64_t seq, std::int64_t send_ns) {
  pending_.at(link).push_back(Pending{seq, send_ns});
}

void LinkSelector::on_probe_reply(std::size_t link, std::uint64_t seq, std::int64_t send_ns, std::int64_t arrival_ns) {
  auto& q = pending_.at(link);
  auto it = std::find_if(q.begin(), q.end(), [&](const Pending& p) { return p.seq == seq; });
  if (it == q.end()) return;  // already expired, or a duplicate reply
  q.erase(q.begin(), it + 1);
  const std::int64_t rtt_ns = arrival_ns - send_ns;
  if (rtt_ns > outage_threshold_ns_) {
    state_.links[link].observed_outage = true;
    return;
  }
  estimators_[link].observe(static_cast<double>(rtt_ns) / 1e6);
  state_.links[link].rtt_estimate_ms = estimators_[link].estimate();
  state_.links[link].observed_outage = false;
}

LinkShareAccounting::LinkShareAccounting(std::vector<std::string> link_names)
    : names_(std::move(link_names)), counts_(names_.size(), 0) {}

void LinkShareAccounting::credit(std::size_t link) {
  ++counts_.at(link);
  ++total_;
}

double LinkShareAccounting::fraction(std::size_t link) const {
  if (total_ == 0) return 0.0;
  return static_cast<double>(counts_.at(link)) / static_cast<double>(total_);
}

CopyOutcome on_copy_arrival(DedupState& dedup, LinkShareAccounting& accounting, std::size_t link,
                            std::uint32_t flow_id, std::uint64_t seq, std::int64_t arrival_ns) {
  CopyOutcome out;
  out.decision = dedup_accept(dedup, flow_id, seq);
  if (out.accepted()) {
    accounting.credit(link);
    out.delivery_ns = arrival_ns;
  }
  return out;
}

CopyOutcome on_copy_arrival(DedupState& dedup, LinkShareAccounting& accounting, std::size_t link,
                            const TunnelFrame& frame, std::int64_t arrival_ns) {
  return on_copy_arrival(dedup, accounting, link, frame.flow_id, frame.seq, arrival_ns);
}

std::optional<double> end_to_end_rtt(const FrameRecord& record, double outage_threshold_ms) {
  std::optional<std::int64_t> best;
  for (const auto& a : record.reply_arrival_ns) {
    if (a && (!best || *a < *best)) best = a;
  }
  if (!best) return std::nullopt;
  const double rtt_ms = static_cast<double>(*best - record.send_ns) / 1e6;
  if (rtt_ms > outage_threshold_ms) return std::nullopt;
  return rtt_ms;
}

}  // namespace mcdup
