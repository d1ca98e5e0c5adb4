#include "mcdup/outage.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "csv.hpp"
#include "mcdup/latency_model.hpp"
#include "overloaded.hpp"

namespace mcdup {

bool RsrpRecord::visible() const { return tech != "none" && std::isfinite(rsrp_dbm); }

RsrpTrace::RsrpTrace(std::vector<RsrpRecord> records) : records_(std::move(records)) {
  std::map<std::string, double> last_by_tech;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (!std::isfinite(r.time_s)) throw ConfigError("RSRP record with non-finite time");
    if (i > 0 && r.time_s < records_[i - 1].time_s) throw ConfigError("RSRP trace is not ordered by time");
    auto [it, inserted] = last_by_tech.emplace(r.tech, r.time_s);
    if (!inserted) {
      if (!(r.time_s > it->second)) {
        throw ConfigError("RSRP trace time must strictly increase per technology (tech " + r.tech + ")");
      }
      it->second = r.time_s;
    }
  }
}

RsrpTrace RsrpTrace::from_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open RSRP trace " + path.string());
  std::vector<RsrpRecord> records;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (csv::trim(line).empty() || line[0] == '#') continue;
    const auto f = csv::split(line);
    if (first) {
      first = false;
      if (!f.empty() && f[0] == "time_s") continue;
    }
    if (f.size() < 3) throw ConfigError("RSRP row needs time_s, rsrp_dbm, tech: " + line);
    RsrpRecord r;
    try {
      r.time_s = std::stod(f[0]);
      r.rsrp_dbm = (f[1].empty() || f[1] == "nan") ? std::nan("") : std::stod(f[1]);
      if (f.size() > 3 && !f[3].empty()) r.lat = std::stod(f[3]);
      if (f.size() > 4 && !f[4].empty()) r.lon = std::stod(f[4]);
    } catch (const std::logic_error&) {
      throw ConfigError("malformed RSRP row: " + line);
    }
    r.tech = f[2].empty() ? "none" : f[2];
    records.push_back(std::move(r));
  }
  return RsrpTrace(std::move(records));
}

std::pair<std::size_t, std::size_t> RsrpTrace::snapshot_at(double t_s) const {
  auto after = std::upper_bound(records_.begin(), records_.end(), t_s,
                                [](double t, const RsrpRecord& r) { return t < r.time_s; });
  if (after == records_.begin()) throw OutageError("time precedes the first RSRP record");
  const double at = (after - 1)->time_s;
  auto first = std::lower_bound(records_.begin(), after, at,
                                [](const RsrpRecord& r, double t) { return r.time_s < t; });
  return {static_cast<std::size_t>(first - records_.begin()), static_cast<std::size_t>(after - records_.begin())};
}

void validate(const OutageProcess& process) {
  std::visit(Overloaded{
                 [](const NoOutage&) {},
                 [](const ScheduledOutage& s) {
                   for (std::size_t i = 0; i < s.windows_s.size(); ++i) {
                     const auto& [a, b] = s.windows_s[i];
                     if (!(a < b)) throw ConfigError("outage window must have start < end");
                     if (i > 0 && a < s.windows_s[i - 1].second) throw ConfigError("outage windows must be sorted and disjoint");
                   }
                 },
                 [](const GilbertElliott& g) {
                   auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
                   if (!prob(g.p_good_to_bad) || !prob(g.p_bad_to_good)) throw ConfigError("transition probabilities must be in [0, 1]");
                   if (!(g.tick_s > 0.0)) throw ConfigError("gilbert-elliott tick must be positive");
                 },
                 [](const RsrpOutage& r) {
                   if (!r.trace || r.trace->empty()) throw ConfigError("rsrp-trace outage needs a loaded, non-empty trace");
                 },
             },
             process);
}

namespace {

bool rsrp_outage(const RsrpOutage& r, double now_s) {
  const auto [first, last] = r.trace->snapshot_at(now_s);
  bool any_visible = false;
  double best = -INFINITY;
  for (std::size_t i = first; i < last; ++i) {
    const auto& rec = r.trace->records()[i];
    if (!rec.visible()) continue;
    any_visible = true;
    best = std::max(best, rec.rsrp_dbm);
  }
  return !any_visible || best < r.threshold_dbm;
}

bool scheduled_outage(const ScheduledOutage& s, double now_s) {
  auto it = std::upper_bound(s.windows_s.begin(), s.windows_s.end(), now_s,
                             [](double t, const auto& w) { return t < w.first; });
  if (it == s.windows_s.begin()) return false;
  --it;
  return now_s >= it->first && now_s < it->second;
}

}  // namespace

bool outage_active(const OutageProcess& process, double now_s) {
  return std::visit(Overloaded{
                        [](const NoOutage&) { return false; },
                        [&](const ScheduledOutage& s) { return scheduled_outage(s, now_s); },
                        [](const GilbertElliott&) -> bool {
                          throw std::logic_error("gilbert-elliott outage needs an OutageTracker");
                        },
                        [&](const RsrpOutage& r) { return rsrp_outage(r, now_s); },
                    },
                    process);
}

OutageTracker::OutageTracker(OutageProcess process, RngStream stream)
    : process_(std::move(process)), stream_(stream) {
  validate(process_);
}

bool OutageTracker::chain_bad(std::uint64_t tick) {
  const auto& g = std::get<GilbertElliott>(process_);
  if (chain_.empty()) chain_.push_back(0);
  while (chain_.size() <= tick) {
    const std::uint64_t k = chain_.size() - 1;
    const bool bad = chain_.back() != 0;
    const double u = stream_.uniform(k);
    const bool next_bad = bad ? !(u < g.p_bad_to_good) : (u < g.p_good_to_bad);
    chain_.push_back(next_bad ? 1 : 0);
  }
  return chain_[tick] != 0;
}

bool OutageTracker::active(std::int64_t now_ns) {
  if (const auto* g = std::get_if<GilbertElliott>(&process_)) {
    if (now_ns < 0) return false;
    const auto tick_ns = static_cast<std::int64_t>(std::llround(g->tick_s * 1e9));
    return chain_bad(static_cast<std::uint64_t>(now_ns / tick_ns));
  }
  return outage_active(process_, static_cast<double>(now_ns) * 1e-9);
}

}  // namespace mcdup
