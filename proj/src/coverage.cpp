#include "mcdup/coverage.hpp"

#include <cmath>
#include <map>

#include "mcdup/errors.hpp"

namespace mcdup {

CoverageStats coverage_stats(const RsrpTrace& trace, double critical_dbm) {
  if (trace.empty()) throw ConfigError("coverage statistics need a non-empty trace");
  struct Acc {
    std::size_t instants = 0;
    std::vector<double> rsrp;
  };
  std::map<std::string, Acc> per_tech;
  CoverageStats out;
  out.critical_dbm = critical_dbm;
  std::size_t dark = 0;
  std::size_t visible_total = 0;
  std::size_t below_total = 0;

  const auto& recs = trace.records();
  std::size_t i = 0;
  while (i < recs.size()) {
    std::size_t j = i;
    while (j < recs.size() && recs[j].time_s == recs[i].time_s) ++j;
    ++out.instants;
    bool any = false;
    for (std::size_t r = i; r < j; ++r) {
      if (!recs[r].visible()) continue;
      any = true;
      Acc& a = per_tech[recs[r].tech];
      ++a.instants;
      a.rsrp.push_back(recs[r].rsrp_dbm);
      ++visible_total;
      below_total += recs[r].rsrp_dbm < critical_dbm;
    }
    dark += !any;
    i = j;
  }

  const double instants = static_cast<double>(out.instants);
  for (auto& [tech, a] : per_tech) {
    TechnologyCoverage t;
    t.tech = tech;
    t.availability_pct = 100.0 * static_cast<double>(a.instants) / instants;
    double sum = 0.0;
    std::size_t below = 0;
    for (double v : a.rsrp) {
      sum += v;
      below += v < critical_dbm;
    }
    const double n = static_cast<double>(a.rsrp.size());
    t.rsrp_mean_dbm = sum / n;
    double sq = 0.0;
    for (double v : a.rsrp) sq += (v - t.rsrp_mean_dbm) * (v - t.rsrp_mean_dbm);
    t.rsrp_stddev_db = std::sqrt(sq / n);
    t.below_critical_pct = 100.0 * static_cast<double>(below) / n;
    out.technologies.push_back(t);
  }
  out.out_of_coverage_pct = 100.0 * static_cast<double>(dark) / instants;
  out.below_critical_pct = visible_total ? 100.0 * static_cast<double>(below_total) / static_cast<double>(visible_total) : 0.0;
  return out;
}

nlohmann::json to_json(const CoverageStats& s) {
  nlohmann::json techs = nlohmann::json::array();
  for (const auto& t : s.technologies) {
    techs.push_back({{"tech", t.tech},
                     {"availability_pct", t.availability_pct},
                     {"unavailability_pct", 100.0 - t.availability_pct},
                     {"rsrp_mean_dbm", t.rsrp_mean_dbm},
                     {"rsrp_stddev_db", t.rsrp_stddev_db},
                     {"below_critical_pct", t.below_critical_pct}});
  }
  return {{"instants", s.instants},
          {"critical_dbm", s.critical_dbm},
          {"out_of_coverage_pct", s.out_of_coverage_pct},
          {"below_critical_pct", s.below_critical_pct},
          {"technologies", techs}};
}

}  // namespace mcdup
