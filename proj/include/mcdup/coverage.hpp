#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "mcdup/outage.hpp"

namespace mcdup {

inline constexpr double kCriticalRsrpDbm = -100.0;

struct TechnologyCoverage {
  std::string tech;
  double availability_pct = 0.0;    // share of instants where the tech is visible
  double rsrp_mean_dbm = 0.0;
  double rsrp_stddev_db = 0.0;      // population
  double below_critical_pct = 0.0;  // share of its visible records under the critical level
};

struct CoverageStats {
  std::vector<TechnologyCoverage> technologies;  // sorted by name
  double out_of_coverage_pct = 0.0;              // instants with nothing visible
  double below_critical_pct = 0.0;               // all visible records
  std::size_t instants = 0;
  double critical_dbm = kCriticalRsrpDbm;
};

// Instants are the distinct timestamps of the trace. Throws ConfigError on an
// empty trace.
CoverageStats coverage_stats(const RsrpTrace& trace, double critical_dbm = kCriticalRsrpDbm);

nlohmann::json to_json(const CoverageStats& stats);

}  // namespace mcdup
