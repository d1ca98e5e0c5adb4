#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mcdup/probes.hpp"

namespace mcdup {

struct UseCaseRequirement {
  std::string name;
  double availability = 0.99;  // fraction
  double max_latency_ms = 100.0;
  double min_dl_mbps = 1.0;
  double min_ul_mbps = 1.0;
  bool counted = true;  // contributes to the technology-ready counts
};

void validate(const UseCaseRequirement& req);

// Built-in requirement set: three machine-control classes (not counted) and
// nine application use cases UC1..UC9 (counted).
const std::vector<UseCaseRequirement>& reference_requirements();

enum class Kpi { Latency = 0, Downlink = 1, Uplink = 2 };
inline constexpr std::array<Kpi, 3> kKpis = {Kpi::Latency, Kpi::Downlink, Kpi::Uplink};
const char* to_string(Kpi kpi);

// Availability in percent, one per KPI.
using AvailabilityTriple = std::array<double, 3>;

struct AvailabilityTable {
  std::vector<std::string> technologies;
  std::map<std::pair<std::string, std::string>, AvailabilityTriple> cells;  // (use case, technology)

  void set(const std::string& use_case, const std::string& tech, AvailabilityTriple triple);
};

// Built-in availability table for the five technology columns
// SC-A, SC-B, SC-Sat, MC-Cellular, MC-Cell-Sat.
const AvailabilityTable& reference_availability();

// Latency: share of probes with RTT <= max latency (outages fail).
// Throughput: share of bins with rate >= the minimum.
AvailabilityTriple availability_against(const SampleSeries& latency, const SampleSeries& downlink,
                                        const SampleSeries& uplink, const UseCaseRequirement& req);
double latency_availability(const SampleSeries& latency, double max_latency_ms);
double throughput_availability(const SampleSeries& throughput, double min_mbps);

enum class Verdict { Pass, NearMiss, Fail };
const char* to_string(Verdict v);

inline constexpr double kNearMissPp = 1.0;

// Pass when measured >= required; near-miss when short by at most one
// percentage point; fail otherwise.
Verdict classify(double measured_pct, double required_fraction);

struct FeasibilityCell {
  AvailabilityTriple measured{};
  std::array<Verdict, 3> verdict{};
};

struct FeasibilityMatrix {
  std::vector<std::string> technologies;
  std::vector<UseCaseRequirement> use_cases;
  std::vector<std::vector<FeasibilityCell>> cells;           // [use case][technology]
  std::vector<std::array<int, 3>> ready;                     // [technology][kpi]
  int counted_use_cases = 0;

  const FeasibilityCell& at(const std::string& use_case, const std::string& tech) const;
};

class FeasibilityError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Throws FeasibilityError listing every missing (use case, technology) cell.
FeasibilityMatrix feasibility_matrix(const AvailabilityTable& table, const std::vector<UseCaseRequirement>& reqs);

void write_matrix_csv(const FeasibilityMatrix& m, std::ostream& out);
nlohmann::json to_json(const FeasibilityMatrix& m);

}  // namespace mcdup
