#pragma once

// Experiment execution and report assembly.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcdup/emulator.hpp"
#include "mcdup/feasibility.hpp"
#include "mcdup/scenario.hpp"
#include "mcdup/stats.hpp"

namespace mcdup {

const char* version();

// Series of one experiment keyed by technology label ("SC-<link>" for single
// links, the scenario's technology label for the combined run).
struct SeriesSet {
  std::vector<std::string> technologies;
  std::map<std::string, SampleSeries> latency;
  std::map<std::string, SampleSeries> downlink;
  std::map<std::string, SampleSeries> uplink;

  void add(std::map<std::string, SampleSeries>& which, const std::string& tech, SampleSeries series);
};

struct RunReport {
  nlohmann::json document;  // contents of report.json
  SeriesSet series;
  std::vector<std::string> violations;
  std::optional<std::string> aborted;
  std::filesystem::path output_dir;  // empty when not persisted

  bool ok() const { return violations.empty() && !aborted; }
};

struct RunOptions {
  bool persist = true;
};

// Runs the probe and load workloads of the scenario, checks invariants,
// persists the series and report, and returns the report. A transport
// failure stops the run; the series collected so far are kept and the run
// is marked aborted and non-reproducible.
RunReport run_experiment(const Scenario& scenario, const RunOptions& options = {});

// Every number in the report is computed here from the series, so a report
// can be rebuilt from the files on disk.
nlohmann::json build_report(const Scenario& scenario, const SeriesSet& series, const nlohmann::json& accounting,
                            const nlohmann::json& provenance, const std::vector<std::string>& violations);

// Per-probe check: the combined RTT is the minimum of the single-link RTTs
// and the combined outage set is the intersection of the single-link ones.
std::vector<std::string> check_min_selection(const SampleSeries& combined, const std::vector<const SampleSeries*>& single);

// Each bin carries at most capacity * bin + bucket depth.
std::vector<std::string> check_capacity(const SampleSeries& throughput, const LinkProfile& link, Direction dir,
                                        double bin_s);

std::vector<std::string> check_causality(const EventLog& log);

// Event log of the scenario's workload over all its links, with probe and
// load durations set to `duration_s`.
EventLog run_simulation(const Scenario& scenario, double duration_s, std::uint64_t seed);

// Simulation mode: one column per technology that has latency, downlink and
// uplink series.
AvailabilityTable availability_from_series(const SeriesSet& series, const std::vector<UseCaseRequirement>& reqs);
AvailabilityTable availability_from_runs(const std::vector<std::filesystem::path>& run_dirs,
                                         const std::vector<UseCaseRequirement>& reqs);

SeriesSet read_run_series(const std::filesystem::path& run_dir);

// matrix.csv and matrix.json in `dir`.
void write_feasibility(const FeasibilityMatrix& matrix, const std::filesystem::path& dir);

void write_summary_csv(const nlohmann::json& report, std::ostream& out);

}  // namespace mcdup
