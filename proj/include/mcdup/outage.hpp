#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mcdup/rng.hpp"

namespace mcdup {

// One RSRP observation. Several records may share a timestamp (one per
// visible technology); tech "none" marks an instant with no coverage.
struct RsrpRecord {
  double time_s = 0.0;
  double rsrp_dbm = 0.0;  // NaN when tech is "none"
  std::string tech;
  std::optional<double> lat;
  std::optional<double> lon;

  bool visible() const;
};

class RsrpTrace {
 public:
  RsrpTrace() = default;
  // Records must be ordered by time; per technology, time strictly increases.
  explicit RsrpTrace(std::vector<RsrpRecord> records);

  // CSV columns: time_s, rsrp_dbm, tech[, lat, lon]. Header row optional.
  static RsrpTrace from_csv(const std::filesystem::path& path);

  const std::vector<RsrpRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }

  // Records at the latest timestamp <= t. Throws OutageError before the
  // first record.
  std::pair<std::size_t, std::size_t> snapshot_at(double t_s) const;

 private:
  std::vector<RsrpRecord> records_;
};

class OutageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NoOutage {};

struct ScheduledOutage {
  // Disjoint, sorted [start, end) windows in seconds.
  std::vector<std::pair<double, double>> windows_s;
};

struct GilbertElliott {
  double p_good_to_bad = 0.0;
  double p_bad_to_good = 1.0;
  double tick_s = 0.1;
};

struct RsrpOutage {
  double threshold_dbm = -100.0;
  std::shared_ptr<const RsrpTrace> trace;
  std::string source;  // path the trace was loaded from, for reports
};

using OutageProcess = std::variant<NoOutage, ScheduledOutage, GilbertElliott, RsrpOutage>;

void validate(const OutageProcess& process);

// Stateless evaluation. Gilbert-Elliott needs chain state, so it is not
// accepted here; use OutageTracker.
bool outage_active(const OutageProcess& process, double now_s);

// Outage evaluation with chain state. The Gilbert-Elliott state for tick k is
// a pure function of (stream, k): the chain starts good at tick 0 and step k
// uses uniform(k). States are cached, so queries may come in any order.
class OutageTracker {
 public:
  OutageTracker(OutageProcess process, RngStream stream);

  bool active(std::int64_t now_ns);
  const OutageProcess& process() const { return process_; }

 private:
  bool chain_bad(std::uint64_t tick);

  OutageProcess process_;
  RngStream stream_;
  std::vector<std::uint8_t> chain_;
};

}  // namespace mcdup
