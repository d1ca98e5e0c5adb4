#pragma once

// Periodic RTT probing and constant-rate load over any Transport.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcdup/duplication.hpp"
#include "mcdup/link.hpp"
#include "mcdup/transport.hpp"

namespace mcdup {

struct ProbeConfig {
  double interval_ms = 100.0;
  std::size_t payload_bytes = 64;
  double outage_threshold_ms = kDefaultOutageThresholdMs;
  double duration_s = 60.0;
  std::uint32_t flow_id = 1;
};

void validate(const ProbeConfig& config);

// floor(duration / interval), computed on integer nanoseconds.
std::uint64_t probe_count(const ProbeConfig& config);

inline constexpr std::size_t kDefaultLoadPayload = 1200;

struct LoadConfig {
  double target_mbps = 100.0;
  double bin_s = 1.0;
  double outage_threshold_kbps = 500.0;
  Direction direction = Direction::Downlink;
  double duration_s = 60.0;
  std::size_t payload_bytes = kDefaultLoadPayload;
  std::uint32_t flow_id = 2;
  double drain_s = 3.0;  // receive window after the last send
};

void validate(const LoadConfig& config);

std::uint64_t bin_count(const LoadConfig& config);
std::uint64_t load_frame_count(const LoadConfig& config);

enum class MetricKind { RttMs, ThroughputMbps };

const char* to_string(MetricKind kind);
MetricKind metric_from_string(const std::string& text);

struct Sample {
  double t_s = 0.0;
  std::optional<double> value;  // empty only for a latency outage
  bool outage = false;

  bool operator==(const Sample&) const = default;
};

struct SampleSeries {
  MetricKind metric = MetricKind::RttMs;
  std::vector<Sample> samples;
  nlohmann::json metadata = nlohmann::json::object();

  std::vector<double> values() const;  // non-outage values only
  std::size_t outage_count() const;
};

// Throws std::invalid_argument on non-increasing timestamps or negative or
// non-finite values.
void validate(const SampleSeries& series);

struct ProbeRun {
  SampleSeries series;
  // Per probe, per link: arrival of the measured reply copy, if any.
  std::vector<FrameRecord> records;
  std::uint64_t copies_sent = 0;
  // Set when the transport failed mid-run; the series then covers the probes
  // sent before the failure.
  std::optional<std::string> aborted;
};

// Sends one probe per interval on the links chosen by the policy, waits for
// replies up to the outage threshold after the last probe, and records the
// RTT or an outage marker per probe. Links the policy leaves out still get a
// monitor copy so that their estimates stay current.
ProbeRun run_latency_probe(Transport& transport, const ProbeConfig& config,
                           const DuplicationPolicy& policy = FullDuplication{});

struct LoadArrival {
  std::uint64_t seq = 0;
  std::int64_t send_ns = 0;
  std::int64_t arrival_ns = 0;
  std::size_t link = 0;
  std::size_t payload_bytes = 0;
};

struct LoadRun {
  SampleSeries series;
  std::vector<LoadArrival> accepted;  // first copies only
  std::uint64_t frames_sent = 0;
  std::optional<std::string> aborted;
};

// Paces fixed-size load frames at the target rate over `links` (every
// listed link carries every frame) and bins the payload bits of first
// arrivals at the receiving side.
LoadRun run_load(Transport& transport, const LoadConfig& config, const std::vector<std::size_t>& links);

// Bins first arrivals. Bin i covers [origin + i*bin, origin + (i+1)*bin)
// where origin = t0 + min(arrival - send); bins below the outage threshold
// are flagged but keep their value.
SampleSeries bin_throughput(const std::vector<LoadArrival>& arrivals, std::int64_t t0_ns, const LoadConfig& config);

// Per-bin maximum over independent single-link runs.
SampleSeries combine_max(const std::vector<SampleSeries>& per_link, double outage_threshold_kbps);

// CSV: timestamp_s,value,outage_flag. The sidecar holds the metric kind and
// metadata. Numbers are written in shortest round-trip form.
void write_series(const SampleSeries& series, const std::filesystem::path& csv_path);
SampleSeries read_series(const std::filesystem::path& csv_path);
std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

std::string format_number(double value);

}  // namespace mcdup
