#include "mcdup/probes.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "csv.hpp"
#include "mcdup/emulator.hpp"

namespace mcdup {

namespace {

std::int64_t to_ns(double seconds) { return static_cast<std::int64_t>(std::llround(seconds * 1e9)); }
std::int64_t ms_to_ns(double ms) { return static_cast<std::int64_t>(std::llround(ms * 1e6)); }

}  // namespace

void validate(const ProbeConfig& c) {
  if (!(c.interval_ms > 0.0)) throw ConfigError("probe interval must be > 0");
  if (!(c.outage_threshold_ms > c.interval_ms)) throw ConfigError("probe outage threshold must exceed the interval");
  if (!(c.duration_s >= 0.0)) throw ConfigError("probe duration must be >= 0");
  if (c.payload_bytes > kMaxPayload) throw ConfigError("probe payload too large");
}

std::uint64_t probe_count(const ProbeConfig& c) {
  return static_cast<std::uint64_t>(to_ns(c.duration_s) / ms_to_ns(c.interval_ms));
}

void validate(const LoadConfig& c) {
  if (!(c.target_mbps > 0.0)) throw ConfigError("load target must be > 0");
  if (!(c.bin_s > 0.0)) throw ConfigError("bin width must be > 0");
  if (!(c.duration_s >= 0.0)) throw ConfigError("load duration must be >= 0");
  if (!(c.outage_threshold_kbps >= 0.0)) throw ConfigError("throughput outage threshold must be >= 0");
  if (c.payload_bytes == 0 || c.payload_bytes > kMaxPayload) throw ConfigError("load payload size out of range");
  if (!(c.drain_s >= 0.0)) throw ConfigError("drain time must be >= 0");
}

std::uint64_t bin_count(const LoadConfig& c) { return static_cast<std::uint64_t>(to_ns(c.duration_s) / to_ns(c.bin_s)); }

std::uint64_t load_frame_count(const LoadConfig& c) {
  const double bits = c.duration_s * c.target_mbps * 1e6;
  return static_cast<std::uint64_t>(std::floor(bits / (static_cast<double>(c.payload_bytes) * 8.0) + 1e-9));
}

const char* to_string(MetricKind kind) { return kind == MetricKind::RttMs ? "rtt_ms" : "throughput_mbps"; }

MetricKind metric_from_string(const std::string& text) {
  if (text == "rtt_ms") return MetricKind::RttMs;
  if (text == "throughput_mbps") return MetricKind::ThroughputMbps;
  throw ConfigError("unknown metric kind '" + text + "'");
}

std::vector<double> SampleSeries::values() const {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (!s.outage && s.value) out.push_back(*s.value);
  }
  return out;
}

std::size_t SampleSeries::outage_count() const {
  return static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(), [](const Sample& s) { return s.outage; }));
}

void validate(const SampleSeries& series) {
  for (std::size_t i = 0; i < series.samples.size(); ++i) {
    const Sample& s = series.samples[i];
    if (i > 0 && !(s.t_s > series.samples[i - 1].t_s)) throw std::invalid_argument("series timestamps must increase");
    if (s.value && (!std::isfinite(*s.value) || *s.value < 0.0)) {
      throw std::invalid_argument("series values must be finite and >= 0");
    }
    if (!s.value && !s.outage) throw std::invalid_argument("missing value without outage flag");
  }
}

ProbeRun run_latency_probe(Transport& transport, const ProbeConfig& config, const DuplicationPolicy& policy) {
  validate(config);
  const auto& names = transport.link_names();
  const std::size_t links = names.size();
  LinkSelector selector(policy, names, config.outage_threshold_ms);
  const bool full = std::holds_alternative<FullDuplication>(policy);

  const std::uint64_t n = probe_count(config);
  const std::int64_t interval = ms_to_ns(config.interval_ms);
  const std::int64_t threshold = ms_to_ns(config.outage_threshold_ms);
  const std::int64_t start = transport.now_ns();

  ProbeRun run;
  run.records.assign(n, FrameRecord{0, std::vector<std::optional<std::int64_t>>(links)});

  auto handle = [&](const Arrival& a) {
    if (a.at != Endpoint::Client || a.kind != FrameKind::ProbeReply || a.seq >= n) return;
    const bool measured = a.flow_id == config.flow_id;
    if (!measured && a.flow_id != kMonitorFlowId) return;
    FrameRecord& rec = run.records[a.seq];
    selector.on_probe_reply(a.link, a.seq, rec.send_ns, a.at_ns);
    if (measured) {
      auto& slot = rec.reply_arrival_ns.at(a.link);
      if (!slot || a.at_ns < *slot) slot = a.at_ns;
    }
  };
  auto drain = [&](std::int64_t until) {
    while (auto a = transport.receive_until(until)) handle(*a);
  };

  TunnelFrame frame;
  frame.kind = FrameKind::ProbeRequest;
  frame.payload.assign(config.payload_bytes, 0);
  std::vector<std::size_t> others;
  std::uint64_t sent = 0;
  try {
    for (std::uint64_t i = 0; i < n; ++i, ++sent) {
      const std::int64_t due = start + static_cast<std::int64_t>(i) * interval;
      drain(due);
      const std::int64_t now = std::max(due, transport.now_ns());
      const std::vector<std::size_t> chosen = selector.select(now);
      run.records[i].send_ns = now;
      frame.seq = i;
      frame.send_ts_ns = static_cast<std::uint64_t>(now);
      frame.flow_id = config.flow_id;
      transport.send(chosen, frame);
      for (std::size_t l : chosen) selector.on_probe_sent(l, i, now);
      run.copies_sent += chosen.size();
      if (!full && chosen.size() < links) {
        others.clear();
        for (std::size_t l = 0; l < links; ++l) {
          if (std::find(chosen.begin(), chosen.end(), l) == chosen.end()) others.push_back(l);
        }
        frame.flow_id = kMonitorFlowId;
        transport.send(others, frame);
        for (std::size_t l : others) selector.on_probe_sent(l, i, now);
      }
    }
    if (n > 0) drain(run.records.back().send_ns + threshold + 1);
  } catch (const TransportError& e) {
    run.aborted = e.what();
    run.records.resize(sent);
  }

  run.series.metric = MetricKind::RttMs;
  run.series.samples.reserve(run.records.size());
  for (const FrameRecord& rec : run.records) {
    Sample s;
    s.t_s = static_cast<double>(rec.send_ns - start) / 1e9;
    s.value = end_to_end_rtt(rec, config.outage_threshold_ms);
    s.outage = !s.value;
    run.series.samples.push_back(s);
  }
  run.series.metadata = {
      {"links", names},
      {"policy", policy_name(policy)},
      {"probe",
       {{"interval_ms", config.interval_ms},
        {"payload_bytes", config.payload_bytes},
        {"outage_threshold_ms", config.outage_threshold_ms},
        {"duration_s", config.duration_s}}},
  };
  if (run.aborted) run.series.metadata["aborted"] = *run.aborted;
  return run;
}

SampleSeries bin_throughput(const std::vector<LoadArrival>& arrivals, std::int64_t t0_ns, const LoadConfig& config) {
  validate(config);
  const std::uint64_t bins = bin_count(config);
  const std::int64_t bin_ns = to_ns(config.bin_s);
  std::int64_t offset = 0;
  if (!arrivals.empty()) {
    offset = std::numeric_limits<std::int64_t>::max();
    for (const auto& a : arrivals) offset = std::min(offset, a.arrival_ns - a.send_ns);
  }
  const std::int64_t origin = t0_ns + offset;
  std::vector<std::uint64_t> bytes(bins, 0);
  for (const auto& a : arrivals) {
    if (a.arrival_ns < origin) continue;
    const auto idx = static_cast<std::uint64_t>((a.arrival_ns - origin) / bin_ns);
    if (idx < bins) bytes[idx] += a.payload_bytes;
  }
  SampleSeries out;
  out.metric = MetricKind::ThroughputMbps;
  out.samples.reserve(bins);
  for (std::uint64_t i = 0; i < bins; ++i) {
    Sample s;
    s.t_s = static_cast<double>(i) * config.bin_s;
    s.value = static_cast<double>(bytes[i]) * 8.0 / config.bin_s / 1e6;
    s.outage = *s.value * 1e3 < config.outage_threshold_kbps;
    out.samples.push_back(s);
  }
  return out;
}

LoadRun run_load(Transport& transport, const LoadConfig& config, const std::vector<std::size_t>& links) {
  validate(config);
  if (links.empty()) throw ConfigError("load needs at least one link");
  const std::uint64_t frames = load_frame_count(config);
  const double interval_ns = static_cast<double>(config.payload_bytes) * 8.0 / config.target_mbps * 1e3;
  const std::int64_t start = transport.now_ns();
  const std::int64_t end = start + to_ns(config.duration_s) + to_ns(config.drain_s);
  const Endpoint receiver = config.direction == Direction::Uplink ? Endpoint::Server : Endpoint::Client;

  LoadRun run;
  auto handle = [&](const Arrival& a) {
    if (a.at != receiver || a.kind != FrameKind::Load || a.flow_id != config.flow_id || !a.first_copy) return;
    run.accepted.push_back(LoadArrival{a.seq, static_cast<std::int64_t>(a.send_ts_ns), a.at_ns, a.link, a.payload_bytes});
  };
  auto drain = [&](std::int64_t until) {
    while (auto a = transport.receive_until(until)) handle(*a);
  };

  run.frames_sent = frames;
  try {
    if (config.direction == Direction::Uplink) {
      TunnelFrame frame;
      frame.kind = FrameKind::Load;
      frame.flow_id = config.flow_id;
      frame.payload.assign(config.payload_bytes, 0);
      for (std::uint64_t i = 0; i < frames; ++i) {
        const std::int64_t due = start + static_cast<std::int64_t>(std::llround(static_cast<double>(i) * interval_ns));
        drain(due);
        frame.seq = i;
        frame.send_ts_ns = static_cast<std::uint64_t>(std::max(due, transport.now_ns()));
        run.frames_sent = i;
        transport.send(links, frame);
      }
      run.frames_sent = frames;
    } else {
      DownlinkLoadRequest req;
      req.links = links;
      req.flow_id = config.flow_id;
      req.target_mbps = config.target_mbps;
      req.payload_bytes = config.payload_bytes;
      req.start_ns = start;
      req.frames = frames;
      transport.start_downlink_load(req);
    }
    drain(end);
  } catch (const TransportError& e) {
    run.aborted = e.what();
  }

  // First frame's send time, in the sender's clock.
  std::int64_t t0 = start;
  if (!run.accepted.empty()) {
    const auto first = std::min_element(run.accepted.begin(), run.accepted.end(),
                                        [](const LoadArrival& a, const LoadArrival& b) { return a.seq < b.seq; });
    t0 = first->send_ns - static_cast<std::int64_t>(std::llround(static_cast<double>(first->seq) * interval_ns));
  }
  run.series = bin_throughput(run.accepted, t0, config);
  std::vector<std::string> used;
  for (std::size_t l : links) used.push_back(transport.link_names().at(l));
  run.series.metadata = {
      {"links", used},
      {"load",
       {{"target_mbps", config.target_mbps},
        {"bin_s", config.bin_s},
        {"outage_threshold_kbps", config.outage_threshold_kbps},
        {"direction", config.direction == Direction::Uplink ? "UL" : "DL"},
        {"duration_s", config.duration_s},
        {"payload_bytes", config.payload_bytes}}},
  };
  if (run.aborted) run.series.metadata["aborted"] = *run.aborted;
  return run;
}

SampleSeries combine_max(const std::vector<SampleSeries>& per_link, double outage_threshold_kbps) {
  if (per_link.empty()) throw std::invalid_argument("combine_max needs at least one series");
  SampleSeries out;
  out.metric = per_link.front().metric;
  out.samples = per_link.front().samples;
  for (std::size_t k = 1; k < per_link.size(); ++k) {
    const auto& other = per_link[k].samples;
    if (other.size() != out.samples.size()) throw std::invalid_argument("combine_max: series lengths differ");
    for (std::size_t i = 0; i < other.size(); ++i) {
      if (other[i].t_s != out.samples[i].t_s) throw std::invalid_argument("combine_max: bin timestamps differ");
      out.samples[i].value = std::max(out.samples[i].value.value_or(0.0), other[i].value.value_or(0.0));
    }
  }
  for (auto& s : out.samples) s.outage = s.value.value_or(0.0) * 1e3 < outage_threshold_kbps;
  return out;
}

std::string format_number(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, end);
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p.replace_extension(".json");
  return p;
}

void write_series(const SampleSeries& series, const std::filesystem::path& csv_path) {
  if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
  {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + csv_path.string());
    out << "timestamp_s,value,outage_flag\n";
    for (const auto& s : series.samples) {
      out << format_number(s.t_s) << ',' << (s.value ? format_number(*s.value) : std::string()) << ','
          << (s.outage ? 1 : 0) << '\n';
    }
  }
  nlohmann::json side = {{"metric", to_string(series.metric)},
                         {"samples", series.samples.size()},
                         {"metadata", series.metadata}};
  std::ofstream out(sidecar_path(csv_path), std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + sidecar_path(csv_path).string());
  out << side.dump(2) << '\n';
}

SampleSeries read_series(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw ConfigError("cannot open series " + csv_path.string());
  SampleSeries series;
  const auto side_path = sidecar_path(csv_path);
  if (std::filesystem::exists(side_path)) {
    std::ifstream side_in(side_path);
    const auto side = nlohmann::json::parse(side_in);
    series.metric = metric_from_string(side.at("metric").get<std::string>());
    if (side.contains("metadata")) series.metadata = side.at("metadata");
  }
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    if (first) {
      first = false;
      if (!f.empty() && f[0] == "timestamp_s") continue;
    }
    if (f.size() != 3) throw ConfigError("series row needs 3 fields: " + line);
    Sample s;
    try {
      s.t_s = std::stod(f[0]);
      if (!f[1].empty()) s.value = std::stod(f[1]);
    } catch (const std::logic_error&) {
      throw ConfigError("malformed series row: " + line);
    }
    if (f[2] != "0" && f[2] != "1") throw ConfigError("outage_flag must be 0 or 1: " + line);
    s.outage = f[2] == "1";
    series.samples.push_back(s);
  }
  validate(series);
  return series;
}

}  // namespace mcdup
