#include "mcdup/runner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <set>

#include "mcdup/tunnel.hpp"

#ifndef MCDUP_VERSION
#define MCDUP_VERSION "0.0.0"
#endif

namespace mcdup {

namespace fs = std::filesystem;
using nlohmann::json;

const char* version() { return MCDUP_VERSION; }

void SeriesSet::add(std::map<std::string, SampleSeries>& which, const std::string& tech, SampleSeries series) {
  if (std::find(technologies.begin(), technologies.end(), tech) == technologies.end()) technologies.push_back(tech);
  which[tech] = std::move(series);
}

namespace {

struct Slot {
  const char* key;
  const char* prefix;
  std::map<std::string, SampleSeries> SeriesSet::*member;
};

constexpr Slot kSlots[] = {
    {"latency", "rtt", &SeriesSet::latency},
    {"downlink", "dl", &SeriesSet::downlink},
    {"uplink", "ul", &SeriesSet::uplink},
};

std::string series_file(const Slot& slot, const std::string& tech) {
  return std::string("series/") + slot.prefix + "_" + tech + ".csv";
}

std::unique_ptr<Transport> make_transport(const Scenario& s, const std::vector<std::size_t>& idx, EventLog* log) {
  if (s.mode == TransportMode::Emulated) {
    std::vector<LinkProfile> links;
    for (std::size_t i : idx) links.push_back(s.links.at(i));
    return std::make_unique<EmulatedTransport>(std::move(links), *s.seed, log);
  }
  std::vector<ClientPath> paths;
  for (std::size_t i : idx) paths.push_back(s.tunnel_paths.at(i));
  return std::make_unique<TunnelClient>(std::move(paths), s.handshake_timeout);
}

json accounting_json(const LinkShareAccounting& a) {
  json links = json::object();
  for (std::size_t i = 0; i < a.names().size(); ++i) {
    links[a.names()[i]] = {{"count", a.count(i)}, {"fraction", a.fraction(i)}};
  }
  return {{"total", a.total()}, {"links", links}};
}

json dkw_json(std::uint64_t n, double alpha) {
  if (n == 0) return nullptr;
  return {{"n", n}, {"alpha", alpha}, {"epsilon", dkw_epsilon(n, alpha)}};
}

json wilson_json(const WilsonInterval& w, const char* at_key, double at) {
  return {{at_key, at},  {"k", w.k},         {"n", w.n},        {"p_hat", w.p_hat},
          {"lower", w.lower}, {"upper", w.upper}, {"z", w.z}, {"alpha", w.alpha}};
}

json latency_confidence(const SampleSeries& s, const Scenario& sc) {
  const std::uint64_t n = s.samples.size();
  json wilson = json::array();
  if (n > 0) {
    for (double x : sc.confidence_points_ms) {
      std::uint64_t k = 0;
      for (const auto& smp : s.samples) k += !smp.outage && smp.value && *smp.value <= x;
      wilson.push_back(wilson_json(wilson_interval(k, n, sc.alpha), "rtt_le_ms", x));
    }
  }
  return {{"dkw", dkw_json(n, sc.alpha)}, {"wilson", wilson}};
}

json throughput_confidence(const SampleSeries& s, const Scenario& sc, bool downlink) {
  const std::uint64_t n = s.samples.size();
  std::set<double> points;
  for (const auto& r : sc.requirements) points.insert(downlink ? r.min_dl_mbps : r.min_ul_mbps);
  json wilson = json::array();
  if (n > 0) {
    for (double x : points) {
      std::uint64_t k = 0;
      for (const auto& smp : s.samples) k += smp.value.value_or(0.0) >= x;
      wilson.push_back(wilson_json(wilson_interval(k, n, sc.alpha), "rate_ge_mbps", x));
    }
  }
  return {{"dkw", dkw_json(n, sc.alpha)}, {"wilson", wilson}};
}

std::string fmt_opt(const json& v) {
  if (v.is_null()) return "";
  return format_number(v.get<double>());
}

}  // namespace

std::vector<std::string> check_min_selection(const SampleSeries& combined, const std::vector<const SampleSeries*>& single) {
  std::vector<std::string> out;
  for (const auto* s : single) {
    if (s->samples.size() != combined.samples.size()) {
      out.push_back("min-selection: single-link series has " + std::to_string(s->samples.size()) + " samples, combined has " +
                    std::to_string(combined.samples.size()));
      return out;
    }
  }
  std::size_t bad = 0;
  std::size_t first_bad = 0;
  for (std::size_t i = 0; i < combined.samples.size(); ++i) {
    std::optional<double> best;
    for (const auto* s : single) {
      const Sample& x = s->samples[i];
      if (!x.outage && x.value && (!best || *x.value < *best)) best = x.value;
    }
    const Sample& c = combined.samples[i];
    const bool ok = c.outage ? !best : (best && c.value && *c.value == *best);
    if (!ok && bad++ == 0) first_bad = i;
  }
  if (bad) {
    out.push_back("min-selection: " + std::to_string(bad) + " probes differ from the single-link minimum (first at probe " +
                  std::to_string(first_bad) + ")");
  }
  return out;
}

std::vector<std::string> check_capacity(const SampleSeries& throughput, const LinkProfile& link, Direction dir, double bin_s) {
  std::vector<std::string> out;
  const double cap_bits = link.capacity_mbps(dir) * 1e6 * bin_s + static_cast<double>(link.bucket_bytes) * 8.0;
  for (std::size_t i = 0; i < throughput.samples.size(); ++i) {
    const double bits = throughput.samples[i].value.value_or(0.0) * 1e6 * bin_s;
    if (bits > cap_bits * (1.0 + 1e-12)) {
      out.push_back("capacity: link " + link.name + " " + to_string(dir) + " bin " + std::to_string(i) + " carries " +
                    format_number(bits) + " bits, limit " + format_number(cap_bits));
      break;
    }
  }
  return out;
}

std::vector<std::string> check_causality(const EventLog& log) {
  for (const auto& e : log.events) {
    if (e.deliver_at_ns && *e.deliver_at_ns < e.t_ns) {
      return {"causality: delivery at " + std::to_string(*e.deliver_at_ns) + " ns precedes send at " + std::to_string(e.t_ns)};
    }
  }
  return {};
}

json build_report(const Scenario& s, const SeriesSet& series, const json& accounting, const json& provenance,
                  const std::vector<std::string>& violations) {
  json doc;
  doc["scenario"] = s.name;
  doc["provenance"] = provenance;
  doc["config"] = to_json(s);
  doc["technologies"] = series.technologies;
  json files = json::object();
  json confidence = json::object();
  for (const auto& slot : kSlots) {
    json summaries = json::object();
    for (const auto& [tech, ser] : series.*slot.member) {
      summaries[tech] = to_json(summarize(ser));
      files[tech][slot.key] = series_file(slot, tech);
      confidence[tech][slot.key] = slot.member == &SeriesSet::latency
                                       ? latency_confidence(ser, s)
                                       : throughput_confidence(ser, s, slot.member == &SeriesSet::downlink);
    }
    doc[slot.key] = summaries;
  }
  doc["series"] = files;
  doc["confidence"] = confidence;
  doc["accounting"] = accounting;

  const AvailabilityTable table = availability_from_series(series, s.requirements);
  if (!table.technologies.empty()) {
    doc["feasibility"] = to_json(feasibility_matrix(table, s.requirements));
  } else {
    doc["feasibility"] = nullptr;
  }
  doc["invariants"] = {{"violations", violations}};
  return doc;
}

AvailabilityTable availability_from_series(const SeriesSet& series, const std::vector<UseCaseRequirement>& reqs) {
  AvailabilityTable t;
  for (const auto& tech : series.technologies) {
    auto l = series.latency.find(tech);
    auto d = series.downlink.find(tech);
    auto u = series.uplink.find(tech);
    if (l == series.latency.end() || d == series.downlink.end() || u == series.uplink.end()) continue;
    if (l->second.samples.empty() || d->second.samples.empty() || u->second.samples.empty()) continue;
    for (const auto& r : reqs) t.set(r.name, tech, availability_against(l->second, d->second, u->second, r));
  }
  return t;
}

SeriesSet read_run_series(const fs::path& dir) {
  std::ifstream in(dir / "report.json");
  if (!in) throw ConfigError("no report.json in " + dir.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError((dir / "report.json").string() + ": " + e.what());
  }
  SeriesSet out;
  for (const auto& tech : doc.at("technologies")) {
    const std::string t = tech.get<std::string>();
    const json& files = doc.at("series").at(t);
    for (const auto& slot : kSlots) {
      if (files.contains(slot.key)) out.add(out.*slot.member, t, read_series(dir / files.at(slot.key).get<std::string>()));
    }
  }
  return out;
}

AvailabilityTable availability_from_runs(const std::vector<fs::path>& run_dirs, const std::vector<UseCaseRequirement>& reqs) {
  AvailabilityTable merged;
  for (const auto& dir : run_dirs) {
    const AvailabilityTable t = availability_from_series(read_run_series(dir), reqs);
    for (const auto& tech : t.technologies) {
      if (std::find(merged.technologies.begin(), merged.technologies.end(), tech) != merged.technologies.end()) continue;
      for (const auto& r : reqs) merged.set(r.name, tech, t.cells.at({r.name, tech}));
    }
  }
  return merged;
}

void write_feasibility(const FeasibilityMatrix& m, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream csv(dir / "matrix.csv");
  write_matrix_csv(m, csv);
  std::ofstream js(dir / "matrix.json");
  js << to_json(m).dump(2) << '\n';
  if (!csv || !js) throw std::runtime_error("cannot write matrix files in " + dir.string());
}

void write_summary_csv(const json& report, std::ostream& out) {
  out << "technology,metric,n,outages,outage_pct,min,median,mean,max,std,q10,q5,q1,q99,q99.9,q99.99\n";
  for (const auto& slot : kSlots) {
    if (!report.contains(slot.key)) continue;
    for (const auto& [tech, s] : report.at(slot.key).items()) {
      out << tech << ',' << slot.key << ',' << s.at("n").get<std::size_t>() << ',' << s.at("outages").get<std::size_t>()
          << ',' << format_number(s.at("outage_probability").get<double>() * 100.0);
      for (const char* k : {"min", "median", "mean", "max", "stddev"}) out << ',' << fmt_opt(s.at(k));
      for (const char* tails : {"lower_tails", "upper_tails"}) {
        for (const auto& t : s.at(tails)) {
          out << ',' << (t.value("beyond_threshold", false) ? std::string("beyond") : fmt_opt(t.at("value")));
        }
      }
      out << '\n';
    }
  }
}

RunReport run_experiment(const Scenario& s, const RunOptions& options) {
  if (s.mode == TransportMode::Emulated && !s.seed) throw ConfigError("emulated runs need a seed");
  RunReport report;
  SeriesSet series;
  json accounting = json::object();
  EventLog log;
  const bool want_log = s.event_log && s.mode == TransportMode::Emulated;
  const std::size_t links = s.link_names().size();
  const bool multi = links > 1;
  const bool emulated = s.mode == TransportMode::Emulated;
  const bool full = std::holds_alternative<FullDuplication>(s.policy);
  std::vector<std::size_t> all(links);
  for (std::size_t i = 0; i < links; ++i) all[i] = i;
  const std::string combined = multi ? s.technology : s.single_label(0);

  auto note_abort = [&](const std::optional<std::string>& why) {
    if (why && !report.aborted) report.aborted = *why;
    return report.aborted.has_value();
  };

  try {
    if (s.probe) {
      std::vector<const SampleSeries*> singles;
      if (multi && s.single_connectivity) {
        for (std::size_t i = 0; i < links && !report.aborted; ++i) {
          auto t = make_transport(s, {i}, nullptr);
          auto run = run_latency_probe(*t, *s.probe, FullDuplication{});
          note_abort(run.aborted);
          series.add(series.latency, s.single_label(i), std::move(run.series));
        }
      }
      if (!report.aborted) {
        auto t = make_transport(s, all, want_log ? &log : nullptr);
        auto run = run_latency_probe(*t, *s.probe, s.policy);
        note_abort(run.aborted);
        std::uint64_t answered = 0;
        for (const auto& rec : run.records) {
          answered += std::any_of(rec.reply_arrival_ns.begin(), rec.reply_arrival_ns.end(), [](const auto& r) { return r.has_value(); });
        }
        const auto& client = t->accounting(Endpoint::Client);
        if (!report.aborted && client.total() != answered) {
          report.violations.push_back("accounting: " + std::to_string(client.total()) + " first arrivals credited for " +
                                      std::to_string(answered) + " answered probes");
        }
        if (multi) {
          accounting["probe"] = {{"copies_sent", run.copies_sent},
                                 {"client", accounting_json(client)},
                                 {"server", accounting_json(t->accounting(Endpoint::Server))}};
        }
        series.add(series.latency, combined, std::move(run.series));
        if (multi && s.single_connectivity && emulated && full && !report.aborted) {
          for (std::size_t i = 0; i < links; ++i) singles.push_back(&series.latency.at(s.single_label(i)));
          for (auto& v : check_min_selection(series.latency.at(combined), singles)) report.violations.push_back(v);
        }
      }
    }

    if (s.load) {
      for (Direction dir : s.load->directions) {
        if (report.aborted) break;
        LoadConfig cfg = s.load->config;
        cfg.direction = dir;
        auto& slot = dir == Direction::Downlink ? series.downlink : series.uplink;
        std::vector<SampleSeries> per_link;
        const bool need_singles = emulated ? true : s.single_connectivity || !multi;
        if (need_singles) {
          for (std::size_t i = 0; i < links && !report.aborted; ++i) {
            auto t = make_transport(s, {i}, nullptr);
            auto run = run_load(*t, cfg, {0});
            note_abort(run.aborted);
            if (emulated) {
              for (auto& v : check_capacity(run.series, s.links[i], dir, cfg.bin_s)) report.violations.push_back(v);
            }
            per_link.push_back(run.series);
            if (!multi || s.single_connectivity) series.add(slot, s.single_label(i), std::move(run.series));
          }
        }
        if (multi && !report.aborted) {
          SampleSeries mc;
          if (emulated) {
            mc = combine_max(per_link, cfg.outage_threshold_kbps);
            mc.metadata = {{"links", s.link_names()}, {"combination", "per-bin maximum"}, {"load", per_link.front().metadata.at("load")}};
          } else {
            auto t = make_transport(s, all, nullptr);
            auto run = run_load(*t, cfg, all);
            note_abort(run.aborted);
            accounting[dir == Direction::Downlink ? "downlink" : "uplink"] =
                accounting_json(t->accounting(dir == Direction::Downlink ? Endpoint::Client : Endpoint::Server));
            mc = std::move(run.series);
          }
          series.add(slot, combined, std::move(mc));
        }
      }
    }
  } catch (const TransportError& e) {
    note_abort(std::string(e.what()));
  }

  for (const auto& slot : kSlots) {
    for (const auto& [tech, ser] : series.*slot.member) {
      try {
        validate(ser);
      } catch (const std::invalid_argument& e) {
        report.violations.push_back(std::string(slot.key) + " series " + tech + ": " + e.what());
      }
    }
  }
  if (want_log) {
    for (auto& v : check_causality(log)) report.violations.push_back(v);
  }

  const bool reproducible = emulated && !report.aborted;
  json provenance = {{"config_hash", hex64(config_hash(s))},
                     {"seed", s.seed ? json(*s.seed) : json(nullptr)},
                     {"version", version()},
                     {"transport", to_string(s.mode)},
                     {"reproducible", reproducible}};
  if (report.aborted) provenance["aborted"] = *report.aborted;

  if (options.persist) {
    const fs::path dir = resolve_output_dir(s);
    fs::create_directories(dir / "series");
    for (const auto& slot : kSlots) {
      for (const auto& [tech, ser] : series.*slot.member) write_series(ser, dir / series_file(slot, tech));
    }
    // Rebuild from the files just written so the report only depends on them.
    SeriesSet persisted;
    for (const auto& tech : series.technologies) {
      for (const auto& slot : kSlots) {
        if ((series.*slot.member).count(tech)) {
          persisted.add(persisted.*slot.member, tech, read_series(dir / series_file(slot, tech)));
        }
      }
    }
    series = std::move(persisted);
    report.document = build_report(s, series, accounting, provenance, report.violations);
    {
      std::ofstream out(dir / "report.json");
      out << report.document.dump(2) << '\n';
      if (!out) throw std::runtime_error("cannot write " + (dir / "report.json").string());
    }
    {
      std::ofstream out(dir / "summary.csv");
      write_summary_csv(report.document, out);
    }
    if (!report.document.at("feasibility").is_null()) {
      std::ofstream out(dir / "matrix.csv");
      write_matrix_csv(feasibility_matrix(availability_from_series(series, s.requirements), s.requirements), out);
    }
    if (want_log) {
      std::ofstream out(dir / "events.csv");
      log.write_csv(out);
    }
    report.output_dir = dir;
  } else {
    report.document = build_report(s, series, accounting, provenance, report.violations);
  }
  report.series = std::move(series);
  return report;
}

EventLog run_simulation(const Scenario& s, double duration_s, std::uint64_t seed) {
  if (s.mode != TransportMode::Emulated) throw ConfigError("run_simulation needs an emulated scenario");
  if (s.links.empty()) throw ConfigError("run_simulation needs at least one link");
  EventLog log;
  EmulatedTransport t(s.links, seed, &log);
  std::vector<std::size_t> all(s.links.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  if (s.probe) {
    ProbeConfig cfg = *s.probe;
    cfg.duration_s = duration_s;
    if (probe_count(cfg) > 0) run_latency_probe(t, cfg, s.policy);
  }
  if (s.load) {
    for (Direction dir : s.load->directions) {
      LoadConfig cfg = s.load->config;
      cfg.direction = dir;
      cfg.duration_s = duration_s;
      if (load_frame_count(cfg) > 0) run_load(t, cfg, all);
    }
  }
  return log;
}

}  // namespace mcdup
