// mcdup command-line front end.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "mcdup/coverage.hpp"
#include "mcdup/runner.hpp"
#include "mcdup/tunnel.hpp"

using namespace mcdup;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

struct Common {
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::optional<std::string> policy;
  std::vector<std::string> profiles;
  std::optional<std::string> out;
};

void add_common(CLI::App* app, Common& c, bool with_out = true) {
  app->add_option("--seed", c.seed, "Override the scenario seed");
  app->add_option("--duration", c.duration, "Override probe and load duration (s)")->check(CLI::PositiveNumber);
  app->add_option("--policy", c.policy, "full | primary-with-backup[:LINK] | quality-switch");
  app->add_option("--profile", c.profiles, "Link profile to use (repeat for several; replaces the scenario's links)");
  if (with_out) app->add_option("--out", c.out, "Output directory");
}

ScenarioOverrides overrides_of(const Common& c) {
  ScenarioOverrides ov;
  ov.seed = c.seed;
  ov.duration_s = c.duration;
  ov.policy = c.policy;
  if (!c.profiles.empty()) ov.profiles = c.profiles;
  if (c.out) ov.output_dir = *c.out;
  return ov;
}

// NAME=HOST:PORT[@DELAY_MS]
ClientPath parse_client_path(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("path must be NAME=HOST:PORT[@DELAY_MS], got '" + text + "'");
  ClientPath p;
  p.name = text.substr(0, eq);
  std::string rest = text.substr(eq + 1);
  if (const auto at = rest.find('@'); at != std::string::npos) {
    try {
      p.egress_delay_ms = std::stod(rest.substr(at + 1));
    } catch (const std::logic_error&) {
      throw ConfigError("bad delay in '" + text + "'");
    }
    rest = rest.substr(0, at);
  }
  parse_endpoint(rest);
  p.remote = rest;
  return p;
}

ServerPath parse_server_path(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("path must be NAME=HOST:PORT, got '" + text + "'");
  ServerPath p{text.substr(0, eq), text.substr(eq + 1)};
  parse_endpoint(p.bind);
  return p;
}

std::string opt_str(const json& v, const char* unit) {
  if (v.is_null()) return "-";
  return format_number(v.get<double>()) + unit;
}

void print_summary_table(const json& report, std::ostream& out) {
  for (const char* key : {"latency", "downlink", "uplink"}) {
    if (!report.contains(key) || report.at(key).empty()) continue;
    const char* unit = std::string(key) == "latency" ? " ms" : " Mbps";
    out << key << ":\n";
    for (const auto& tech : report.at("technologies")) {
      const std::string t = tech.get<std::string>();
      if (!report.at(key).contains(t)) continue;
      const json& s = report.at(key).at(t);
      out << "  " << t << ": n=" << s.at("n").get<std::size_t>() << " median=" << opt_str(s.at("median"), unit)
          << " mean=" << opt_str(s.at("mean"), unit)
          << " outage=" << format_number(s.at("outage_probability").get<double>() * 100.0) << "%\n";
    }
  }
}

void write_series_or_print(const SampleSeries& s, const std::optional<std::string>& out) {
  if (out) {
    write_series(s, *out);
    std::cout << "series written to " << *out << "\n";
  }
  std::cout << to_json(summarize(s)).dump(2) << "\n";
}

std::unique_ptr<Transport> transport_for(const std::optional<std::string>& scenario_path, const std::vector<std::string>& paths,
                                         const Common& c, Scenario* scenario_out) {
  if (scenario_path && !paths.empty()) throw ConfigError("give either --scenario or --path, not both");
  if (scenario_path) {
    Scenario s = load_scenario(*scenario_path, overrides_of(c));
    *scenario_out = s;
    if (s.mode == TransportMode::Emulated) return std::make_unique<EmulatedTransport>(s.links, *s.seed);
    return std::make_unique<TunnelClient>(s.tunnel_paths, s.handshake_timeout);
  }
  if (paths.empty()) throw ConfigError("give --scenario FILE or at least one --path NAME=HOST:PORT");
  std::vector<ClientPath> cps;
  for (const auto& p : paths) cps.push_back(parse_client_path(p));
  return std::make_unique<TunnelClient>(cps);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-connectivity duplication emulator, tunnel and KPI analytics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version()));

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run a scenario and write series, report and summary");
  std::string sim_file;
  Common sim_c;
  bool sim_log = false;
  sim->add_option("scenario", sim_file, "Scenario JSON")->required()->check(CLI::ExistingFile);
  add_common(sim, sim_c);
  sim->add_flag("--event-log", sim_log, "Also write the event log (emulated runs)");

  // events
  auto* ev = app.add_subcommand("events", "Write the raw event log of a scenario's workload");
  std::string ev_file;
  Common ev_c;
  ev->add_option("scenario", ev_file, "Scenario JSON")->required()->check(CLI::ExistingFile);
  add_common(ev, ev_c);

  // analyze
  auto* an = app.add_subcommand("analyze", "Summarize a series file or an RSRP trace");
  std::string an_series;
  std::string an_rsrp;
  std::optional<double> an_threshold;
  double an_alpha = 0.01;
  double an_critical = kCriticalRsrpDbm;
  std::vector<double> an_points;
  an->add_option("series", an_series, "Series CSV (with its JSON sidecar)");
  an->add_option("--rsrp", an_rsrp, "RSRP trace CSV: report coverage statistics instead");
  an->add_option("--critical", an_critical, "Critical RSRP (dBm)");
  an->add_option("--threshold", an_threshold, "Re-flag outages at this value (series units)");
  an->add_option("--alpha", an_alpha, "Confidence level parameter")->check(CLI::Range(1e-9, 0.999999));
  an->add_option("--at", an_points, "Wilson interval for P(X <= x) at these points");

  // matrix
  auto* mx = app.add_subcommand("matrix", "Build the use-case feasibility matrix");
  bool mx_reference = false;
  std::vector<std::string> mx_runs;
  std::string mx_avail;
  std::string mx_reqs;
  std::string mx_out;
  mx->add_flag("--reference", mx_reference, "Use the built-in availability table");
  mx->add_option("--runs", mx_runs, "Run directories holding report.json (simulation mode)");
  mx->add_option("--availability", mx_avail, "Availability table JSON")->check(CLI::ExistingFile);
  mx->add_option("--requirements", mx_reqs, "Requirements JSON (default: built-in)")->check(CLI::ExistingFile);
  mx->add_option("--out", mx_out, "Directory for matrix.csv and matrix.json");

  // tunnel
  auto* tun = app.add_subcommand("tunnel", "Real UDP tunnel endpoints");
  tun->require_subcommand(1);
  auto* ts = tun->add_subcommand("server", "Serve probes and load over one socket per path");
  std::vector<std::string> ts_paths;
  std::optional<double> ts_duration;
  ts->add_option("--path", ts_paths, "NAME=HOST:PORT to bind (repeat)")->required();
  ts->add_option("--duration", ts_duration, "Stop after this many seconds");
  auto* tc = tun->add_subcommand("client", "Probe through a running server");
  std::vector<std::string> tc_paths;
  Common tc_c;
  double tc_interval = 100.0;
  tc->add_option("--path", tc_paths, "NAME=HOST:PORT[@DELAY_MS] of the server path (repeat)")->required();
  tc->add_option("--interval-ms", tc_interval, "Probe interval")->check(CLI::PositiveNumber);
  add_common(tc, tc_c);

  // probe / load
  auto* pr = app.add_subcommand("probe", "Latency probes over a scenario's links or tunnel paths");
  std::optional<std::string> pr_scenario;
  std::vector<std::string> pr_paths;
  Common pr_c;
  std::optional<double> pr_interval;
  pr->add_option("--scenario", pr_scenario, "Scenario JSON")->check(CLI::ExistingFile);
  pr->add_option("--path", pr_paths, "NAME=HOST:PORT[@DELAY_MS] tunnel path (repeat)");
  pr->add_option("--interval-ms", pr_interval, "Probe interval")->check(CLI::PositiveNumber);
  add_common(pr, pr_c, false);
  pr->add_option("--out", pr_c.out, "Series CSV to write");

  auto* ld = app.add_subcommand("load", "Constant-rate load over a scenario's links or tunnel paths");
  std::optional<std::string> ld_scenario;
  std::vector<std::string> ld_paths;
  Common ld_c;
  std::string ld_dir = "dl";
  std::optional<double> ld_mbps;
  ld->add_option("--scenario", ld_scenario, "Scenario JSON")->check(CLI::ExistingFile);
  ld->add_option("--path", ld_paths, "NAME=HOST:PORT[@DELAY_MS] tunnel path (repeat)");
  ld->add_option("--direction", ld_dir, "dl or ul")->check(CLI::IsMember({"dl", "ul", "downlink", "uplink"}));
  ld->add_option("--mbps", ld_mbps, "Offered rate")->check(CLI::PositiveNumber);
  add_common(ld, ld_c, false);
  ld->add_option("--out", ld_c.out, "Series CSV to write");

  // plot-data
  auto* pd = app.add_subcommand("plot-data", "Empirical CDF or CCDF points of a series as CSV");
  std::string pd_series;
  bool pd_ccdf = false;
  std::string pd_out;
  pd->add_option("series", pd_series, "Series CSV")->required()->check(CLI::ExistingFile);
  pd->add_flag("--ccdf", pd_ccdf, "Write 1 - F(x) instead of F(x)");
  pd->add_option("--out", pd_out, "Output CSV (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      ScenarioOverrides ov = overrides_of(sim_c);
      if (sim_log) ov.event_log = true;
      const Scenario s = load_scenario(sim_file, ov);
      const RunReport r = run_experiment(s);
      print_summary_table(r.document, std::cout);
      std::cout << "report: " << (r.output_dir / "report.json").string() << "\n";
      for (const auto& v : r.violations) std::cerr << "invariant violated: " << v << "\n";
      if (r.aborted) std::cerr << "run aborted: " << *r.aborted << "\n";
      return r.ok() ? 0 : kExitFailed;
    }

    if (*ev) {
      const Scenario s = load_scenario(ev_file, overrides_of(ev_c));
      if (!s.seed) throw ConfigError("event logs need a seed");
      double duration = 0.0;
      if (s.probe) duration = s.probe->duration_s;
      if (s.load) duration = std::max(duration, s.load->config.duration_s);
      const EventLog log = run_simulation(s, ev_c.duration.value_or(duration), *s.seed);
      if (ev_c.out) {
        fs::create_directories(*ev_c.out);
        std::ofstream out(fs::path(*ev_c.out) / "events.csv");
        log.write_csv(out);
      } else {
        log.write_csv(std::cout);
      }
      return check_causality(log).empty() ? 0 : kExitFailed;
    }

    if (*an) {
      if (!an_rsrp.empty()) {
        std::cout << to_json(coverage_stats(RsrpTrace::from_csv(an_rsrp), an_critical)).dump(2) << "\n";
        return 0;
      }
      if (an_series.empty()) throw ConfigError("analyze needs a series file or --rsrp");
      const SampleSeries s = read_series(an_series);
      json out = to_json(summarize(s, an_threshold));
      out["dkw"] = {{"n", s.samples.size()}, {"alpha", an_alpha}, {"epsilon", dkw_epsilon(s.samples.size(), an_alpha)}};
      json wilson = json::array();
      for (double x : an_points) {
        std::uint64_t k = 0;
        for (const auto& smp : s.samples) {
          if (s.metric == MetricKind::RttMs) {
            k += !smp.outage && smp.value && *smp.value <= x;
          } else {
            k += smp.value.value_or(0.0) <= x;
          }
        }
        const auto w = wilson_interval(k, s.samples.size(), an_alpha);
        wilson.push_back({{"x", x}, {"k", w.k}, {"n", w.n}, {"p_hat", w.p_hat}, {"lower", w.lower}, {"upper", w.upper}, {"z", w.z}});
      }
      out["wilson"] = wilson;
      std::cout << out.dump(2) << "\n";
      return 0;
    }

    if (*mx) {
      const int sources = int(mx_reference) + int(!mx_runs.empty()) + int(!mx_avail.empty());
      if (sources != 1) throw ConfigError("give exactly one of --reference, --runs or --availability");
      const auto reqs = mx_reqs.empty() ? reference_requirements() : load_requirements(mx_reqs);
      AvailabilityTable table;
      if (mx_reference) {
        table = reference_availability();
      } else if (!mx_avail.empty()) {
        table = load_availability(mx_avail);
      } else {
        std::vector<fs::path> dirs(mx_runs.begin(), mx_runs.end());
        table = availability_from_runs(dirs, reqs);
      }
      const FeasibilityMatrix m = feasibility_matrix(table, reqs);
      if (!mx_out.empty()) write_feasibility(m, mx_out);
      // One letter per KPI (latency, dl, ul): P pass, N near miss, F fail.
      std::cout << "use_case";
      for (const auto& t : m.technologies) std::cout << ' ' << t;
      std::cout << '\n';
      for (std::size_t u = 0; u < m.use_cases.size(); ++u) {
        std::cout << m.use_cases[u].name;
        for (const auto& cell : m.cells[u]) {
          std::cout << ' ';
          for (Verdict v : cell.verdict) std::cout << (v == Verdict::Pass ? 'P' : v == Verdict::NearMiss ? 'N' : 'F');
        }
        std::cout << '\n';
      }
      std::cout << "ready (of " << m.counted_use_cases << "):\n";
      for (std::size_t t = 0; t < m.technologies.size(); ++t) {
        std::cout << "  " << m.technologies[t] << ": latency=" << m.ready[t][0] << " dl=" << m.ready[t][1]
                  << " ul=" << m.ready[t][2] << '\n';
      }
      return 0;
    }

    if (*ts) {
      std::vector<ServerPath> paths;
      for (const auto& p : ts_paths) paths.push_back(parse_server_path(p));
      TunnelServer server(paths);
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      const auto eps = server.local_endpoints();
      for (std::size_t i = 0; i < eps.size(); ++i) std::cout << "listening " << paths[i].name << " " << format_endpoint(eps[i]) << "\n";
      std::cout.flush();
      std::optional<std::chrono::nanoseconds> limit;
      if (ts_duration) limit = std::chrono::nanoseconds(static_cast<std::int64_t>(*ts_duration * 1e9));
      server.run(g_stop, limit);
      const auto& st = server.stats();
      std::cout << "datagrams=" << st.datagrams << " malformed=" << st.malformed << " echoed=" << st.echoed
                << " load_accepted=" << st.load_accepted << " load_sent=" << st.load_sent << "\n";
      return 0;
    }

    if (*tc) {
      std::vector<ClientPath> cps;
      for (const auto& p : tc_paths) cps.push_back(parse_client_path(p));
      TunnelClient client(cps);
      ProbeConfig cfg;
      cfg.interval_ms = tc_interval;
      cfg.duration_s = tc_c.duration.value_or(10.0);
      const DuplicationPolicy policy = tc_c.policy ? parse_policy_flag(*tc_c.policy) : DuplicationPolicy{FullDuplication{}};
      std::vector<std::string> names;
      for (const auto& p : cps) names.push_back(p.name);
      validate(policy, names);
      const ProbeRun run = run_latency_probe(client, cfg, policy);
      if (tc_c.out) {
        fs::create_directories(*tc_c.out);
        write_series(run.series, fs::path(*tc_c.out) / "rtt.csv");
      }
      json out = to_json(summarize(run.series));
      const auto& acc = client.accounting(Endpoint::Client);
      for (std::size_t i = 0; i < names.size(); ++i) out["first_arrivals"][names[i]] = acc.count(i);
      std::cout << out.dump(2) << "\n";
      if (run.aborted) {
        std::cerr << "run aborted: " << *run.aborted << "\n";
        return kExitFailed;
      }
      return 0;
    }

    if (*pr) {
      Scenario s;
      auto t = transport_for(pr_scenario, pr_paths, pr_c, &s);
      ProbeConfig cfg = s.probe.value_or(ProbeConfig{});
      if (pr_interval) cfg.interval_ms = *pr_interval;
      if (pr_c.duration) cfg.duration_s = *pr_c.duration;
      DuplicationPolicy policy = pr_scenario ? s.policy : DuplicationPolicy{FullDuplication{}};
      if (pr_c.policy) policy = parse_policy_flag(*pr_c.policy);
      validate(policy, t->link_names());
      const ProbeRun run = run_latency_probe(*t, cfg, policy);
      write_series_or_print(run.series, pr_c.out);
      if (run.aborted) std::cerr << "run aborted: " << *run.aborted << "\n";
      return run.aborted ? kExitFailed : 0;
    }

    if (*ld) {
      Scenario s;
      auto t = transport_for(ld_scenario, ld_paths, ld_c, &s);
      LoadConfig cfg = s.load ? s.load->config : LoadConfig{};
      cfg.direction = ld_dir == "ul" || ld_dir == "uplink" ? Direction::Uplink : Direction::Downlink;
      if (ld_mbps) cfg.target_mbps = *ld_mbps;
      if (ld_c.duration) cfg.duration_s = *ld_c.duration;
      std::vector<std::size_t> all(t->link_names().size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      const LoadRun run = run_load(*t, cfg, all);
      write_series_or_print(run.series, ld_c.out);
      if (run.aborted) std::cerr << "run aborted: " << *run.aborted << "\n";
      return run.aborted ? kExitFailed : 0;
    }

    if (*pd) {
      const SampleSeries s = read_series(pd_series);
      const EmpiricalDistribution d = ecdf(s);
      std::ofstream file;
      std::ostream& out = pd_out.empty() ? std::cout : (file.open(pd_out), file);
      out << (s.metric == MetricKind::RttMs ? "rtt_ms" : "mbps") << ',' << (pd_ccdf ? "ccdf" : "cdf") << '\n';
      const auto& v = d.sorted();
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i + 1 < v.size() && v[i + 1] == v[i]) continue;
        const double f = d.cdf(v[i]);
        out << format_number(v[i]) << ',' << format_number(pd_ccdf ? 1.0 - f : f) << '\n';
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const TransportError& e) {
    std::cerr << "transport error: " << e.what() << "\n";
    return kExitFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailed;
  }
  return 0;
}
