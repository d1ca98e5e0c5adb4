// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any
// criterion fails. Tolerances are fixed here.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "mcdup/frame.hpp"
#include "mcdup/runner.hpp"
#include "mcdup/tunnel.hpp"

using namespace mcdup;
namespace fs = std::filesystem;

namespace {

const fs::path kData = MCDUP_DATA_DIR;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Scenario with its load removed, so only the probe workload runs.
Scenario probe_only(const std::string& file) {
  Scenario s = load_scenario(kData / "scenarios" / file);
  s.load.reset();
  return s;
}

double rtt_or_inf(const Sample& s) { return s.outage || !s.value ? kInf : *s.value; }

double tail_or_inf(const TailQuantile& t) { return t.value ? *t.value : kInf; }

// --- 1 --------------------------------------------------------------------

Outcome feasibility_fixture() {
  static const char* kClasses[][2] = {
      {"M2DC", "FFFFFFFFFFFFNNF"}, {"M2SD", "FFFFFFFFFFNFNPN"}, {"M2M", "FFFFFFFFFFPFNPN"},
      {"UC1", "FFFFFFPFFNPFPPN"},  {"UC2", "FFFFNFPFFNPFPPN"},  {"UC3", "FFFFFFFFFFNFFNF"},
      {"UC4", "FFFFFFFFFFNFFNF"},  {"UC5", "FFFFFFNFFFFNPNN"},  {"UC6", "FFFNNFPFFPPFPPN"},
      {"UC7", "FFFNFFPFFPPFPPN"},  {"UC8", "PFPPPFPPFPPPPPP"},  {"UC9", "PPPPPFPPFPPPPPP"},
  };
  static const int kReady[5][3] = {{2, 1, 2}, {2, 2, 0}, {6, 2, 0}, {4, 6, 2}, {7, 6, 2}};
  static const char* kTech[5] = {"SC-A", "SC-B", "SC-Sat", "MC-Cellular", "MC-Cell-Sat"};

  Outcome o;
  const auto t0 = Clock::now();
  const auto reqs = load_requirements(kData / "fixtures/requirements.json");
  const auto table = load_availability(kData / "fixtures/availability.json");
  const FeasibilityMatrix m = feasibility_matrix(table, reqs);
  const double elapsed = seconds_since(t0);

  int mismatched_cells = 0;
  for (const auto& [uc, classes] : kClasses) {
    std::string got;
    for (const char* tech : kTech) {
      for (Verdict v : m.at(uc, tech).verdict) got += v == Verdict::Pass ? 'P' : v == Verdict::NearMiss ? 'N' : 'F';
    }
    for (std::size_t i = 0; i < got.size(); ++i) mismatched_cells += got[i] != classes[i];
    o.require(got == classes, std::string(uc) + " got " + got);
  }
  int mismatched_counts = 0;
  for (std::size_t t = 0; t < 5; ++t) {
    o.require(m.technologies.at(t) == kTech[t], "technology order");
    for (std::size_t k = 0; k < 3; ++k) {
      if (m.ready[t][k] != kReady[t][k]) {
        ++mismatched_counts;
        o.require(false, std::string(kTech[t]) + " ready[" + std::to_string(k) + "]=" + std::to_string(m.ready[t][k]));
      }
    }
  }
  o.require(m.counted_use_cases == 9, "counted use cases " + std::to_string(m.counted_use_cases));
  o.require(elapsed < 1.0, "runtime " + fmt(elapsed) + " s");
  o.note("180 classes, " + std::to_string(mismatched_cells) + " mismatched; 15 ready counts, " +
         std::to_string(mismatched_counts) + " mismatched; " + fmt(elapsed * 1e3, 3) + " ms");
  return o;
}

// --- 2 --------------------------------------------------------------------

// sup |F_n - F| for Uniform(0, 1) samples.
double ks_uniform(std::vector<double>& u) {
  std::sort(u.begin(), u.end());
  const double n = double(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d = std::max(d, std::max(double(i + 1) / n - u[i], u[i] - double(i) / n));
  }
  return d;
}

Outcome statistical_formulas() {
  Outcome o;
  const auto t0 = Clock::now();

  double worst_rel = 0.0;
  for (std::uint64_t n : {1ull, 10ull, 100ull, 1000ull, 10000ull, 72000ull, 1000000ull}) {
    const double hand = std::sqrt(std::log(2.0 / 0.01) / (2.0 * double(n)));
    worst_rel = std::max(worst_rel, std::abs(dkw_epsilon(n, 0.01) - hand) / hand);
  }
  o.require(worst_rel <= 1e-12, "dkw relative error " + fmt(worst_rel));

  std::mt19937_64 gen(20240601);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  constexpr int kTrials = 1000;
  constexpr std::size_t kN = 10000;
  const double eps = dkw_epsilon(kN, 0.01);
  int violations = 0;
  std::vector<double> u(kN);
  for (int t = 0; t < kTrials; ++t) {
    for (auto& x : u) x = unif(gen);
    violations += ks_uniform(u) > eps;
  }
  const double viol_rate = double(violations) / kTrials;
  o.require(viol_rate <= 0.017, "dkw band violated in " + fmt(viol_rate * 100) + "% of trials");

  double worst_exact = 1.0;
  double worst_mc = 1.0;
  std::string worst_at;
  for (double p : {0.5, 0.9, 0.99, 0.999}) {
    for (std::uint64_t n : {1000ull, 10000ull, 100000ull}) {
      const double exact = wilson_exact_coverage(p, n, 0.01);
      std::binomial_distribution<std::uint64_t> bin(n, p);
      int covered = 0;
      for (int t = 0; t < kTrials; ++t) {
        const auto w = wilson_interval(bin(gen), n, 0.01);
        covered += w.lower <= p && p <= w.upper;
      }
      const double mc = double(covered) / kTrials;
      if (std::min(exact, mc) < std::min(worst_exact, worst_mc)) worst_at = "p=" + fmt(p) + " n=" + std::to_string(n);
      worst_exact = std::min(worst_exact, exact);
      worst_mc = std::min(worst_mc, mc);
      // Coverage itself from the binomial pmf; the 1,000-trial estimate gets
      // the (1 - alpha) - 2% gate.
      o.require(exact >= 0.98, "exact wilson coverage " + fmt(exact) + " at p=" + fmt(p) + " n=" + std::to_string(n));
      o.require(mc >= (1.0 - 0.01) - 0.02, "simulated wilson coverage " + fmt(mc) + " at p=" + fmt(p) + " n=" + std::to_string(n));
    }
  }
  const double elapsed = seconds_since(t0);
  o.require(elapsed < 60.0, "runtime " + fmt(elapsed) + " s");
  o.note("dkw rel err " + fmt(worst_rel, 2) + "; dkw violations " + fmt(viol_rate * 100, 3) +
         "%; wilson coverage min exact " + fmt(worst_exact) + ", simulated " + fmt(worst_mc) + " (" + worst_at + "); " +
         fmt(elapsed, 3) + " s");
  return o;
}

// --- 3 --------------------------------------------------------------------

Outcome min_selection() {
  Outcome o;
  const auto t0 = Clock::now();
  const Scenario s = probe_only("cell_sat_mc.json");
  const ProbeConfig& cfg = *s.probe;

  // Combined run: every copy's reply time is kept in the records.
  EmulatedTransport mc_t(s.links, *s.seed);
  const ProbeRun mc = run_latency_probe(mc_t, cfg, FullDuplication{});
  // Single-link runs on the same seed.
  std::vector<ProbeRun> sc;
  for (const auto& link : s.links) {
    EmulatedTransport t({link}, *s.seed);
    sc.push_back(run_latency_probe(t, cfg, FullDuplication{}));
  }
  const double elapsed = seconds_since(t0);

  const std::size_t n = mc.series.samples.size();
  o.require(n == 72000, "probe count " + std::to_string(n));
  std::size_t min_mismatch = 0, copy_mismatch = 0, outage_mismatch = 0, mc_outages = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const FrameRecord& rec = mc.records[i];
    double best = kInf;
    for (const auto& arr : rec.reply_arrival_ns) {
      if (arr) best = std::min(best, double(*arr - rec.send_ns) / 1e6);
    }
    if (best > cfg.outage_threshold_ms) best = kInf;
    const double got = rtt_or_inf(mc.series.samples[i]);
    min_mismatch += got != best;

    // Each copy is the same draw as the single-link run of that link.
    bool all_out = true;
    for (std::size_t l = 0; l < sc.size(); ++l) {
      const double solo = rtt_or_inf(sc[l].series.samples[i]);
      const auto& arr = rec.reply_arrival_ns[l];
      double copy = arr ? double(*arr - rec.send_ns) / 1e6 : kInf;
      if (copy > cfg.outage_threshold_ms) copy = kInf;
      copy_mismatch += copy != solo;
      all_out = all_out && sc[l].series.samples[i].outage;
    }
    outage_mismatch += mc.series.samples[i].outage != all_out;
    mc_outages += mc.series.samples[i].outage;
  }
  o.require(min_mismatch == 0, std::to_string(min_mismatch) + " probes differ from the per-copy minimum");
  o.require(copy_mismatch == 0, std::to_string(copy_mismatch) + " copies differ from their single-link run");
  o.require(outage_mismatch == 0, std::to_string(outage_mismatch) + " probes break the outage intersection");
  const auto violations = check_min_selection(mc.series, {&sc[0].series, &sc[1].series});
  o.require(violations.empty(), "library check: " + (violations.empty() ? "" : violations.front()));
  o.require(elapsed < 30.0, "runtime " + fmt(elapsed) + " s");
  o.note(std::to_string(n) + " probes, " + std::to_string(sc[0].series.outage_count()) + "/" +
         std::to_string(sc[1].series.outage_count()) + " single-link outages, " + std::to_string(mc_outages) +
         " combined; " + fmt(elapsed, 3) + " s");
  return o;
}

// --- 4 --------------------------------------------------------------------

double rtt_median(const LinkProfile& p, std::uint64_t draws) {
  const RngStream root = RngStream::from_seed(4242).split(p.name);
  const RngStream up = root.split("up"), down = root.split("down");
  std::vector<double> v(draws);
  for (std::uint64_t i = 0; i < draws; ++i) {
    v[i] = sample_one_way_delay(p.latency, up, i) + sample_one_way_delay(p.latency, down, i);
  }
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.5);
}

Outcome profile_fidelity() {
  Outcome o;
  const auto profiles = load_profiles(kData / "profiles/fitted.json");
  auto find = [&](const std::string& name) {
    return *std::find_if(profiles.begin(), profiles.end(), [&](const LinkProfile& p) { return p.name == name; });
  };
  const double sat = rtt_median(find("Sat"), 100000);
  const double b = rtt_median(find("B"), 100000);
  o.require(std::abs(sat - 90.8) <= 2.0, "satellite median " + fmt(sat));
  o.require(std::abs(b - 28.9) <= 2.0, "cellular B median " + fmt(b));
  o.note("1e5 draws: satellite median " + fmt(sat) + " ms (90.8 +/- 2), B median " + fmt(b) + " ms (28.9 +/- 2)");
  return o;
}

// --- 5 --------------------------------------------------------------------

Outcome mc_dominance() {
  Outcome o;
  std::string notes;
  for (const char* file : {"cell_sat_mc.json", "cellular_mc.json"}) {
    const Scenario s = probe_only(file);
    const RunReport r = run_experiment(s, {.persist = false});
    o.require(r.ok(), std::string(file) + " run not clean");
    const DistributionSummary mc = summarize(r.series.latency.at(s.technology));
    double med = kInf, out = kInf, q99 = kInf;
    for (const auto& link : s.links) {
      const DistributionSummary sc = summarize(r.series.latency.at("SC-" + link.name));
      med = std::min(med, sc.median.value_or(kInf));
      out = std::min(out, sc.outage_probability);
      q99 = std::min(q99, tail_or_inf(sc.upper_tails.at(0)));
    }
    const double mc_med = mc.median.value_or(kInf);
    const double mc_q99 = tail_or_inf(mc.upper_tails.at(0));
    o.require(mc_med <= med + 1.0, s.technology + " median " + fmt(mc_med) + " > " + fmt(med) + " + 1");
    o.require(mc.outage_probability <= out, s.technology + " outage " + fmt(mc.outage_probability) + " > " + fmt(out));
    o.require(mc_q99 <= q99, s.technology + " q99 " + fmt(mc_q99) + " > " + fmt(q99));
    o.note(s.technology + ": median " + fmt(mc_med) + "/" + fmt(med) + ", outage " + fmt(mc.outage_probability) + "/" +
           fmt(out) + ", q99 " + fmt(mc_q99) + "/" + fmt(q99) + " (MC/best SC)");
  }
  return o;
}

// --- 6 --------------------------------------------------------------------

LinkProfile lossless(const std::string& name, double cap_mbps) {
  LinkProfile p;
  p.name = name;
  p.latency = ConstantLatency{10.0};
  p.capacity_up_mbps = cap_mbps;
  p.capacity_down_mbps = cap_mbps;
  return p;
}

Outcome throughput_conservation() {
  Outcome o;
  std::string notes;
  for (auto [cap, tol] : {std::pair{100.0, 1.0}, std::pair{20.0, 0.5}}) {
    for (Direction dir : {Direction::Uplink, Direction::Downlink}) {
      EmulatedTransport t({lossless("a", cap)}, 1);
      LoadConfig cfg;
      cfg.direction = dir;
      cfg.target_mbps = 100.0;
      cfg.duration_s = 60.0;
      const LoadRun run = run_load(t, cfg, {0});
      double lo = kInf, hi = -kInf;
      for (const auto& s : run.series.samples) {
        lo = std::min(lo, s.value.value_or(0.0));
        hi = std::max(hi, s.value.value_or(0.0));
      }
      const std::string tag = fmt(cap) + " Mbps " + (dir == Direction::Uplink ? "ul" : "dl");
      o.require(run.series.samples.size() == 60, tag + " bins " + std::to_string(run.series.samples.size()));
      o.require(lo >= cap - tol && hi <= cap + tol, tag + " bins in [" + fmt(lo, 6) + ", " + fmt(hi, 6) + "]");
      o.note(tag + " [" + fmt(lo, 6) + ", " + fmt(hi, 6) + "]");
    }
  }
  return o;
}

// --- 7 --------------------------------------------------------------------

Outcome dedup_property() {
  Outcome o;
  constexpr std::uint64_t kFrames = 1000000;
  const RngStream rng = RngStream::from_seed(77).split("dedup");
  struct Copy {
    std::int64_t at_ns;
    std::uint32_t link;
    std::uint64_t seq;
  };
  std::vector<Copy> copies;
  copies.reserve(2 * kFrames);
  std::uint64_t oracle[2] = {0, 0};
  std::uint64_t oracle_total = 0;
  for (std::uint64_t seq = 0; seq < kFrames; ++seq) {
    const std::int64_t send = std::int64_t(seq) * 1000000;  // 1 ms spacing
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    int arg = -1;
    for (std::uint32_t l = 0; l < 2; ++l) {
      const std::uint64_t idx = seq * 4 + l * 2;
      if (rng.uniform(idx) < 0.05) continue;  // copy lost
      // Link 1 is slower on average; the spreads overlap so both win often.
      const double ms = (l == 0 ? 20.0 : 25.0) + 30.0 * rng.uniform(idx + 1);
      const std::int64_t at = send + std::int64_t(ms * 1e6);
      copies.push_back({at, l, seq});
      if (at < best || (at == best && int(l) < arg)) {
        best = at;
        arg = int(l);
      }
    }
    if (arg >= 0) {
      ++oracle[arg];
      ++oracle_total;
    }
  }
  // Arrival order; equal times go to the lower link index, as in the oracle.
  std::sort(copies.begin(), copies.end(), [](const Copy& a, const Copy& b) {
    return a.at_ns != b.at_ns ? a.at_ns < b.at_ns : a.link < b.link;
  });
  DedupState dedup;
  LinkShareAccounting acc({"a", "b"});
  std::vector<std::uint8_t> accepted(kFrames, 0);
  std::uint64_t dup_accepts = 0;
  for (const auto& c : copies) {
    if (on_copy_arrival(dedup, acc, c.link, 9, c.seq, c.at_ns).accepted()) {
      dup_accepts += accepted[c.seq]++ > 0;
    }
  }
  o.require(dup_accepts == 0, std::to_string(dup_accepts) + " duplicate acceptances");
  o.require(acc.total() == oracle_total, "accepted " + std::to_string(acc.total()) + " of " + std::to_string(oracle_total));
  double worst = 0.0;
  for (std::size_t l = 0; l < 2; ++l) {
    const double want = double(oracle[l]) / double(oracle_total);
    worst = std::max(worst, std::abs(acc.fraction(l) - want));
  }
  o.require(worst <= 1e-9, "fraction error " + fmt(worst));
  o.note(std::to_string(copies.size()) + " copies of " + std::to_string(kFrames) + " frames; fractions " +
         fmt(acc.fraction(0), 6) + "/" + fmt(acc.fraction(1), 6) + ", max error " + fmt(worst, 2) + "; 0 duplicates");
  return o;
}

// --- 8 --------------------------------------------------------------------

struct LoopbackServer {
  TunnelServer server;
  std::atomic<bool> stop{false};
  std::thread thread;

  LoopbackServer() : server({{"fast", "127.0.0.1:0"}, {"slow", "127.0.0.1:0"}}) {
    thread = std::thread([this] { server.run(stop); });
  }
  ~LoopbackServer() {
    stop = true;
    thread.join();
  }
};

Outcome loopback_tunnel() {
  Outcome o;
  LoopbackServer srv;
  const auto eps = srv.server.local_endpoints();
  ProbeConfig cfg;
  cfg.interval_ms = 10;
  cfg.duration_s = 3.0;

  double solo = kInf, both = kInf;
  {
    TunnelClient client({{"fast", format_endpoint(eps[0]), "127.0.0.1:0", 0.0}});
    const ProbeRun r = run_latency_probe(client, cfg);
    o.require(r.series.outage_count() == 0, "solo run had outages");
    solo = quantile(ecdf(r.series), 0.5);
  }
  {
    TunnelClient client({{"fast", format_endpoint(eps[0]), "127.0.0.1:0", 0.0},
                         {"slow", format_endpoint(eps[1]), "127.0.0.1:0", 50.0}});
    const ProbeRun r = run_latency_probe(client, cfg);
    o.require(r.series.outage_count() == 0, "two-path run had outages");
    both = quantile(ecdf(r.series), 0.5);
  }
  o.require(std::abs(both - solo) <= 5.0, "median " + fmt(both) + " ms vs solo " + fmt(solo) + " ms");

  // Encapsulation work per frame: encode, decode and first-arrival check.
  TunnelFrame f;
  f.kind = FrameKind::Load;
  f.flow_id = 3;
  f.payload.assign(kDefaultLoadPayload, 0xA5);
  std::vector<std::uint8_t> wire;
  DedupState dedup;
  constexpr int kIters = 200000;
  std::uint64_t sink = 0;
  const auto t0 = Clock::now();
  for (int i = 0; i < kIters; ++i) {
    f.seq = std::uint64_t(i);
    f.send_ts_ns = std::uint64_t(i) * 1000;
    encode_frame_into(f, wire);
    const TunnelFrame back = decode_frame(wire);
    sink += back.seq + (dedup.accept(back.flow_id, back.seq) == DedupDecision::Accept);
  }
  const double per_frame_ms = seconds_since(t0) * 1e3 / kIters;
  o.require(sink > 0, "benchmark optimized away");
  o.require(per_frame_ms < 1.0, "encapsulation " + fmt(per_frame_ms) + " ms per frame");
  o.note("median " + fmt(both) + " ms with +50 ms second path vs " + fmt(solo) + " ms solo; encapsulation " +
         fmt(per_frame_ms * 1e3, 3) + " us per " + std::to_string(kDefaultLoadPayload) + " B frame");
  return o;
}

// --- 9 --------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "mcdup_acceptance_determinism";
  fs::remove_all(root);
  std::size_t files = 0;
  for (const char* file : {"smoke.json", "cell_sat_mc.json"}) {
    std::vector<fs::path> dirs;
    for (int rep = 0; rep < 2; ++rep) {
      Scenario s = load_scenario(kData / "scenarios" / file);
      s.event_log = true;
      s.output_dir = (root / (s.name + "_" + std::to_string(rep))).string();
      const RunReport r = run_experiment(s);
      o.require(r.ok(), std::string(file) + " run not clean");
      dirs.push_back(r.output_dir);
    }
    std::size_t first = 0;
    for (const auto& entry : fs::recursive_directory_iterator(dirs[0])) {
      if (!entry.is_regular_file()) continue;
      const fs::path rel = fs::relative(entry.path(), dirs[0]);
      ++first;
      o.require(fs::exists(dirs[1] / rel) && slurp(entry.path()) == slurp(dirs[1] / rel),
                std::string(file) + ": " + rel.string() + " differs");
    }
    std::size_t other = 0;
    for (const auto& entry : fs::recursive_directory_iterator(dirs[1])) other += entry.is_regular_file();
    o.require(other == first && first > 0, std::string(file) + ": file sets differ");
    files += first;
  }
  fs::remove_all(root);
  o.note(std::to_string(files) + " files compared byte for byte across repeated runs");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"feasibility-fixture", feasibility_fixture},
      {"statistical-formulas", statistical_formulas},
      {"min-selection-invariant", min_selection},
      {"profile-fidelity", profile_fidelity},
      {"mc-improvement", mc_dominance},
      {"throughput-conservation", throughput_conservation},
      {"dedup-property", dedup_property},
      {"loopback-tunnel", loopback_tunnel},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
