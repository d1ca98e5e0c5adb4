#include "mcdup/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "overloaded.hpp"

namespace mcdup {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Problems {
 public:
  void add(const std::string& where, const std::string& what) {
    items_.push_back(where.empty() ? what : where + ": " + what);
  }
  bool empty() const { return items_.empty(); }

  template <class F>
  void guard(const std::string& where, F&& f) {
    try {
      f();
    } catch (const ConfigError& e) {
      add(where, e.what());
    } catch (const std::invalid_argument& e) {
      add(where, e.what());
    } catch (const json::exception& e) {
      add(where, e.what());
    }
  }

  void raise_if_any() const {
    if (items_.empty()) return;
    std::string msg = std::to_string(items_.size()) + " configuration error" + (items_.size() == 1 ? "" : "s") + ":";
    for (const auto& i : items_) msg += "\n  " + i;
    throw ConfigError(msg);
  }

 private:
  std::vector<std::string> items_;
};

// Typed access to one JSON object; remembers which keys were read so that
// unknown (usually misspelt) keys can be reported.
class Fields {
 public:
  Fields(const json& j, std::string where, Problems& p) : j_(j), where_(std::move(where)), p_(p) {
    if (!j_.is_object()) p_.add(where_, "expected an object");
  }

  bool has(const char* key) {
    used_.insert(key);
    return j_.is_object() && j_.contains(key) && !j_.at(key).is_null();
  }
  const json& raw(const char* key) { return j_.at(key); }

  double number(const char* key, double dflt) {
    if (!has(key)) return dflt;
    const json& v = j_.at(key);
    if (!v.is_number()) {
      p_.add(where_, std::string("'") + key + "' must be a number");
      return dflt;
    }
    return v.get<double>();
  }
  std::uint64_t unsigned_int(const char* key, std::uint64_t dflt) {
    if (!has(key)) return dflt;
    const json& v = j_.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      if (v.is_number()) {
        p_.add(where_, std::string("'") + key + "' must be a non-negative integer");
      } else {
        p_.add(where_, std::string("'") + key + "' must be an integer");
      }
      return dflt;
    }
    return v.get<std::uint64_t>();
  }
  std::string string(const char* key, const std::string& dflt) {
    if (!has(key)) return dflt;
    const json& v = j_.at(key);
    if (!v.is_string()) {
      p_.add(where_, std::string("'") + key + "' must be a string");
      return dflt;
    }
    return v.get<std::string>();
  }
  bool boolean(const char* key, bool dflt) {
    if (!has(key)) return dflt;
    const json& v = j_.at(key);
    if (!v.is_boolean()) {
      p_.add(where_, std::string("'") + key + "' must be true or false");
      return dflt;
    }
    return v.get<bool>();
  }

  void reject_unknown() {
    if (!j_.is_object()) return;
    for (const auto& [k, v] : j_.items()) {
      if (!used_.count(k)) p_.add(where_, "unknown key '" + k + "'");
    }
  }

  const std::string& where() const { return where_; }
  Problems& problems() { return p_; }

 private:
  const json& j_;
  std::string where_;
  Problems& p_;
  std::set<std::string> used_;
};

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

LatencyModel parse_latency(Fields& f, const fs::path& base) {
  const std::string type = f.string("type", "");
  const std::string values = f.string("values", "one-way");
  double scale = 1.0;
  if (values == "rtt") {
    scale = 0.5;
  } else if (values != "one-way") {
    f.problems().add(f.where(), "'values' must be \"one-way\" or \"rtt\"");
  }
  LatencyModel model = ConstantLatency{};
  if (type == "constant") {
    model = ConstantLatency{f.number("ms", 0.0) * scale};
  } else if (type == "normal") {
    model = NormalLatency{f.number("mean_ms", 0.0) * scale, f.number("stddev_ms", 0.0) * scale,
                          f.number("floor_ms", 0.0) * scale};
  } else if (type == "lognormal") {
    model = LognormalLatency{f.number("mu", 0.0) + std::log(scale), f.number("sigma", 0.0),
                             f.number("floor_ms", 0.0) * scale};
  } else if (type == "quantile-table") {
    const bool csv = f.has("csv");
    const bool knots = f.has("knots");
    if (csv == knots) {
      f.problems().add(f.where(), "quantile-table needs exactly one of 'csv' or 'knots'");
    } else if (csv) {
      const std::string path = f.string("csv", "");
      f.problems().guard(f.where(), [&] { model = QuantileTable::from_csv(resolve(base, path), scale); });
    } else {
      f.problems().guard(f.where(), [&] {
        std::vector<QuantileKnot> k;
        for (const auto& row : f.raw("knots")) k.push_back({row.at(0).get<double>(), row.at(1).get<double>() * scale});
        model = QuantileTable(std::move(k));
      });
    }
  } else {
    f.problems().add(f.where(), "latency 'type' must be constant, normal, lognormal or quantile-table");
  }
  return model;
}

OutageProcess parse_outage(Fields&& f, const fs::path& base) {
  const std::string type = f.string("type", "none");
  OutageProcess out = NoOutage{};
  if (type == "none") {
  } else if (type == "scheduled") {
    ScheduledOutage s;
    if (f.has("windows_s")) {
      f.problems().guard(f.where(), [&] {
        for (const auto& w : f.raw("windows_s")) s.windows_s.emplace_back(w.at(0).get<double>(), w.at(1).get<double>());
      });
    }
    out = s;
  } else if (type == "gilbert-elliott") {
    out = GilbertElliott{f.number("p_good_to_bad", 0.0), f.number("p_bad_to_good", 1.0), f.number("tick_s", 0.1)};
  } else if (type == "rsrp-trace") {
    RsrpOutage r;
    r.threshold_dbm = f.number("threshold_dbm", -100.0);
    r.source = f.string("csv", "");
    if (r.source.empty()) {
      f.problems().add(f.where(), "rsrp-trace needs 'csv'");
    } else {
      f.problems().guard(f.where(), [&] {
        r.trace = std::make_shared<const RsrpTrace>(RsrpTrace::from_csv(resolve(base, r.source)));
      });
    }
    out = r;
  } else {
    f.problems().add(f.where(), "outage 'type' must be none, scheduled, gilbert-elliott or rsrp-trace");
  }
  f.reject_unknown();
  return out;
}

LinkProfile parse_profile_into(const json& doc, const fs::path& base, Problems& p, const std::string& where) {
  Fields f(doc, where, p);
  LinkProfile prof;
  prof.name = f.string("name", "");
  if (prof.name.empty()) p.add(where, "profile needs a 'name'");
  const std::string at = prof.name.empty() ? where : "profile " + prof.name;
  f.string("description", "");
  if (f.has("latency")) {
    Fields lf(f.raw("latency"), at + " latency", p);
    prof.latency = parse_latency(lf, base);
    lf.reject_unknown();
  } else {
    p.add(at, "profile needs 'latency'");
  }
  prof.loss_prob = f.number("loss_prob", 0.0);
  if (f.has("capacity_mbps")) {
    const json& c = f.raw("capacity_mbps");
    if (c.is_number()) {
      prof.capacity_up_mbps = prof.capacity_down_mbps = c.get<double>();
    } else {
      Fields cf(c, at + " capacity_mbps", p);
      prof.capacity_up_mbps = cf.number("up", prof.capacity_up_mbps);
      prof.capacity_down_mbps = cf.number("down", prof.capacity_down_mbps);
      cf.reject_unknown();
    }
  }
  prof.bucket_bytes = f.unsigned_int("bucket_bytes", prof.bucket_bytes);
  prof.queue_bytes = f.unsigned_int("queue_bytes", prof.queue_bytes);
  if (f.has("outage")) prof.outage = parse_outage(Fields(f.raw("outage"), at + " outage", p), base);
  f.reject_unknown();
  if (!prof.name.empty()) p.guard(at, [&] { validate(prof); });
  return prof;
}

std::vector<LinkProfile> profiles_from_file(const fs::path& path, Problems& p) {
  std::vector<LinkProfile> out;
  json doc;
  try {
    doc = read_json(path);
  } catch (const ConfigError& e) {
    p.add("", e.what());
    return out;
  }
  Fields f(doc, path.filename().string(), p);
  if (!f.has("profiles") || !f.raw("profiles").is_array()) {
    p.add(path.string(), "expected a 'profiles' array");
    return out;
  }
  std::size_t i = 0;
  for (const auto& item : f.raw("profiles")) {
    out.push_back(parse_profile_into(item, path.parent_path(), p, path.filename().string() + " profile #" + std::to_string(i++)));
  }
  f.string("description", "");
  f.reject_unknown();
  return out;
}

Direction parse_direction(const std::string& s, Problems& p, const std::string& where) {
  if (s == "downlink" || s == "dl" || s == "DL") return Direction::Downlink;
  if (s == "uplink" || s == "ul" || s == "UL") return Direction::Uplink;
  p.add(where, "direction must be downlink or uplink, got '" + s + "'");
  return Direction::Downlink;
}

DuplicationPolicy parse_policy_into(const json& doc, Problems& p) {
  if (doc.is_string()) {
    try {
      return parse_policy_flag(doc.get<std::string>());
    } catch (const ConfigError& e) {
      p.add("policy", e.what());
      return FullDuplication{};
    }
  }
  Fields f(doc, "policy", p);
  const std::string type = f.string("type", "full-duplication");
  DuplicationPolicy out = FullDuplication{};
  if (type == "full" || type == "full-duplication") {
  } else if (type == "primary-with-backup") {
    PrimaryWithBackup pwb;
    pwb.primary = f.string("primary", "");
    pwb.rtt_threshold_ms = f.number("rtt_threshold_ms", pwb.rtt_threshold_ms);
    pwb.window = f.unsigned_int("window", pwb.window);
    out = pwb;
  } else if (type == "quality-switch") {
    QualitySwitch qs;
    qs.hysteresis_ms = f.number("hysteresis_ms", qs.hysteresis_ms);
    qs.window = f.unsigned_int("window", qs.window);
    out = qs;
  } else {
    p.add("policy", "type must be full-duplication, primary-with-backup or quality-switch");
  }
  f.reject_unknown();
  return out;
}

json latency_json(const LatencyModel& m) {
  return std::visit(Overloaded{
                        [](const ConstantLatency& c) { return json{{"type", "constant"}, {"ms", c.ms}}; },
                        [](const NormalLatency& n) {
                          return json{{"type", "normal"},
                                      {"mean_ms", n.mean_ms},
                                      {"stddev_ms", n.stddev_ms},
                                      {"floor_ms", n.floor_ms}};
                        },
                        [](const LognormalLatency& l) {
                          return json{{"type", "lognormal"}, {"mu", l.mu}, {"sigma", l.sigma}, {"floor_ms", l.floor_ms}};
                        },
                        [](const QuantileTable& q) {
                          json knots = json::array();
                          for (const auto& k : q.knots()) knots.push_back({k.p, k.value_ms});
                          return json{{"type", "quantile-table"}, {"knots", knots}};
                        },
                    },
                    m);
}

json outage_json(const OutageProcess& o) {
  return std::visit(Overloaded{
                        [](const NoOutage&) { return json{{"type", "none"}}; },
                        [](const ScheduledOutage& s) {
                          json w = json::array();
                          for (const auto& [a, b] : s.windows_s) w.push_back({a, b});
                          return json{{"type", "scheduled"}, {"windows_s", w}};
                        },
                        [](const GilbertElliott& g) {
                          return json{{"type", "gilbert-elliott"},
                                      {"p_good_to_bad", g.p_good_to_bad},
                                      {"p_bad_to_good", g.p_bad_to_good},
                                      {"tick_s", g.tick_s}};
                        },
                        [](const RsrpOutage& r) {
                          std::ostringstream digest;
                          if (r.trace) {
                            for (const auto& rec : r.trace->records()) {
                              digest << format_number(rec.time_s) << ',' << format_number(rec.rsrp_dbm) << ','
                                     << rec.tech << '\n';
                            }
                          }
                          return json{{"type", "rsrp-trace"},
                                      {"threshold_dbm", r.threshold_dbm},
                                      {"trace_fnv1a64", hex64(fnv1a64(digest.str()))}};
                        },
                    },
                    o);
}

json policy_json(const DuplicationPolicy& policy) {
  return std::visit(Overloaded{
                        [](const FullDuplication&) { return json{{"type", "full-duplication"}}; },
                        [](const PrimaryWithBackup& p) {
                          return json{{"type", "primary-with-backup"},
                                      {"primary", p.primary},
                                      {"rtt_threshold_ms", p.rtt_threshold_ms},
                                      {"window", p.window}};
                        },
                        [](const QualitySwitch& q) {
                          return json{{"type", "quality-switch"}, {"hysteresis_ms", q.hysteresis_ms}, {"window", q.window}};
                        },
                    },
                    policy);
}

}  // namespace

const char* to_string(TransportMode mode) { return mode == TransportMode::Emulated ? "emulated" : "tunnel"; }

std::vector<std::string> Scenario::link_names() const {
  std::vector<std::string> out;
  if (mode == TransportMode::Emulated) {
    for (const auto& l : links) out.push_back(l.name);
  } else {
    for (const auto& p : tunnel_paths) out.push_back(p.name);
  }
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

DuplicationPolicy parse_policy_flag(const std::string& text) {
  if (text == "full" || text == "full-duplication") return FullDuplication{};
  if (text == "quality-switch") return QualitySwitch{};
  const std::string pwb = "primary-with-backup";
  if (text.rfind(pwb, 0) == 0) {
    PrimaryWithBackup p;
    if (text.size() > pwb.size()) {
      if (text[pwb.size()] != ':') throw ConfigError("unknown policy '" + text + "'");
      p.primary = text.substr(pwb.size() + 1);
    }
    return p;
  }
  throw ConfigError("unknown policy '" + text + "' (full, primary-with-backup[:LINK], quality-switch)");
}

DuplicationPolicy parse_policy(const json& doc) {
  Problems p;
  auto out = parse_policy_into(doc, p);
  p.raise_if_any();
  return out;
}

LinkProfile parse_profile(const json& doc, const fs::path& base_dir) {
  Problems p;
  auto out = parse_profile_into(doc, base_dir, p, "profile");
  p.raise_if_any();
  return out;
}

std::vector<LinkProfile> load_profiles(const fs::path& path) {
  Problems p;
  auto out = profiles_from_file(path, p);
  p.raise_if_any();
  return out;
}

std::vector<UseCaseRequirement> load_requirements(const fs::path& path) {
  const json doc = read_json(path);
  Problems p;
  Fields f(doc, path.filename().string(), p);
  std::vector<UseCaseRequirement> out;
  if (!f.has("use_cases") || !f.raw("use_cases").is_array()) {
    p.add(path.string(), "expected a 'use_cases' array");
  } else {
    std::size_t i = 0;
    for (const auto& item : f.raw("use_cases")) {
      Fields u(item, "use case #" + std::to_string(i++), p);
      UseCaseRequirement r;
      r.name = u.string("name", "");
      r.availability = u.number("availability", r.availability);
      r.max_latency_ms = u.number("max_latency_ms", r.max_latency_ms);
      r.min_dl_mbps = u.number("min_dl_mbps", r.min_dl_mbps);
      r.min_ul_mbps = u.number("min_ul_mbps", r.min_ul_mbps);
      r.counted = u.boolean("counted", true);
      u.string("description", "");
      u.reject_unknown();
      p.guard(u.where(), [&] { validate(r); });
      out.push_back(r);
    }
  }
  f.string("description", "");
  f.reject_unknown();
  p.raise_if_any();
  return out;
}

AvailabilityTable load_availability(const fs::path& path) {
  const json doc = read_json(path);
  Problems p;
  Fields f(doc, path.filename().string(), p);
  AvailabilityTable t;
  if (f.has("technologies")) {
    p.guard(f.where(), [&] { t.technologies = f.raw("technologies").get<std::vector<std::string>>(); });
  }
  if (!f.has("cells") || !f.raw("cells").is_object()) {
    p.add(path.string(), "expected a 'cells' object {use case: {technology: [lat, dl, ul]}}");
  } else {
    for (const auto& [uc, row] : f.raw("cells").items()) {
      if (!row.is_object()) {
        p.add(uc, "expected an object of technology triples");
        continue;
      }
      for (const auto& [tech, v] : row.items()) {
        p.guard(uc + "/" + tech, [&] {
          const auto a = v.get<std::vector<double>>();
          if (a.size() != 3) throw ConfigError("expected [latency, dl, ul] percentages");
          for (double x : a) {
            if (!(x >= 0.0 && x <= 100.0)) throw ConfigError("availability must be within [0, 100]");
          }
          t.set(uc, tech, {a[0], a[1], a[2]});
        });
      }
    }
  }
  f.string("description", "");
  f.reject_unknown();
  p.raise_if_any();
  return t;
}

Scenario parse_scenario(const json& doc, const fs::path& base, const ScenarioOverrides& ov) {
  Problems p;
  Fields f(doc, "scenario", p);
  Scenario s;
  s.name = f.string("name", "");
  if (s.name.empty()) p.add("scenario", "needs a 'name'");
  f.string("description", "");

  const std::string mode = f.string("mode", "emulated");
  if (mode == "emulated") {
    s.mode = TransportMode::Emulated;
  } else if (mode == "tunnel") {
    s.mode = TransportMode::Tunnel;
  } else {
    p.add("scenario", "'mode' must be emulated or tunnel");
  }

  if (f.has("seed")) s.seed = f.unsigned_int("seed", 0);
  if (ov.seed) s.seed = ov.seed;
  if (s.mode == TransportMode::Emulated && !s.seed) p.add("scenario", "emulated runs need a 'seed'");

  const double duration = ov.duration_s.value_or(f.number("duration_s", 60.0));

  // Profile library and link selection.
  std::vector<LinkProfile> library;
  if (f.has("profiles")) {
    const json& pj = f.raw("profiles");
    auto take = [&](const json& item, const std::string& where) {
      if (item.is_string()) {
        for (auto& l : profiles_from_file(resolve(base, item.get<std::string>()), p)) library.push_back(std::move(l));
      } else {
        library.push_back(parse_profile_into(item, base, p, where));
      }
    };
    if (pj.is_array()) {
      std::size_t i = 0;
      for (const auto& item : pj) take(item, "profiles[" + std::to_string(i++) + "]");
    } else {
      take(pj, "profiles");
    }
  }
  {
    std::set<std::string> names;
    for (const auto& l : library) {
      if (!l.name.empty() && !names.insert(l.name).second) p.add("profiles", "profile '" + l.name + "' defined twice");
    }
  }
  std::vector<std::string> wanted;
  if (f.has("links")) p.guard("links", [&] { wanted = f.raw("links").get<std::vector<std::string>>(); });
  if (ov.profiles) wanted = *ov.profiles;
  if (s.mode == TransportMode::Emulated) {
    if (wanted.empty()) {
      s.links = library;
    } else {
      for (const auto& name : wanted) {
        auto it = std::find_if(library.begin(), library.end(), [&](const LinkProfile& l) { return l.name == name; });
        if (it == library.end()) {
          p.add("links", "no profile named '" + name + "'");
        } else {
          s.links.push_back(*it);
        }
      }
    }
    if (s.links.empty() && library.empty()) p.add("scenario", "emulated runs need at least one link profile");
    std::set<std::string> seen;
    for (const auto& name : wanted) {
      if (!seen.insert(name).second) p.add("links", "link '" + name + "' listed twice");
    }
  }

  if (f.has("tunnel")) {
    Fields tf(f.raw("tunnel"), "tunnel", p);
    s.handshake_timeout = std::chrono::milliseconds(tf.unsigned_int("handshake_timeout_ms", 2000));
    if (tf.has("paths") && tf.raw("paths").is_array()) {
      std::size_t i = 0;
      for (const auto& item : tf.raw("paths")) {
        Fields pf(item, "tunnel path #" + std::to_string(i++), p);
        ClientPath cp;
        cp.name = pf.string("name", "");
        cp.remote = pf.string("remote", "");
        cp.bind = pf.string("bind", cp.bind);
        cp.egress_delay_ms = pf.number("egress_delay_ms", 0.0);
        pf.reject_unknown();
        if (cp.name.empty()) p.add(pf.where(), "needs a 'name'");
        p.guard(pf.where(), [&] {
          parse_endpoint(cp.remote);
          parse_endpoint(cp.bind);
          if (!(cp.egress_delay_ms >= 0.0)) throw ConfigError("egress_delay_ms must be >= 0");
        });
        s.tunnel_paths.push_back(cp);
      }
    } else {
      p.add("tunnel", "expected a 'paths' array");
    }
    tf.reject_unknown();
    if (ov.profiles) {
      std::vector<ClientPath> chosen;
      for (const auto& name : *ov.profiles) {
        auto it = std::find_if(s.tunnel_paths.begin(), s.tunnel_paths.end(), [&](const ClientPath& c) { return c.name == name; });
        if (it == s.tunnel_paths.end()) {
          p.add("tunnel", "no path named '" + name + "'");
        } else {
          chosen.push_back(*it);
        }
      }
      s.tunnel_paths = chosen;
    }
  }
  if (s.mode == TransportMode::Tunnel && s.tunnel_paths.empty()) p.add("scenario", "tunnel runs need 'tunnel.paths'");

  if (f.has("policy")) s.policy = parse_policy_into(f.raw("policy"), p);
  if (ov.policy) {
    try {
      s.policy = parse_policy_flag(*ov.policy);
    } catch (const ConfigError& e) {
      p.add("--policy", e.what());
    }
  }
  if (auto* pwb = std::get_if<PrimaryWithBackup>(&s.policy); pwb && pwb->primary.empty() && !s.link_names().empty()) {
    pwb->primary = s.link_names().front();
  }
  {
    const auto names = s.link_names();
    if (!names.empty()) p.guard("policy", [&] { validate(s.policy, names); });
  }

  if (f.has("probe") && !(f.raw("probe").is_boolean() && !f.raw("probe").get<bool>())) {
    ProbeConfig pc;
    if (!f.raw("probe").is_boolean()) {
      Fields pf(f.raw("probe"), "probe", p);
      pc.interval_ms = pf.number("interval_ms", pc.interval_ms);
      pc.payload_bytes = pf.unsigned_int("payload_bytes", pc.payload_bytes);
      pc.outage_threshold_ms = pf.number("outage_threshold_ms", pc.outage_threshold_ms);
      pc.duration_s = pf.number("duration_s", duration);
      pc.flow_id = static_cast<std::uint32_t>(pf.unsigned_int("flow_id", pc.flow_id));
      pf.reject_unknown();
    } else {
      pc.duration_s = duration;
    }
    if (ov.duration_s) pc.duration_s = *ov.duration_s;
    p.guard("probe", [&] { validate(pc); });
    if (pc.flow_id >= kReceiptFlowId) p.add("probe", "flow ids 0xFFFFFFFD and above are reserved");
    s.probe = pc;
  }
  if (f.has("load") && !(f.raw("load").is_boolean() && !f.raw("load").get<bool>())) {
    LoadPlan lp;
    lp.config.duration_s = duration;
    if (!f.raw("load").is_boolean()) {
      Fields lf(f.raw("load"), "load", p);
      auto& c = lp.config;
      c.target_mbps = lf.number("target_mbps", c.target_mbps);
      c.bin_s = lf.number("bin_s", c.bin_s);
      c.outage_threshold_kbps = lf.number("outage_threshold_kbps", c.outage_threshold_kbps);
      c.duration_s = lf.number("duration_s", duration);
      c.payload_bytes = lf.unsigned_int("payload_bytes", c.payload_bytes);
      c.flow_id = static_cast<std::uint32_t>(lf.unsigned_int("flow_id", c.flow_id));
      c.drain_s = lf.number("drain_s", c.drain_s);
      if (lf.has("directions")) {
        lp.directions.clear();
        const json& d = lf.raw("directions");
        if (d.is_string()) {
          lp.directions.push_back(parse_direction(d.get<std::string>(), p, "load"));
        } else if (d.is_array()) {
          for (const auto& x : d) lp.directions.push_back(parse_direction(x.is_string() ? x.get<std::string>() : x.dump(), p, "load"));
        } else {
          p.add("load", "'directions' must be a string or array");
        }
        if (lp.directions.empty()) p.add("load", "'directions' is empty");
      }
      lf.reject_unknown();
    }
    if (ov.duration_s) lp.config.duration_s = *ov.duration_s;
    p.guard("load", [&] { validate(lp.config); });
    if (lp.config.flow_id >= kReceiptFlowId) p.add("load", "flow ids 0xFFFFFFFD and above are reserved");
    s.load = lp;
  }

  s.single_connectivity = f.boolean("single_connectivity", true);
  s.technology = f.string("technology", s.technology);
  s.alpha = f.number("alpha", s.alpha);
  if (!(s.alpha > 0.0 && s.alpha < 1.0)) p.add("scenario", "'alpha' must be in (0, 1)");
  if (f.has("confidence_points_ms")) {
    p.guard("confidence_points_ms", [&] { s.confidence_points_ms = f.raw("confidence_points_ms").get<std::vector<double>>(); });
  }
  const std::string reqs = f.string("requirements", "builtin");
  if (reqs == "builtin") {
    s.requirements = reference_requirements();
  } else {
    s.requirements_source = reqs;
    p.guard("requirements", [&] { s.requirements = load_requirements(resolve(base, reqs)); });
  }
  s.output_dir = f.string("output_dir", "runs/" + (s.name.empty() ? std::string("unnamed") : s.name));
  if (ov.output_dir) s.output_dir = *ov.output_dir;
  s.event_log = ov.event_log.value_or(f.boolean("event_log", false));
  if (s.event_log && s.mode == TransportMode::Tunnel) p.add("scenario", "event logs exist for emulated runs only");

  for (const auto& label : s.link_names()) {
    if (label.empty() || label.find_first_of("/\\,\n") != std::string::npos) {
      p.add("links", "link name '" + label + "' must be non-empty without / \\ or ,");
    }
    if ("SC-" + label == s.technology) p.add("technology", "label collides with link '" + label + "'");
  }
  f.reject_unknown();
  p.raise_if_any();
  return s;
}

Scenario load_scenario(const fs::path& path, const ScenarioOverrides& overrides) {
  return parse_scenario(read_json(path), path.parent_path(), overrides);
}

json to_json(const Scenario& s) {
  json links = json::array();
  for (const auto& l : s.links) {
    links.push_back({{"name", l.name},
                     {"latency", latency_json(l.latency)},
                     {"loss_prob", l.loss_prob},
                     {"capacity_mbps", {{"up", l.capacity_up_mbps}, {"down", l.capacity_down_mbps}}},
                     {"bucket_bytes", l.bucket_bytes},
                     {"queue_bytes", l.queue_bytes},
                     {"outage", outage_json(l.outage)}});
  }
  json paths = json::array();
  for (const auto& c : s.tunnel_paths) {
    paths.push_back({{"name", c.name}, {"remote", c.remote}, {"bind", c.bind}, {"egress_delay_ms", c.egress_delay_ms}});
  }
  json reqs = json::array();
  for (const auto& r : s.requirements) {
    reqs.push_back({{"name", r.name},
                    {"availability", r.availability},
                    {"max_latency_ms", r.max_latency_ms},
                    {"min_dl_mbps", r.min_dl_mbps},
                    {"min_ul_mbps", r.min_ul_mbps},
                    {"counted", r.counted}});
  }
  json out = {{"name", s.name},
              {"mode", to_string(s.mode)},
              {"seed", s.seed ? json(*s.seed) : json(nullptr)},
              {"links", links},
              {"policy", policy_json(s.policy)},
              {"single_connectivity", s.single_connectivity},
              {"technology", s.technology},
              {"requirements", reqs},
              {"alpha", s.alpha},
              {"confidence_points_ms", s.confidence_points_ms},
              {"event_log", s.event_log}};
  if (s.mode == TransportMode::Tunnel) {
    out["tunnel"] = {{"paths", paths}, {"handshake_timeout_ms", s.handshake_timeout.count()}};
  }
  if (s.probe) {
    out["probe"] = {{"interval_ms", s.probe->interval_ms},
                    {"payload_bytes", s.probe->payload_bytes},
                    {"outage_threshold_ms", s.probe->outage_threshold_ms},
                    {"duration_s", s.probe->duration_s},
                    {"flow_id", s.probe->flow_id}};
  }
  if (s.load) {
    const auto& c = s.load->config;
    json dirs = json::array();
    for (Direction d : s.load->directions) dirs.push_back(to_string(d));
    out["load"] = {{"target_mbps", c.target_mbps},
                   {"bin_s", c.bin_s},
                   {"outage_threshold_kbps", c.outage_threshold_kbps},
                   {"duration_s", c.duration_s},
                   {"payload_bytes", c.payload_bytes},
                   {"flow_id", c.flow_id},
                   {"drain_s", c.drain_s},
                   {"directions", dirs}};
  }
  return out;
}

std::uint64_t config_hash(const Scenario& s) { return fnv1a64(to_json(s).dump()); }

fs::path resolve_output_dir(const Scenario& s) {
  if (s.output_dir.is_absolute()) return s.output_dir;
  const char* root = std::getenv("MCDUP_OUTPUT_ROOT");
  return (root && *root ? fs::path(root) : fs::current_path()) / s.output_dir;
}

}  // namespace mcdup
