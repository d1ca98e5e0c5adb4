#include "mcdup/feasibility.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "mcdup/errors.hpp"
#include "mcdup/kernels.hpp"

namespace mcdup {

void validate(const UseCaseRequirement& r) {
  if (r.name.empty()) throw ConfigError("use case needs a name");
  if (!(r.availability > 0.0 && r.availability < 1.0)) throw ConfigError(r.name + ": availability must be in (0, 1)");
  if (!(r.max_latency_ms > 0.0) || !(r.min_dl_mbps > 0.0) || !(r.min_ul_mbps > 0.0)) {
    throw ConfigError(r.name + ": latency and rate requirements must be positive");
  }
}

const std::vector<UseCaseRequirement>& reference_requirements() {
  static const std::vector<UseCaseRequirement> reqs = {
      {"M2DC", 0.99, 100, 50, 50, false}, {"M2SD", 0.99, 100, 10, 10, false}, {"M2M", 0.99, 100, 5, 5, false},
      {"UC1", 0.99, 400, 5, 5, true},     {"UC2", 0.99, 400, 1, 5, true},     {"UC3", 0.999, 100, 1, 20, true},
      {"UC4", 0.999, 100, 1, 20, true},   {"UC5", 0.999, 400, 14, 1, true},   {"UC6", 0.99, 1000, 1, 5, true},
      {"UC7", 0.99, 1000, 5, 10, true},   {"UC8", 0.90, 400, 5, 5, true},     {"UC9", 0.90, 400, 1, 5, true},
  };
  return reqs;
}

const char* to_string(Kpi kpi) {
  switch (kpi) {
    case Kpi::Latency: return "latency";
    case Kpi::Downlink: return "dl";
    case Kpi::Uplink: return "ul";
  }
  return "?";
}

void AvailabilityTable::set(const std::string& use_case, const std::string& tech, AvailabilityTriple triple) {
  if (std::find(technologies.begin(), technologies.end(), tech) == technologies.end()) technologies.push_back(tech);
  cells[{use_case, tech}] = triple;
}

const AvailabilityTable& reference_availability() {
  static const AvailabilityTable table = [] {
    const std::vector<std::string> techs = {"SC-A", "SC-B", "SC-Sat", "MC-Cellular", "MC-Cell-Sat"};
    struct Row {
      const char* use_case;
      double v[15];
    };
    static constexpr Row rows[] = {
        {"M2DC", {88.1, 80.5, 50.4, 84.4, 67.3, 46.8, 77.3, 92.4, 5.1, 97.6, 93.9, 67.8, 98.2, 98.5, 58.3}},
        {"M2SD", {88.1, 87.3, 90.0, 84.4, 92.4, 79.3, 77.3, 94.6, 86.4, 97.6, 98.9, 96.3, 98.2, 99.3, 98.7}},
        {"M2M", {88.1, 88.4, 92.4, 84.4, 96.1, 86.1, 77.3, 95.1, 88.4, 97.6, 99.2, 97.9, 98.2, 99.4, 98.9}},
        {"UC1", {90.6, 88.4, 92.4, 91.5, 96.1, 86.1, 99.8, 95.1, 88.4, 98.6, 99.2, 97.9, 99.9, 99.4, 98.9}},
        {"UC2", {90.6, 90.8, 92.4, 91.5, 98.0, 86.1, 99.8, 95.5, 88.4, 98.6, 99.2, 97.9, 99.9, 99.5, 98.9}},
        {"UC3", {88.1, 90.8, 82.6, 84.4, 98.0, 69.2, 77.3, 95.5, 60.7, 97.6, 99.2, 91.6, 98.2, 99.5, 95.6}},
        {"UC4", {88.1, 90.8, 82.6, 84.4, 98.0, 69.2, 77.3, 95.5, 60.7, 97.6, 99.2, 91.6, 98.2, 99.5, 95.6}},
        {"UC5", {90.6, 86.4, 93.1, 91.5, 89.3, 95.4, 99.8, 94.5, 90.2, 98.6, 98.5, 99.1, 99.9, 99.3, 98.9}},
        {"UC6", {94.6, 90.8, 92.4, 98.5, 98.0, 86.1, 99.9, 95.5, 88.4, 99.6, 99.2, 97.9, 99.9, 99.5, 98.9}},
        {"UC7", {94.6, 88.4, 90.0, 98.5, 96.1, 79.3, 99.9, 95.1, 86.4, 99.6, 99.2, 96.3, 99.9, 99.4, 98.7}},
        {"UC8", {90.6, 88.4, 92.4, 91.5, 96.1, 86.1, 99.8, 95.1, 88.4, 98.6, 99.2, 97.9, 99.9, 99.4, 98.9}},
        {"UC9", {90.6, 90.8, 92.4, 91.5, 98.0, 86.1, 99.8, 95.5, 88.4, 98.6, 99.2, 97.9, 99.9, 99.5, 98.9}},
    };
    AvailabilityTable t;
    for (const Row& r : rows) {
      for (std::size_t k = 0; k < techs.size(); ++k) {
        t.set(r.use_case, techs[k], {r.v[3 * k], r.v[3 * k + 1], r.v[3 * k + 2]});
      }
    }
    return t;
  }();
  return table;
}

double latency_availability(const SampleSeries& latency, double max_latency_ms) {
  if (latency.samples.empty()) throw std::invalid_argument("latency series is empty");
  std::vector<double> rtt;
  rtt.reserve(latency.samples.size());
  for (const auto& s : latency.samples) rtt.push_back(s.outage || !s.value ? INFINITY : *s.value);
  return 100.0 * static_cast<double>(kernels::count_le(rtt, max_latency_ms)) / static_cast<double>(rtt.size());
}

double throughput_availability(const SampleSeries& throughput, double min_mbps) {
  if (throughput.samples.empty()) throw std::invalid_argument("throughput series is empty");
  std::vector<double> rate;
  rate.reserve(throughput.samples.size());
  for (const auto& s : throughput.samples) rate.push_back(s.value.value_or(0.0));
  return 100.0 * static_cast<double>(kernels::count_ge(rate, min_mbps)) / static_cast<double>(rate.size());
}

AvailabilityTriple availability_against(const SampleSeries& latency, const SampleSeries& downlink,
                                        const SampleSeries& uplink, const UseCaseRequirement& req) {
  return {latency_availability(latency, req.max_latency_ms), throughput_availability(downlink, req.min_dl_mbps),
          throughput_availability(uplink, req.min_ul_mbps)};
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::NearMiss: return "near-miss";
    case Verdict::Fail: return "fail";
  }
  return "?";
}

Verdict classify(double measured_pct, double required_fraction) {
  constexpr double tol = 1e-9;
  const double required_pct = required_fraction * 100.0;
  if (measured_pct >= required_pct - tol) return Verdict::Pass;
  if (required_pct - measured_pct <= kNearMissPp + tol) return Verdict::NearMiss;
  return Verdict::Fail;
}

const FeasibilityCell& FeasibilityMatrix::at(const std::string& use_case, const std::string& tech) const {
  auto u = std::find_if(use_cases.begin(), use_cases.end(), [&](const auto& r) { return r.name == use_case; });
  auto t = std::find(technologies.begin(), technologies.end(), tech);
  if (u == use_cases.end() || t == technologies.end()) throw FeasibilityError("no cell " + use_case + "/" + tech);
  return cells[static_cast<std::size_t>(u - use_cases.begin())][static_cast<std::size_t>(t - technologies.begin())];
}

FeasibilityMatrix feasibility_matrix(const AvailabilityTable& table, const std::vector<UseCaseRequirement>& reqs) {
  if (reqs.empty() || table.technologies.empty()) throw FeasibilityError("feasibility matrix needs use cases and technologies");
  std::string gaps;
  for (const auto& r : reqs) {
    validate(r);
    for (const auto& t : table.technologies) {
      if (!table.cells.count({r.name, t})) gaps += (gaps.empty() ? "" : ", ") + r.name + "/" + t;
    }
  }
  if (!gaps.empty()) throw FeasibilityError("missing availability cells: " + gaps);

  FeasibilityMatrix m;
  m.technologies = table.technologies;
  m.use_cases = reqs;
  m.ready.assign(m.technologies.size(), {0, 0, 0});
  for (const auto& r : reqs) {
    m.counted_use_cases += r.counted;
    std::vector<FeasibilityCell> row;
    for (std::size_t t = 0; t < m.technologies.size(); ++t) {
      FeasibilityCell c;
      c.measured = table.cells.at({r.name, m.technologies[t]});
      for (std::size_t k = 0; k < 3; ++k) {
        c.verdict[k] = classify(c.measured[k], r.availability);
        if (r.counted && c.verdict[k] == Verdict::Pass) ++m.ready[t][k];
      }
      row.push_back(c);
    }
    m.cells.push_back(std::move(row));
  }
  return m;
}

void write_matrix_csv(const FeasibilityMatrix& m, std::ostream& out) {
  out << "use_case,technology,kpi,required_pct,measured_pct,verdict\n";
  for (std::size_t u = 0; u < m.use_cases.size(); ++u) {
    for (std::size_t t = 0; t < m.technologies.size(); ++t) {
      for (std::size_t k = 0; k < 3; ++k) {
        out << m.use_cases[u].name << ',' << m.technologies[t] << ',' << to_string(kKpis[k]) << ','
            << format_number(m.use_cases[u].availability * 100.0) << ',' << format_number(m.cells[u][t].measured[k])
            << ',' << to_string(m.cells[u][t].verdict[k]) << '\n';
      }
    }
  }
  for (std::size_t t = 0; t < m.technologies.size(); ++t) {
    for (std::size_t k = 0; k < 3; ++k) {
      out << "ready," << m.technologies[t] << ',' << to_string(kKpis[k]) << ",," << m.ready[t][k] << '/'
          << m.counted_use_cases << ",\n";
    }
  }
}

nlohmann::json to_json(const FeasibilityMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t u = 0; u < m.use_cases.size(); ++u) {
    const auto& r = m.use_cases[u];
    nlohmann::json row = {{"use_case", r.name},
                          {"required",
                           {{"availability_pct", r.availability * 100.0},
                            {"max_latency_ms", r.max_latency_ms},
                            {"min_dl_mbps", r.min_dl_mbps},
                            {"min_ul_mbps", r.min_ul_mbps}}},
                          {"counted", r.counted}};
    nlohmann::json cells = nlohmann::json::object();
    for (std::size_t t = 0; t < m.technologies.size(); ++t) {
      nlohmann::json c = nlohmann::json::object();
      for (std::size_t k = 0; k < 3; ++k) {
        c[to_string(kKpis[k])] = {{"measured_pct", m.cells[u][t].measured[k]},
                                  {"verdict", to_string(m.cells[u][t].verdict[k])}};
      }
      cells[m.technologies[t]] = c;
    }
    row["cells"] = cells;
    rows.push_back(row);
  }
  nlohmann::json ready = nlohmann::json::object();
  for (std::size_t t = 0; t < m.technologies.size(); ++t) {
    ready[m.technologies[t]] = {{"latency", m.ready[t][0]}, {"dl", m.ready[t][1]}, {"ul", m.ready[t][2]}};
  }
  return {{"technologies", m.technologies},
          {"use_cases", rows},
          {"technology_ready", ready},
          {"counted_use_cases", m.counted_use_cases}};
}

}  // namespace mcdup
