#include "mcdup/latency_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "overloaded.hpp"

namespace mcdup {

QuantileTable::QuantileTable(std::vector<QuantileKnot> knots) : knots_(std::move(knots)) {
  if (knots_.size() < 2) throw ConfigError("quantile table needs at least two knots");
  if (knots_.front().p != 0.0 || knots_.back().p != 1.0) {
    throw ConfigError("quantile table must cover p in [0, 1]");
  }
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    const auto& k = knots_[i];
    if (!std::isfinite(k.value_ms) || k.value_ms < 0.0) throw ConfigError("quantile table values must be finite and >= 0");
    if (i > 0) {
      if (!(k.p > knots_[i - 1].p)) throw ConfigError("quantile table p must be strictly increasing");
      if (k.value_ms < knots_[i - 1].value_ms) throw ConfigError("quantile table values must be non-decreasing");
    }
  }
}

QuantileTable QuantileTable::from_csv(const std::filesystem::path& path, double scale) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open quantile table " + path.string());
  std::vector<QuantileKnot> knots;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    QuantileKnot k;
    if (!(fields >> k.p >> k.value_ms)) {
      if (knots.empty()) continue;  // header
      throw ConfigError("malformed quantile row in " + path.string() + ": " + line);
    }
    k.value_ms *= scale;
    knots.push_back(k);
  }
  return QuantileTable(std::move(knots));
}

double QuantileTable::inverse(double u) const {
  if (u <= 0.0) return knots_.front().value_ms;
  if (u >= 1.0) return knots_.back().value_ms;
  auto hi = std::upper_bound(knots_.begin(), knots_.end(), u,
                             [](double x, const QuantileKnot& k) { return x < k.p; });
  auto lo = hi - 1;
  const double t = (u - lo->p) / (hi->p - lo->p);
  return lo->value_ms + t * (hi->value_ms - lo->value_ms);
}

QuantileTable QuantileTable::scaled(double factor) const {
  std::vector<QuantileKnot> k = knots_;
  for (auto& knot : k) knot.value_ms *= factor;
  return QuantileTable(std::move(k));
}

void validate(const LatencyModel& model) {
  std::visit(Overloaded{
                 [](const ConstantLatency& c) {
                   if (!(c.ms >= 0.0) || !std::isfinite(c.ms)) throw ConfigError("constant latency must be >= 0");
                 },
                 [](const NormalLatency& n) {
                   if (!(n.stddev_ms >= 0.0) || !(n.floor_ms >= 0.0)) throw ConfigError("normal latency needs stddev, floor >= 0");
                 },
                 [](const LognormalLatency& l) {
                   if (!(l.sigma >= 0.0) || !(l.floor_ms >= 0.0)) throw ConfigError("lognormal latency needs sigma, floor >= 0");
                 },
                 [](const QuantileTable& q) {
                   if (q.knots().size() < 2) throw ConfigError("empty quantile table");
                 },
             },
             model);
}

double sample_one_way_delay(const LatencyModel& model, const RngStream& stream, std::uint64_t index) {
  return std::visit(Overloaded{
                        [](const ConstantLatency& c) { return c.ms; },
                        [&](const NormalLatency& n) {
                          const double z = standard_normal(stream.uniform_open_low(2 * index), stream.uniform(2 * index + 1));
                          return std::max(n.floor_ms, n.mean_ms + n.stddev_ms * z);
                        },
                        [&](const LognormalLatency& l) {
                          const double z = standard_normal(stream.uniform_open_low(2 * index), stream.uniform(2 * index + 1));
                          return std::max(l.floor_ms, std::exp(l.mu + l.sigma * z));
                        },
                        [&](const QuantileTable& q) { return q.inverse(stream.uniform(index)); },
                    },
                    model);
}

}  // namespace mcdup
