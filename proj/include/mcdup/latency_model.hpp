#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mcdup/errors.hpp"
#include "mcdup/rng.hpp"

namespace mcdup {

// All latency values are one-way milliseconds.
struct ConstantLatency {
  double ms = 0.0;
};

struct NormalLatency {
  double mean_ms = 0.0;
  double stddev_ms = 0.0;
  double floor_ms = 0.0;
};

struct LognormalLatency {
  double mu = 0.0;     // of ln(ms)
  double sigma = 0.0;  // of ln(ms)
  double floor_ms = 0.0;
};

struct QuantileKnot {
  double p = 0.0;
  double value_ms = 0.0;
};

// Inverse-CDF table, linearly interpolated between knots.
// Knots are strictly increasing in p from 0 to 1 and non-decreasing in value.
class QuantileTable {
 public:
  QuantileTable() = default;
  explicit QuantileTable(std::vector<QuantileKnot> knots);

  // Two columns: p, value_ms. A header line is allowed. `scale` multiplies
  // every value; fitted round-trip tables load with scale 0.5.
  static QuantileTable from_csv(const std::filesystem::path& path, double scale = 1.0);

  double inverse(double u) const;
  const std::vector<QuantileKnot>& knots() const { return knots_; }
  QuantileTable scaled(double factor) const;

 private:
  std::vector<QuantileKnot> knots_;
};

using LatencyModel = std::variant<ConstantLatency, NormalLatency, LognormalLatency, QuantileTable>;

void validate(const LatencyModel& model);

// One draw. `stream` and `index` identify the draw; the same pair always
// yields the same delay. Stochastic variants clamp at their floor.
double sample_one_way_delay(const LatencyModel& model, const RngStream& stream, std::uint64_t index);

}  // namespace mcdup
