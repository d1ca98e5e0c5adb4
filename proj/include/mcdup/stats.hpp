#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "mcdup/probes.hpp"

namespace mcdup {

class StatsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// F_n(x) = |{i : x_i <= x}| / n over a sorted copy of the samples.
class EmpiricalDistribution {
 public:
  // Throws StatsError on empty input or NaN. +inf is allowed.
  explicit EmpiricalDistribution(std::vector<double> values);

  double cdf(double x) const;
  double ccdf(double x) const { return 1.0 - cdf(x); }
  std::size_t size() const { return sorted_.size(); }
  const std::vector<double>& sorted() const { return sorted_; }

 private:
  std::vector<double> sorted_;
};

// Non-outage values of the series.
EmpiricalDistribution ecdf(const SampleSeries& series);

// Smallest x with F_n(x) >= p, for p in (0, 1].
double quantile(const EmpiricalDistribution& dist, double p);
double quantile_sorted(std::span<const double> sorted, double p);

struct TailQuantile {
  double p = 0.0;
  std::optional<double> value;    // empty when beyond the outage threshold
  bool beyond_threshold = false;
};

inline constexpr double kLowerTails[] = {0.10, 0.05, 0.01};
inline constexpr double kUpperTails[] = {0.99, 0.999, 0.9999};

struct DistributionSummary {
  MetricKind metric = MetricKind::RttMs;
  std::size_t n = 0;
  std::size_t outages = 0;
  double outage_probability = 0.0;
  std::optional<double> min, median, mean, max, stddev;
  std::vector<TailQuantile> lower_tails;  // 10%, 5%, 1%
  std::vector<TailQuantile> upper_tails;  // 99%, 99.9%, 99.99%
};

// Outage probability is over all samples. For latency, min/median/mean/max/
// std are over non-outage samples and the tails are over all samples with
// outages ranked above every RTT. For throughput, everything is over all
// bins. `outage_threshold` (series units) re-flags samples when given.
DistributionSummary summarize(const SampleSeries& series, std::optional<double> outage_threshold = std::nullopt);

nlohmann::json to_json(const DistributionSummary& summary);

// sqrt(ln(2/alpha) / (2n)); n >= 1, alpha in (0, 2].
double dkw_epsilon(std::uint64_t n, double alpha);

// Standard normal quantile; |error| well below 1e-9 after refinement.
double inverse_normal_cdf(double p);

struct WilsonInterval {
  double lower = 0.0;
  double upper = 1.0;
  double p_hat = 0.0;
  double z = 0.0;
  double alpha = 0.0;
  std::uint64_t k = 0;
  std::uint64_t n = 0;
  double half_width() const { return (upper - lower) / 2.0; }
};

// Two-sided score interval with z = Phi^-1(1 - alpha/2); 0 <= k <= n, n >= 1,
// alpha in (0, 1).
WilsonInterval wilson_interval(std::uint64_t k, std::uint64_t n, double alpha);

// Exact probability that the interval covers p when k ~ Binomial(n, p).
double wilson_exact_coverage(double p, std::uint64_t n, double alpha);

}  // namespace mcdup
