#include "mcdup/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mcdup/kernels.hpp"

namespace mcdup {

EmpiricalDistribution::EmpiricalDistribution(std::vector<double> values) : sorted_(std::move(values)) {
  if (sorted_.empty()) throw StatsError("empirical distribution needs at least one sample");
  for (double v : sorted_) {
    if (std::isnan(v)) throw StatsError("NaN sample");
  }
  std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalDistribution::cdf(double x) const {
  const auto le = std::upper_bound(sorted_.begin(), sorted_.end(), x) - sorted_.begin();
  return static_cast<double>(le) / static_cast<double>(sorted_.size());
}

EmpiricalDistribution ecdf(const SampleSeries& series) { return EmpiricalDistribution(series.values()); }

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw StatsError("quantile of an empty sample");
  if (!(p > 0.0 && p <= 1.0)) throw StatsError("quantile p must be in (0, 1]");
  const std::size_t n = sorted.size();
  const double dn = static_cast<double>(n);
  auto k = static_cast<std::size_t>(std::ceil(p * dn));
  // p * n can round either way; settle on the exact smallest k with k/n >= p.
  while (k > 1 && static_cast<double>(k - 1) / dn >= p) --k;
  while (k < n && static_cast<double>(k) / dn < p) ++k;
  k = std::clamp<std::size_t>(k, 1, n);
  return sorted[k - 1];
}

double quantile(const EmpiricalDistribution& dist, double p) { return quantile_sorted(dist.sorted(), p); }

namespace {

std::vector<TailQuantile> tails(std::span<const double> sorted, std::span<const double> ps) {
  std::vector<TailQuantile> out;
  for (double p : ps) {
    TailQuantile t;
    t.p = p;
    const double v = quantile_sorted(sorted, p);
    if (std::isinf(v)) {
      t.beyond_threshold = true;
    } else {
      t.value = v;
    }
    out.push_back(t);
  }
  return out;
}

}  // namespace

DistributionSummary summarize(const SampleSeries& series, std::optional<double> outage_threshold) {
  if (series.samples.empty()) throw StatsError("cannot summarize an empty series");
  const bool latency = series.metric == MetricKind::RttMs;

  DistributionSummary s;
  s.metric = series.metric;
  s.n = series.samples.size();

  std::vector<double> kept;     // samples the point statistics use
  std::vector<double> ranked;   // samples the tails use
  kept.reserve(s.n);
  ranked.reserve(s.n);
  for (const Sample& x : series.samples) {
    bool outage = x.outage;
    if (outage_threshold) {
      if (latency) {
        outage = !x.value || *x.value > *outage_threshold;
      } else {
        outage = x.value.value_or(0.0) < *outage_threshold;
      }
    }
    s.outages += outage;
    if (latency) {
      if (outage) {
        ranked.push_back(std::numeric_limits<double>::infinity());
      } else {
        kept.push_back(*x.value);
        ranked.push_back(*x.value);
      }
    } else {
      const double v = x.value.value_or(0.0);
      kept.push_back(v);
      ranked.push_back(v);
    }
  }
  s.outage_probability = static_cast<double>(s.outages) / static_cast<double>(s.n);
  if (latency && kept.empty()) return s;

  std::sort(kept.begin(), kept.end());
  std::sort(ranked.begin(), ranked.end());
  s.min = kept.front();
  s.max = kept.back();
  s.median = quantile_sorted(kept, 0.5);
  const double mean = kernels::sum(kept) / static_cast<double>(kept.size());
  s.mean = mean;
  s.stddev = std::sqrt(kernels::sum_squared_deviation(kept, mean) / static_cast<double>(kept.size()));
  s.lower_tails = tails(ranked, kLowerTails);
  s.upper_tails = tails(ranked, kUpperTails);
  return s;
}

nlohmann::json to_json(const DistributionSummary& s) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    if (v) return *v;
    return nullptr;
  };
  auto tail_json = [&](const std::vector<TailQuantile>& ts) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : ts) {
      nlohmann::json j = {{"p", t.p}, {"value", opt(t.value)}};
      if (t.beyond_threshold) j["beyond_threshold"] = true;
      arr.push_back(j);
    }
    return arr;
  };
  return {{"metric", to_string(s.metric)},
          {"n", s.n},
          {"outages", s.outages},
          {"outage_probability", s.outage_probability},
          {"min", opt(s.min)},
          {"median", opt(s.median)},
          {"mean", opt(s.mean)},
          {"max", opt(s.max)},
          {"stddev", opt(s.stddev)},
          {"lower_tails", tail_json(s.lower_tails)},
          {"upper_tails", tail_json(s.upper_tails)}};
}

double dkw_epsilon(std::uint64_t n, double alpha) {
  if (n == 0) throw StatsError("dkw_epsilon needs n >= 1");
  if (!(alpha > 0.0 && alpha <= 2.0)) throw StatsError("dkw_epsilon needs alpha in (0, 2]");
  return std::sqrt(std::log(2.0 / alpha) / (2.0 * static_cast<double>(n)));
}

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw StatsError("inverse_normal_cdf needs p in (0, 1)");
  // Acklam's rational approximation.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double low = 0.02425;
  double x;
  if (p < low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley step against the exact CDF.
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

WilsonInterval wilson_interval(std::uint64_t k, std::uint64_t n, double alpha) {
  if (n == 0) throw StatsError("wilson_interval needs n >= 1");
  if (k > n) throw StatsError("wilson_interval needs k <= n");
  if (!(alpha > 0.0 && alpha < 1.0)) throw StatsError("wilson_interval needs alpha in (0, 1)");
  WilsonInterval w;
  w.k = k;
  w.n = n;
  w.alpha = alpha;
  w.z = inverse_normal_cdf(1.0 - alpha / 2.0);
  const double dn = static_cast<double>(n);
  const double p = static_cast<double>(k) / dn;
  const double z2 = w.z * w.z;
  const double denom = 1.0 + z2 / dn;
  const double center = (p + z2 / (2.0 * dn)) / denom;
  const double half = w.z / denom * std::sqrt(p * (1.0 - p) / dn + z2 / (4.0 * dn * dn));
  w.p_hat = p;
  w.lower = k == 0 ? 0.0 : std::clamp(center - half, 0.0, 1.0);
  w.upper = k == n ? 1.0 : std::clamp(center + half, 0.0, 1.0);
  return w;
}

double wilson_exact_coverage(double p, std::uint64_t n, double alpha) {
  if (!(p >= 0.0 && p <= 1.0)) throw StatsError("coverage needs p in [0, 1]");
  double covered = 0.0;
  const double dn = static_cast<double>(n);
  for (std::uint64_t k = 0; k <= n; ++k) {
    const double dk = static_cast<double>(k);
    const double log_pmf = std::lgamma(dn + 1) - std::lgamma(dk + 1) - std::lgamma(dn - dk + 1) +
                           (k > 0 ? dk * std::log(p) : 0.0) + (k < n ? (dn - dk) * std::log1p(-p) : 0.0);
    const double pmf = std::exp(log_pmf);
    if (pmf == 0.0) continue;
    const WilsonInterval w = wilson_interval(k, n, alpha);
    if (w.lower <= p && p <= w.upper) covered += pmf;
  }
  return covered;
}

}  // namespace mcdup
