#include "mcdup/kernels.hpp"

#include <cassert>

namespace mcdup::kernels::scalar {

std::size_t count_le(std::span<const double> values, double x) {
  std::size_t n = 0;
  for (double v : values) n += (v <= x) ? 1 : 0;
  return n;
}

std::size_t count_ge(std::span<const double> values, double x) {
  std::size_t n = 0;
  for (double v : values) n += (v >= x) ? 1 : 0;
  return n;
}

std::size_t count_gt(std::span<const double> values, double x) {
  std::size_t n = 0;
  for (double v : values) n += (v > x) ? 1 : 0;
  return n;
}

void elementwise_min(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  assert(a.size() == b.size() && out.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] < b[i] ? a[i] : b[i];
}

void elementwise_max(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  assert(a.size() == b.size() && out.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] > b[i] ? a[i] : b[i];
}

double sum(std::span<const double> values) {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= values.size(); i += 4) {
    for (int j = 0; j < 4; ++j) lane[j] += values[i + j];
  }
  double tail = 0.0;
  for (; i < values.size(); ++i) tail += values[i];
  return ((lane[0] + lane[1]) + (lane[2] + lane[3])) + tail;
}

double sum_squared_deviation(std::span<const double> values, double center) {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= values.size(); i += 4) {
    for (int j = 0; j < 4; ++j) {
      const double d = values[i + j] - center;
      lane[j] += d * d;
    }
  }
  double tail = 0.0;
  for (; i < values.size(); ++i) {
    const double d = values[i] - center;
    tail += d * d;
  }
  return ((lane[0] + lane[1]) + (lane[2] + lane[3])) + tail;
}

}  // namespace mcdup::kernels::scalar
