#include "mcdup/rng.hpp"

#include <cmath>
#include <numbers>

namespace mcdup {

double standard_normal(double u_open_low, double u) {
  return std::sqrt(-2.0 * std::log(u_open_low)) * std::cos(2.0 * std::numbers::pi * u);
}

double RngCursor::next_normal() {
  const double a = stream_.uniform_open_low(index_++);
  const double b = stream_.uniform(index_++);
  return standard_normal(a, b);
}

}  // namespace mcdup
