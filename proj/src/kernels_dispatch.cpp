#include "mcdup/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string_view>

namespace mcdup::kernels {

namespace {

Backend detect() {
  if (const char* env = std::getenv("MCDUP_SIMD"); env && std::string_view(env) == "scalar") {
    return Backend::Scalar;
  }
  return avx2_available() ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& selected() {
  static std::atomic<Backend> backend{detect()};
  return backend;
}

bool use_avx2() { return selected().load(std::memory_order_relaxed) == Backend::Avx2; }

}  // namespace

const char* to_string(Backend backend) { return backend == Backend::Avx2 ? "avx2" : "scalar"; }

bool avx2_available() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Backend active_backend() { return selected().load(); }

void force_backend(Backend backend) {
  if (backend == Backend::Avx2 && !avx2_available()) throw std::runtime_error("AVX2 not available on this CPU");
  selected().store(backend);
}

std::size_t count_le(std::span<const double> v, double x) { return use_avx2() ? avx2::count_le(v, x) : scalar::count_le(v, x); }
std::size_t count_ge(std::span<const double> v, double x) { return use_avx2() ? avx2::count_ge(v, x) : scalar::count_ge(v, x); }
std::size_t count_gt(std::span<const double> v, double x) { return use_avx2() ? avx2::count_gt(v, x) : scalar::count_gt(v, x); }

void elementwise_min(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  if (a.size() != b.size() || out.size() != a.size()) throw std::invalid_argument("elementwise_min: size mismatch");
  use_avx2() ? avx2::elementwise_min(a, b, out) : scalar::elementwise_min(a, b, out);
}

void elementwise_max(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  if (a.size() != b.size() || out.size() != a.size()) throw std::invalid_argument("elementwise_max: size mismatch");
  use_avx2() ? avx2::elementwise_max(a, b, out) : scalar::elementwise_max(a, b, out);
}

double sum(std::span<const double> v) { return use_avx2() ? avx2::sum(v) : scalar::sum(v); }

double sum_squared_deviation(std::span<const double> v, double c) {
  return use_avx2() ? avx2::sum_squared_deviation(v, c) : scalar::sum_squared_deviation(v, c);
}

}  // namespace mcdup::kernels
