#include "mcdup/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

#include <bit>

#define MCDUP_AVX2 __attribute__((target("avx2")))

namespace mcdup::kernels::avx2 {

namespace {

template <int Predicate>
MCDUP_AVX2 std::size_t count_cmp(std::span<const double> values, double x) {
  const __m256d vx = _mm256_set1_pd(x);
  const double* p = values.data();
  const std::size_t n = values.size();
  std::size_t count = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(p + i);
    const int mask = _mm256_movemask_pd(_mm256_cmp_pd(v, vx, Predicate));
    count += static_cast<std::size_t>(std::popcount(static_cast<unsigned>(mask)));
  }
  for (; i < n; ++i) {
    if constexpr (Predicate == _CMP_LE_OQ) count += (p[i] <= x) ? 1 : 0;
    else if constexpr (Predicate == _CMP_GE_OQ) count += (p[i] >= x) ? 1 : 0;
    else count += (p[i] > x) ? 1 : 0;
  }
  return count;
}

MCDUP_AVX2 double horizontal(__m256d acc, double tail) {
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  return ((lane[0] + lane[1]) + (lane[2] + lane[3])) + tail;
}

}  // namespace

std::size_t count_le(std::span<const double> values, double x) { return count_cmp<_CMP_LE_OQ>(values, x); }
std::size_t count_ge(std::span<const double> values, double x) { return count_cmp<_CMP_GE_OQ>(values, x); }
std::size_t count_gt(std::span<const double> values, double x) { return count_cmp<_CMP_GT_OQ>(values, x); }

MCDUP_AVX2 void elementwise_min(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  const std::size_t n = a.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out.data() + i, _mm256_min_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i)));
  }
  for (; i < n; ++i) out[i] = a[i] < b[i] ? a[i] : b[i];
}

MCDUP_AVX2 void elementwise_max(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  const std::size_t n = a.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out.data() + i, _mm256_max_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i)));
  }
  for (; i < n; ++i) out[i] = a[i] > b[i] ? a[i] : b[i];
}

MCDUP_AVX2 double sum(std::span<const double> values) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t n = values.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(values.data() + i));
  double tail = 0.0;
  for (; i < n; ++i) tail += values[i];
  return horizontal(acc, tail);
}

MCDUP_AVX2 double sum_squared_deviation(std::span<const double> values, double center) {
  const __m256d c = _mm256_set1_pd(center);
  __m256d acc = _mm256_setzero_pd();
  const std::size_t n = values.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(values.data() + i), c);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double tail = 0.0;
  for (; i < n; ++i) {
    const double d = values[i] - center;
    tail += d * d;
  }
  return horizontal(acc, tail);
}

}  // namespace mcdup::kernels::avx2

#else

// Non-x86 builds: the avx2 namespace forwards to scalar and is never selected.
namespace mcdup::kernels::avx2 {
std::size_t count_le(std::span<const double> v, double x) { return scalar::count_le(v, x); }
std::size_t count_ge(std::span<const double> v, double x) { return scalar::count_ge(v, x); }
std::size_t count_gt(std::span<const double> v, double x) { return scalar::count_gt(v, x); }
void elementwise_min(std::span<const double> a, std::span<const double> b, std::span<double> o) { scalar::elementwise_min(a, b, o); }
void elementwise_max(std::span<const double> a, std::span<const double> b, std::span<double> o) { scalar::elementwise_max(a, b, o); }
double sum(std::span<const double> v) { return scalar::sum(v); }
double sum_squared_deviation(std::span<const double> v, double c) { return scalar::sum_squared_deviation(v, c); }
}  // namespace mcdup::kernels::avx2

#endif
