#pragma once

// Data-parallel inner loops used by the KPI pipeline.
//
// Every kernel has a scalar reference in `scalar::` and an AVX2 variant in
// `avx2::`; the top-level functions dispatch at runtime. The scalar
// reductions accumulate in four interleaved lanes, in the same order as the
// 256-bit registers, so both backends return bit-identical results.
//
// Comparisons are ordered: NaN never counts. min/max follow minpd/maxpd
// semantics (second operand returned when unordered or equal).

#include <cstddef>
#include <span>

namespace mcdup::kernels {

enum class Backend { Scalar, Avx2 };

const char* to_string(Backend backend);

bool avx2_available();

// Backend picked at startup: AVX2 when the CPU has it, unless the
// MCDUP_SIMD environment variable is set to "scalar".
Backend active_backend();

// Test hook. Throws std::runtime_error if the backend is not available.
void force_backend(Backend backend);

std::size_t count_le(std::span<const double> values, double x);
std::size_t count_ge(std::span<const double> values, double x);
std::size_t count_gt(std::span<const double> values, double x);
void elementwise_min(std::span<const double> a, std::span<const double> b, std::span<double> out);
void elementwise_max(std::span<const double> a, std::span<const double> b, std::span<double> out);
double sum(std::span<const double> values);
double sum_squared_deviation(std::span<const double> values, double center);

namespace scalar {
std::size_t count_le(std::span<const double> values, double x);
std::size_t count_ge(std::span<const double> values, double x);
std::size_t count_gt(std::span<const double> values, double x);
void elementwise_min(std::span<const double> a, std::span<const double> b, std::span<double> out);
void elementwise_max(std::span<const double> a, std::span<const double> b, std::span<double> out);
double sum(std::span<const double> values);
double sum_squared_deviation(std::span<const double> values, double center);
}  // namespace scalar

namespace avx2 {
std::size_t count_le(std::span<const double> values, double x);
std::size_t count_ge(std::span<const double> values, double x);
std::size_t count_gt(std::span<const double> values, double x);
void elementwise_min(std::span<const double> a, std::span<const double> b, std::span<double> out);
void elementwise_max(std::span<const double> a, std::span<const double> b, std::span<double> out);
double sum(std::span<const double> values);
double sum_squared_deviation(std::span<const double> values, double center);
}  // namespace avx2

}  // namespace mcdup::kernels
