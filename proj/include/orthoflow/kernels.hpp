#pragma once

#include <cstddef>
#include <string_view>

// Flat-array reduction kernels used by the field energy/distance/update
// loops. A scalar reference implementation always exists; wider variants
// (AVX2 on x86-64, NEON on arm64) are selected at runtime and must agree
// with the scalar kernels up to summation-order rounding. The active
// backend is process-global and fixed after the first call unless
// explicitly overridden (env ORTHOFLOW_KERNELS=scalar|avx2|neon|auto).

namespace orthoflow::kernels {

enum class Backend { Auto, Scalar, Avx2, Neon };

void set_backend(Backend b);
Backend active_backend();
std::string_view backend_name();
bool cpu_supports(Backend b);

double dot(const double* a, const double* b, std::size_t len);
double sumsq(const double* a, std::size_t len);
double sumsq_diff(const double* a, const double* b, std::size_t len);

// Block reductions: arrays hold nblocks consecutive blocks of `block`
// doubles (node-major matrix fields); w has one weight per block.
double weighted_sumsq_blocks(const double* a, const double* w,
                             std::size_t nblocks, std::size_t block);
double weighted_sumsq_diff_blocks(const double* a, const double* b, const double* w,
                                  std::size_t nblocks, std::size_t block);
double weighted_dot_blocks(const double* a, const double* b, const double* w,
                           std::size_t nblocks, std::size_t block);

void axpy(double* y, double alpha, const double* x, std::size_t len);

} // namespace orthoflow::kernels
