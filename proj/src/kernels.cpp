#include "orthoflow/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

#if defined(__x86_64__) || defined(_M_X64)
#define ORTHOFLOW_X86 1
#include <immintrin.h>
#else
#define ORTHOFLOW_X86 0
#endif

#if defined(__aarch64__)
#define ORTHOFLOW_ARM64 1
#include <arm_neon.h>
#else
#define ORTHOFLOW_ARM64 0
#endif

namespace orthoflow::kernels {

// ---------------------------------------------------------------- scalar

namespace scalar {

double dot(const double* a, const double* b, std::size_t len) {
  double s = 0.0;
  for (std::size_t i = 0; i < len; ++i) s += a[i] * b[i];
  return s;
}

double sumsq(const double* a, std::size_t len) {
  double s = 0.0;
  for (std::size_t i = 0; i < len; ++i) s += a[i] * a[i];
  return s;
}

double sumsq_diff(const double* a, const double* b, std::size_t len) {
  double s = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double weighted_sumsq_blocks(const double* a, const double* w,
                             std::size_t nblocks, std::size_t block) {
  double s = 0.0;
  for (std::size_t i = 0; i < nblocks; ++i) {
    double t = 0.0;
    const double* p = a + i * block;
    for (std::size_t k = 0; k < block; ++k) t += p[k] * p[k];
    s += w[i] * t;
  }
  return s;
}

double weighted_sumsq_diff_blocks(const double* a, const double* b, const double* w,
                                  std::size_t nblocks, std::size_t block) {
  double s = 0.0;
  for (std::size_t i = 0; i < nblocks; ++i) {
    double t = 0.0;
    const double* p = a + i * block;
    const double* q = b + i * block;
    for (std::size_t k = 0; k < block; ++k) {
      const double d = p[k] - q[k];
      t += d * d;
    }
    s += w[i] * t;
  }
  return s;
}

double weighted_dot_blocks(const double* a, const double* b, const double* w,
                           std::size_t nblocks, std::size_t block) {
  double s = 0.0;
  for (std::size_t i = 0; i < nblocks; ++i) {
    double t = 0.0;
    const double* p = a + i * block;
    const double* q = b + i * block;
    for (std::size_t k = 0; k < block; ++k) t += p[k] * q[k];
    s += w[i] * t;
  }
  return s;
}

void axpy(double* y, double alpha, const double* x, std::size_t len) {
  for (std::size_t i = 0; i < len; ++i) y[i] += alpha * x[i];
}

} // namespace scalar

// ------------------------------------------------------------------ AVX2

#if ORTHOFLOW_X86

namespace avx2 {

__attribute__((target("avx2,fma"))) static inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

__attribute__((target("avx2,fma"))) double dot(const double* a, const double* b,
                                               std::size_t len) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= len; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  double s = hsum(acc);
  for (; i < len; ++i) s += a[i] * b[i];
  return s;
}

__attribute__((target("avx2,fma"))) double sumsq(const double* a, std::size_t len) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= len; i += 4) {
    __m256d v = _mm256_loadu_pd(a + i);
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  double s = hsum(acc);
  for (; i < len; ++i) s += a[i] * a[i];
  return s;
}

__attribute__((target("avx2,fma"))) double sumsq_diff(const double* a, const double* b,
                                                      std::size_t len) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= len; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum(acc);
  for (; i < len; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

__attribute__((target("avx2,fma"))) static double block_sumsq(const double* p,
                                                              std::size_t block) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= block; k += 4) {
    __m256d v = _mm256_loadu_pd(p + k);
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  double t = hsum(acc);
  for (; k < block; ++k) t += p[k] * p[k];
  return t;
}

__attribute__((target("avx2,fma"))) double weighted_sumsq_blocks(const double* a,
                                                                 const double* w,
                                                                 std::size_t nblocks,
                                                                 std::size_t block) {
  double s = 0.0;
  for (std::size_t i = 0; i < nblocks; ++i) s += w[i] * block_sumsq(a + i * block, block);
  return s;
}

__attribute__((target("avx2,fma"))) double weighted_sumsq_diff_blocks(
    const double* a, const double* b, const double* w, std::size_t nblocks,
    std::size_t block) {
  double s = 0.0;
  for (std::size_t i = 0; i < nblocks; ++i) {
    const double* p = a + i * block;
    const double* q = b + i * block;
    __m256d acc = _mm256_setzero_pd();
    std::size_t k = 0;
    for (; k + 4 <= block; k += 4) {
      __m256d d = _mm256_sub_pd(_mm256_loadu_pd(p + k), _mm256_loadu_pd(q + k));
      acc = _mm256_fmadd_pd(d, d, acc);
    }
    double t = hsum(acc);
    for (; k < block; ++k) {
      const double d = p[k] - q[k];
      t += d * d;
    }
    s += w[i] * t;
  }
  return s;
}

__attribute__((target("avx2,fma"))) double weighted_dot_blocks(const double* a,
                                                               const double* b,
                                                               const double* w,
                                                               std::size_t nblocks,
                                                               std::size_t block) {
  double s = 0.0;
  for (std::size_t i = 0; i < nblocks; ++i) {
    const double* p = a + i * block;
    const double* q = b + i * block;
    __m256d acc = _mm256_setzero_pd();
    std::size_t k = 0;
    for (; k + 4 <= block; k += 4)
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(p + k), _mm256_loadu_pd(q + k), acc);
    double t = hsum(acc);
    for (; k < block; ++k) t += p[k] * q[k];
    s += w[i] * t;
  }
  return s;
}

// Elementwise update: plain mul+add (no FMA) so every backend produces
// bit-identical output.
__attribute__((target("avx2"))) void axpy(double* y, double alpha, const double* x,
                                          std::size_t len) {
  __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= len; i += 4) {
    __m256d v = _mm256_add_pd(_mm256_loadu_pd(y + i),
                              _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, v);
  }
  for (; i < len; ++i) y[i] += alpha * x[i];
}

} // namespace avx2

#endif // ORTHOFLOW_X86

// ------------------------------------------------------------------ NEON

#if ORTHOFLOW_ARM64

namespace neon {

double dot(const double* a, const double* b, std::size_t len) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= len; i += 2) acc = vfmaq_f64(acc, vld1q_f64(a + i), vld1q_f64(b + i));
  double s = vaddvq_f64(acc);
  for (; i < len; ++i) s += a[i] * b[i];
  return s;
}

double sumsq(const double* a, std::size_t len) { return dot(a, a, len); }

double sumsq_diff(const double* a, const double* b, std::size_t len) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= len; i += 2) {
    float64x2_t d = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    acc = vfmaq_f64(acc, d, d);
  }
  double s = vaddvq_f64(acc);
  for (; i < len; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double weighted_sumsq_blocks(const double* a, const double* w, std::size_t nblocks,
                             std::size_t block) {
  double s = 0.0;
  for (std::size_t i = 0; i < nblocks; ++i) s += w[i] * sumsq(a + i * block, block);
  return s;
}

double weighted_sumsq_diff_blocks(const double* a, const double* b, const double* w,
                                  std::size_t nblocks, std::size_t block) {
  double s = 0.0;
  for (std::size_t i = 0; i < nblocks; ++i)
    s += w[i] * sumsq_diff(a + i * block, b + i * block, block);
  return s;
}

double weighted_dot_blocks(const double* a, const double* b, const double* w,
                           std::size_t nblocks, std::size_t block) {
  double s = 0.0;
  for (std::size_t i = 0; i < nblocks; ++i)
    s += w[i] * dot(a + i * block, b + i * block, block);
  return s;
}

void axpy(double* y, double alpha, const double* x, std::size_t len) {
  float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= len; i += 2)
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
  for (; i < len; ++i) y[i] += alpha * x[i];
}

} // namespace neon

#endif // ORTHOFLOW_ARM64

// -------------------------------------------------------------- dispatch

namespace {

struct Vtable {
  double (*dot)(const double*, const double*, std::size_t);
  double (*sumsq)(const double*, std::size_t);
  double (*sumsq_diff)(const double*, const double*, std::size_t);
  double (*weighted_sumsq_blocks)(const double*, const double*, std::size_t, std::size_t);
  double (*weighted_sumsq_diff_blocks)(const double*, const double*, const double*,
                                       std::size_t, std::size_t);
  double (*weighted_dot_blocks)(const double*, const double*, const double*, std::size_t,
                                std::size_t);
  void (*axpy)(double*, double, const double*, std::size_t);
};

constexpr Vtable kScalar = {scalar::dot,
                            scalar::sumsq,
                            scalar::sumsq_diff,
                            scalar::weighted_sumsq_blocks,
                            scalar::weighted_sumsq_diff_blocks,
                            scalar::weighted_dot_blocks,
                            scalar::axpy};

#if ORTHOFLOW_X86
constexpr Vtable kAvx2 = {avx2::dot,
                          avx2::sumsq,
                          avx2::sumsq_diff,
                          avx2::weighted_sumsq_blocks,
                          avx2::weighted_sumsq_diff_blocks,
                          avx2::weighted_dot_blocks,
                          avx2::axpy};
#endif
#if ORTHOFLOW_ARM64
constexpr Vtable kNeon = {neon::dot,
                          neon::sumsq,
                          neon::sumsq_diff,
                          neon::weighted_sumsq_blocks,
                          neon::weighted_sumsq_diff_blocks,
                          neon::weighted_dot_blocks,
                          neon::axpy};
#endif

std::atomic<const Vtable*> g_table{nullptr};
std::atomic<Backend> g_backend{Backend::Auto};

Backend best_supported() {
#if ORTHOFLOW_X86
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
    return Backend::Avx2;
#endif
#if ORTHOFLOW_ARM64
  return Backend::Neon;
#endif
  return Backend::Scalar;
}

Backend env_backend() {
  const char* e = std::getenv("ORTHOFLOW_KERNELS");
  if (!e) return Backend::Auto;
  std::string v(e);
  if (v == "scalar") return Backend::Scalar;
  if (v == "avx2") return Backend::Avx2;
  if (v == "neon") return Backend::Neon;
  return Backend::Auto;
}

const Vtable* table_for(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return &kScalar;
    case Backend::Avx2:
#if ORTHOFLOW_X86
      return &kAvx2;
#else
      return nullptr;
#endif
    case Backend::Neon:
#if ORTHOFLOW_ARM64
      return &kNeon;
#else
      return nullptr;
#endif
    case Backend::Auto:
      return table_for(best_supported());
  }
  return nullptr;
}

const Vtable* table() {
  const Vtable* t = g_table.load(std::memory_order_acquire);
  if (t) return t;
  Backend b = env_backend();
  if (b == Backend::Auto) b = best_supported();
  if (!cpu_supports(b)) b = Backend::Scalar;
  g_backend.store(b, std::memory_order_release);
  g_table.store(table_for(b), std::memory_order_release);
  return g_table.load(std::memory_order_acquire);
}

} // namespace

bool cpu_supports(Backend b) {
  switch (b) {
    case Backend::Scalar:
    case Backend::Auto:
      return true;
    case Backend::Avx2:
#if ORTHOFLOW_X86
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::Neon:
      return ORTHOFLOW_ARM64 != 0;
  }
  return false;
}

void set_backend(Backend b) {
  if (b == Backend::Auto) b = best_supported();
  if (!cpu_supports(b)) throw std::runtime_error("kernels: backend not supported on this CPU");
  g_backend.store(b, std::memory_order_release);
  g_table.store(table_for(b), std::memory_order_release);
}

Backend active_backend() {
  table();
  return g_backend.load(std::memory_order_acquire);
}

std::string_view backend_name() {
  switch (active_backend()) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
    case Backend::Neon: return "neon";
    case Backend::Auto: break;
  }
  return "auto";
}

double dot(const double* a, const double* b, std::size_t len) {
  return table()->dot(a, b, len);
}
double sumsq(const double* a, std::size_t len) { return table()->sumsq(a, len); }
double sumsq_diff(const double* a, const double* b, std::size_t len) {
  return table()->sumsq_diff(a, b, len);
}
double weighted_sumsq_blocks(const double* a, const double* w, std::size_t nblocks,
                             std::size_t block) {
  return table()->weighted_sumsq_blocks(a, w, nblocks, block);
}
double weighted_sumsq_diff_blocks(const double* a, const double* b, const double* w,
                                  std::size_t nblocks, std::size_t block) {
  return table()->weighted_sumsq_diff_blocks(a, b, w, nblocks, block);
}
double weighted_dot_blocks(const double* a, const double* b, const double* w,
                           std::size_t nblocks, std::size_t block) {
  return table()->weighted_dot_blocks(a, b, w, nblocks, block);
}
void axpy(double* y, double alpha, const double* x, std::size_t len) {
  table()->axpy(y, alpha, x, len);
}

} // namespace orthoflow::kernels
