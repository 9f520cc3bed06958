#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "orthoflow/kernels.hpp"
#include "orthoflow/rng.hpp"

using namespace orthoflow;
namespace k = orthoflow::kernels;

namespace {

std::vector<double> random_array(std::size_t len, Rng& rng, double scale = 1.0) {
  std::vector<double> v(len);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

// Compensated (Kahan) reference sum, independent of both kernel paths.
double kahan_weighted_sumsq_diff(const std::vector<double>& a, const std::vector<double>& b,
                                 const std::vector<double>& w, std::size_t block) {
  double s = 0.0, c = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (std::size_t j = 0; j < block; ++j) {
      const double d = a[i * block + j] - b[i * block + j];
      const double y = w[i] * d * d - c;
      const double t = s + y;
      c = (t - s) - y;
      s = t;
    }
  }
  return s;
}

} // namespace

TEST_CASE("scalar kernels match compensated reference") {
  Rng rng(42);
  for (std::size_t block : {4u, 9u, 16u, 25u}) {
    const std::size_t nblocks = 257;
    auto a = random_array(nblocks * block, rng);
    auto b = random_array(nblocks * block, rng);
    auto w = random_array(nblocks, rng, 0.3);
    for (double& x : w) x = std::abs(x) + 0.01;

    k::set_backend(k::Backend::Scalar);
    const double got = k::weighted_sumsq_diff_blocks(a.data(), b.data(), w.data(), nblocks, block);
    const double ref = kahan_weighted_sumsq_diff(a, b, w, block);
    CHECK(got == doctest::Approx(ref).epsilon(1e-13));
  }
  k::set_backend(k::Backend::Auto);
}

TEST_CASE("simd backend agrees with scalar reference") {
  if (!k::cpu_supports(k::Backend::Avx2) && !k::cpu_supports(k::Backend::Neon)) {
    MESSAGE("no wide backend on this CPU; dispatch falls back to scalar");
    return;
  }
  const k::Backend wide =
      k::cpu_supports(k::Backend::Avx2) ? k::Backend::Avx2 : k::Backend::Neon;

  Rng rng(7);
  for (std::size_t len : {1u, 3u, 4u, 7u, 64u, 1001u}) {
    auto a = random_array(len, rng);
    auto b = random_array(len, rng);

    k::set_backend(k::Backend::Scalar);
    const double d0 = k::dot(a.data(), b.data(), len);
    const double s0 = k::sumsq(a.data(), len);
    const double q0 = k::sumsq_diff(a.data(), b.data(), len);

    k::set_backend(wide);
    CHECK(k::dot(a.data(), b.data(), len) == doctest::Approx(d0).epsilon(1e-13));
    CHECK(k::sumsq(a.data(), len) == doctest::Approx(s0).epsilon(1e-13));
    CHECK(k::sumsq_diff(a.data(), b.data(), len) == doctest::Approx(q0).epsilon(1e-13));
  }

  for (std::size_t block : {4u, 9u, 25u}) {
    const std::size_t nblocks = 511;
    auto a = random_array(nblocks * block, rng);
    auto b = random_array(nblocks * block, rng);
    auto w = random_array(nblocks, rng);
    for (double& x : w) x = std::abs(x) + 0.01;

    k::set_backend(k::Backend::Scalar);
    const double wq0 = k::weighted_sumsq_diff_blocks(a.data(), b.data(), w.data(), nblocks, block);
    const double ws0 = k::weighted_sumsq_blocks(a.data(), w.data(), nblocks, block);
    const double wd0 = k::weighted_dot_blocks(a.data(), b.data(), w.data(), nblocks, block);

    k::set_backend(wide);
    CHECK(k::weighted_sumsq_diff_blocks(a.data(), b.data(), w.data(), nblocks, block) ==
          doctest::Approx(wq0).epsilon(1e-13));
    CHECK(k::weighted_sumsq_blocks(a.data(), w.data(), nblocks, block) ==
          doctest::Approx(ws0).epsilon(1e-13));
    CHECK(k::weighted_dot_blocks(a.data(), b.data(), w.data(), nblocks, block) ==
          doctest::Approx(wd0).epsilon(1e-13));
  }

  // axpy: elementwise, must be bit-identical between backends.
  for (std::size_t len : {5u, 8u, 129u}) {
    auto x = random_array(len, rng);
    auto y0 = random_array(len, rng);
    auto y1 = y0;
    k::set_backend(k::Backend::Scalar);
    k::axpy(y0.data(), 1.375, x.data(), len);
    k::set_backend(wide);
    k::axpy(y1.data(), 1.375, x.data(), len);
    for (std::size_t i = 0; i < len; ++i) CHECK(y0[i] == y1[i]);
  }

  k::set_backend(k::Backend::Auto);
}

TEST_CASE("same backend is bit-deterministic across calls") {
  Rng rng(11);
  auto a = random_array(1234, rng);
  auto b = random_array(1234, rng);
  const double v1 = k::dot(a.data(), b.data(), a.size());
  const double v2 = k::dot(a.data(), b.data(), a.size());
  CHECK(v1 == v2);
}

TEST_CASE("degenerate lengths") {
  k::set_backend(k::Backend::Auto);
  const double x = 3.0;
  CHECK(k::dot(&x, &x, 0) == 0.0);
  CHECK(k::sumsq(&x, 1) == 9.0);
}
