#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "orthoflow/rng.hpp"
#include "orthoflow/verify.hpp"

using namespace orthoflow;

TEST_CASE("forward construction: all four conditions hold and W is recovered") {
  Rng rng(3);
  for (int n : {3, 4, 5}) {
    for (int trial = 0; trial < 20; ++trial) {
      OrthMat ap = random_special_orthogonal(n, rng);
      Vec axis = random_unit(n, rng);
      OrthMat am{ap.mat * reflection(axis), -1};
      Mat w = Mat::zero(n);
      auto basis = v4_basis(axis, 1e-8);
      for (const Mat& g : basis) w += g * rng.normal();

      auto rep = check_equivalences(ap, am, ap.mat * w, am.mat * w);
      CHECK(rep.m1);
      CHECK(rep.m2);
      CHECK(rep.m3);
      CHECK(rep.m4);
      CHECK(rep.consistent);
      REQUIRE(rep.w.has_value());
      CHECK(frob_dist(*rep.w, w) < 1e-11 * (1.0 + frob(w)));
    }
  }
}

TEST_CASE("V3-contaminated W breaks M2/M3/M4 consistently") {
  Rng rng(5);
  const int n = 4;
  OrthMat ap = random_special_orthogonal(n, rng);
  Vec axis = random_unit(n, rng);
  OrthMat am{ap.mat * reflection(axis), -1};
  const Mat f = frame_from_axis(axis, 1e-8);
  Vec l(n);
  for (int i = 0; i < n; ++i) l[i] = f(i, 1);
  Mat w = Mat::outer(axis, l) - Mat::outer(l, axis);

  auto rep = check_equivalences(ap, am, ap.mat * w, am.mat * w);
  CHECK_FALSE(rep.m2);
  CHECK_FALSE(rep.m3);
  CHECK_FALSE(rep.m4);
  CHECK(rep.consistent);
  CHECK(rep.r2 > kTolFail * rep.scale);
  CHECK(rep.r3 > kTolFail * rep.scale);
}

TEST_CASE("n = 2 degenerate case: only W = 0 is admissible") {
  Rng rng(7);
  OrthMat ap = random_special_orthogonal(2, rng);
  Vec axis = random_unit(2, rng);
  OrthMat am{ap.mat * reflection(axis), -1};
  // V4 = {0}: the only common V4 trace is zero, for which all hold.
  Mat zero = Mat::zero(2);
  auto rep = check_equivalences(ap, am, zero, zero);
  CHECK(rep.m1);
  CHECK(rep.m2);
  CHECK(rep.m3);
  CHECK(rep.m4);
  // Any antisymmetric W != 0 is pure V3 in n = 2 and must fail membership.
  Mat w = random_antisym(2, rng);
  auto rep2 = check_equivalences(ap, am, ap.mat * w, am.mat * w);
  CHECK_FALSE(rep2.m3);
  CHECK(rep2.consistent);
}

TEST_CASE("non-minimal pairs are rejected") {
  Rng rng(9);
  OrthMat ap = random_special_orthogonal(3, rng);
  OrthMat am{ap.mat * reflection(random_unit(3, rng)) *
                 exp_antisym(random_antisym(3, rng, 0.3)).mat,
             -1};
  CHECK_THROWS_AS(check_equivalences(ap, am, Mat::zero(3), Mat::zero(3)), Error);
}

TEST_CASE("v-perp report: dimensions and identities for n = 2..5") {
  for (int n : {2, 3, 4, 5}) {
    auto rep = check_v_perp(n, 50, 11);
    CHECK(rep.pass);
    CHECK(rep.dims == v_dims(n));
  }
  CHECK(check_v_perp(2, 10, 1).dims == std::array<int, 5>{1, 1, 1, 0, 1});
  CHECK(check_v_perp(5, 10, 1).dims == std::array<int, 5>{1, 4, 4, 6, 10});
}

TEST_CASE("tangent/normal report") {
  for (int n : {2, 3, 4}) {
    auto rep = check_tangent_normal(n, 50, 13);
    CHECK(rep.pass);
    CHECK(rep.max_curve_drift <= 1e-9);
  }
}

TEST_CASE("battery: zero inconsistencies, deterministic per seed") {
  auto r1 = check_equivalence_battery(4, 400, 17);
  CHECK(r1.pass);
  CHECK(r1.inconsistencies == 0);
  auto r2 = check_equivalence_battery(4, 400, 17);
  CHECK(r1.to_json() == r2.to_json());
  auto r3 = check_equivalence_battery(4, 400, 18);
  CHECK(r1.to_json() != r3.to_json());
}

TEST_CASE("json serialization is well-formed") {
  auto rep = check_v_perp(3, 5, 1);
  const std::string js = rep.to_json();
  CHECK(js.find("\"pass\"") != std::string::npos);
  CHECK(js.find("max_reconstruction") != std::string::npos);
}
