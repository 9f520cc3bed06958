#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "orthoflow/rng.hpp"
#include "orthoflow/vsplit.hpp"

using namespace orthoflow;

namespace {

// Independent frame oracle: Gram-Schmidt completion of the axis against the
// standard basis (different construction than the Householder frame).
Mat gram_schmidt_frame(const Vec& axis) {
  const int n = static_cast<int>(axis.size());
  std::vector<Vec> cols{axis};
  for (int k = 0; k < n && static_cast<int>(cols.size()) < n; ++k) {
    Vec v(n, 0.0);
    v[k] = 1.0;
    for (const Vec& c : cols) {
      const double d = vdot(v, c);
      for (int i = 0; i < n; ++i) v[i] -= d * c[i];
    }
    if (vnorm(v) > 1e-8) cols.push_back(normalized(v));
  }
  Mat f(n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) f(i, j) = cols[j][i];
  return f;
}

} // namespace

TEST_CASE("pure component inputs") {
  Vec e1{1.0, 0.0, 0.0};
  Mat m = Mat::outer(e1, e1);
  VSplit s = v_decompose(m, e1);
  CHECK(frob_dist(s.v1, m) < 1e-14);
  CHECK(frob(s.v2) < 1e-14);
  CHECK(frob(s.v3) < 1e-14);
  CHECK(frob(s.v4) < 1e-14);
  CHECK(frob(s.v5) < 1e-14);

  // e2 (x) e3 - e3 (x) e2 lies in V4 for axis e1.
  Mat w(3);
  w(1, 2) = 1.0;
  w(2, 1) = -1.0;
  VSplit sw = v_decompose(w, e1);
  CHECK(frob_dist(sw.v4, w) < 1e-14);
  CHECK(frob(sw.v3) < 1e-14);
}

TEST_CASE("reconstruction, orthogonality, symmetry split (random, n=4)") {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    Vec axis = random_unit(4, rng);
    Mat m = random_mat(4, rng);
    VSplit s = v_decompose(m, axis);
    const double scale = frob(m);

    CHECK(frob_dist(s.reconstruct(), m) < 1e-12 * scale);

    const Mat* parts[5] = {&s.v1, &s.v2, &s.v3, &s.v4, &s.v5};
    for (int i = 0; i < 5; ++i)
      for (int j = i + 1; j < 5; ++j)
        CHECK(std::abs(mat_dot(*parts[i], *parts[j])) < 1e-12 * scale * scale);

    Mat anti = s.v3 + s.v4;
    Mat symm = s.v1 + s.v2 + s.v5;
    CHECK(frob(anti - anti.antisym()) < 1e-12 * scale);
    CHECK(frob(symm - symm.sym()) < 1e-12 * scale);

    // Agreement with an independent Gram-Schmidt frame construction: the
    // projections are frame-independent.
    Mat f = gram_schmidt_frame(axis);
    Mat tmp(4), mhat(4);
    mtm(4, tmp.data(), f.data(), m.data());
    mm(4, mhat.data(), tmp.data(), f.data());
    Mat h4 = Mat::zero(4);
    for (int i = 1; i < 4; ++i)
      for (int j = 1; j < 4; ++j) h4(i, j) = 0.5 * (mhat(i, j) - mhat(j, i));
    Mat v4_oracle(4), t2(4);
    mm(4, t2.data(), f.data(), h4.data());
    mmt(4, v4_oracle.data(), t2.data(), f.data());
    CHECK(frob_dist(v4_oracle, s.v4) < 1e-12 * scale);
  }
}

TEST_CASE("projector traces give the V1-5 dimension formula") {
  Rng rng(22);
  for (int n : {2, 3, 4, 5}) {
    Vec axis = random_unit(n, rng);
    auto dims = v_dims(n);
    CHECK(dims[0] + dims[1] + dims[2] + dims[3] + dims[4] == n * n);

    // trace(P_k) = sum_{ij} (P_k E_ij)_{ij}.
    double tr[5] = {0, 0, 0, 0, 0};
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        Mat e(n);
        e(i, j) = 1.0;
        VSplit s = v_decompose(e, axis);
        tr[0] += s.v1(i, j);
        tr[1] += s.v2(i, j);
        tr[2] += s.v3(i, j);
        tr[3] += s.v4(i, j);
        tr[4] += s.v5(i, j);
      }
    }
    for (int k = 0; k < 5; ++k)
      CHECK(tr[k] == doctest::Approx(static_cast<double>(dims[k])).epsilon(1e-10));
  }
  CHECK(v_dims(2) == std::array<int, 5>{1, 1, 1, 0, 1});
  CHECK(v_dims(5) == std::array<int, 5>{1, 4, 4, 6, 10});
}

TEST_CASE("project_v4_complement") {
  Rng rng(23);
  Vec axis = random_unit(4, rng);
  auto basis = v4_basis(axis);
  CHECK(static_cast<int>(basis.size()) == v_dims(4)[3]);

  // W in V4 -> zero; W in V3 -> unchanged.
  Mat w4 = basis[0] * 1.7 + basis[2] * -0.4;
  CHECK(frob(project_v4_complement(w4, axis)) < 1e-13);

  Mat f = frame_from_axis(axis);
  Vec l(4);
  for (int i = 0; i < 4; ++i) l[i] = f(i, 1);
  Mat w3 = Mat::outer(axis, l) - Mat::outer(l, axis);
  CHECK(frob_dist(project_v4_complement(w3, axis), w3) < 1e-13);

  for (int trial = 0; trial < 50; ++trial) {
    Mat w = random_antisym(4, rng);
    Mat out = project_v4_complement(w, axis);
    for (const Mat& g : basis) CHECK(std::abs(mat_dot(out, g)) < 1e-12 * frob(w));
    CHECK(frob_dist(project_v4_complement(out, axis), out) < 1e-13 * std::max(1.0, frob(w)));
    CHECK(frob(out - out.antisym()) < 1e-13);
  }
}

TEST_CASE("(n(x)n)X and X(n(x)n) are orthogonal to V4 for symmetric X") {
  Rng rng(24);
  for (int n : {3, 4, 5}) {
    for (int trial = 0; trial < 30; ++trial) {
      Vec axis = random_unit(n, rng);
      Mat x = random_sym(n, rng);
      Mat nn = Mat::outer(axis, axis);
      const double scale = std::max(1.0, frob(x));
      CHECK(frob(v4_component(nn * x, axis)) < 1e-12 * scale);
      CHECK(frob(v4_component(x * nn, axis)) < 1e-12 * scale);
    }
  }
}

TEST_CASE("n=2 degenerates: V4 empty") {
  Rng rng(25);
  Vec axis = random_unit(2, rng);
  CHECK(v4_basis(axis).empty());
  Mat w = random_antisym(2, rng);
  CHECK(frob_dist(project_v4_complement(w, axis), w) < 1e-14);
}

TEST_CASE("non-unit axis rejected") {
  Vec bad{1.0, 1.0, 0.0};
  Mat m = Mat::identity(3);
  CHECK_THROWS_AS(v_decompose(m, bad), Error);
}
