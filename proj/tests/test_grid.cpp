#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "orthoflow/grid.hpp"
#include "orthoflow/rng.hpp"

using namespace orthoflow;

namespace {

Mat rotation2(double th) {
  Mat r(2);
  r(0, 0) = std::cos(th);
  r(0, 1) = -std::sin(th);
  r(1, 0) = std::sin(th);
  r(1, 1) = std::cos(th);
  return r;
}

GridSpec spec_1d(int m) {
  GridSpec s;
  s.geom = Geometry::FlatBox1D;
  s.m_normal = m;
  return s;
}

} // namespace

TEST_CASE("grid volumes match analytic measures") {
  for (GridSpec s : {spec_1d(32),
                     GridSpec{Geometry::FlatBox2D, 16, 24},
                     GridSpec{Geometry::PolarDisk, 20, 48}}) {
    auto g = build_grid(s);
    const double vol = g->plus.total_volume + g->minus.total_volume;
    CHECK(vol == doctest::Approx(g->analytic_volume).epsilon(1e-12));
    double wsum = 0.0;
    for (double w : g->plus.vol_w) wsum += w;
    for (double w : g->minus.vol_w) wsum += w;
    CHECK(wsum == doctest::Approx(g->analytic_volume).epsilon(0.01));
    for (double w : g->plus.vol_w) CHECK(w > 0.0);
    for (double w : g->minus.vol_w) CHECK(w > 0.0);
    for (double w : g->iface_w) CHECK(w > 0.0);
  }
}

TEST_CASE("every interface location appears once per phase, paired") {
  auto g = build_grid(GridSpec{Geometry::PolarDisk, 12, 24});
  REQUIRE(g->num_iface == 24);
  for (int p = 0; p < g->num_iface; ++p) {
    const int ip = g->iface_plus[p], im = g->iface_minus[p];
    CHECK(g->plus.coords[2 * ip] == doctest::Approx(g->spec.r_iface));
    CHECK(g->minus.coords[2 * im] == doctest::Approx(g->spec.r_iface));
    CHECK(g->plus.coords[2 * ip + 1] == doctest::Approx(g->minus.coords[2 * im + 1]));
  }
  // Interface weights sum to the circle length.
  double s = 0.0;
  for (double w : g->iface_w) s += w;
  CHECK(s == doctest::Approx(2.0 * M_PI * g->spec.r_iface).epsilon(1e-12));
}

TEST_CASE("dirichlet energy: constant fields have zero energy") {
  auto g = build_grid(GridSpec{Geometry::FlatBox2D, 8, 8});
  auto f = make_initial(g, 3, InitialRecipe{});
  CHECK(dirichlet_energy(f) == 0.0);
}

TEST_CASE("dirichlet energy: 1D rotation profile matches the analytic integral") {
  // A+(x) = rotation(x): ||dA/dx||^2 = 2, integral over (0,1) = 2.
  auto energy_at = [&](int m) {
    auto g = build_grid(spec_1d(m));
    auto f = make_paired_field(g, 2);
    for (int j = 0; j < g->plus.num_nodes; ++j)
      f.plus.set(j, rotation2(g->plus.coords[j]));
    for (int j = 0; j < g->minus.num_nodes; ++j) f.minus.set(j, Mat::identity(2));
    return dirichlet_energy_phase(f.plus, g->plus);
  };
  const double e64 = energy_at(64);
  const double e128 = energy_at(128);
  CHECK(e64 == doctest::Approx(2.0).epsilon(2e-4));
  // Halving the spacing cuts the error by ~4 (second-order quadrature).
  const double err64 = std::abs(e64 - 2.0);
  const double err128 = std::abs(e128 - 2.0);
  CHECK(err64 / err128 == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("l2 distance: manifold identities and brute-force oracle") {
  auto g = build_grid(spec_1d(24));
  InitialRecipe r;
  r.kind = InitialRecipe::Kind::SmoothRandom;
  r.seed = 5;
  auto f = make_initial(g, 2, r);
  CHECK(l2_distance_sq(f, f) == 0.0);

  // G = -F: ||2A||^2 = 4n per node, so distance = 4n * total volume.
  PairedField neg = f;
  for (double& x : neg.plus.a) x = -x;
  for (double& x : neg.minus.a) x = -x;
  const double expect = 4.0 * 2.0 * (g->plus.total_volume + g->minus.total_volume);
  CHECK(l2_distance_sq(f, neg) == doctest::Approx(expect).epsilon(1e-12));

  // Brute-force node-by-node oracle on a random pair.
  InitialRecipe r2 = r;
  r2.seed = 77;
  auto h = make_initial(g, 2, r2);
  double acc = 0.0;
  for (int i = 0; i < g->plus.num_nodes; ++i)
    acc += g->plus.vol_w[i] * std::pow(frob_dist(f.plus.get(i), h.plus.get(i)), 2);
  for (int i = 0; i < g->minus.num_nodes; ++i)
    acc += g->minus.vol_w[i] * std::pow(frob_dist(f.minus.get(i), h.minus.get(i)), 2);
  CHECK(l2_distance_sq(f, h) == doctest::Approx(acc).epsilon(1e-12));
}

TEST_CASE("l2 distance is a metric-squared (quadrilateral inequality)") {
  auto g = build_grid(spec_1d(16));
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    InitialRecipe r;
    r.kind = InitialRecipe::Kind::SmoothRandom;
    r.seed = rng.next_u64();
    auto a = make_initial(g, 2, r);
    r.seed = rng.next_u64();
    auto b = make_initial(g, 2, r);
    r.seed = rng.next_u64();
    auto c = make_initial(g, 2, r);
    const double dab = std::sqrt(l2_distance_sq(a, b));
    const double dbc = std::sqrt(l2_distance_sq(b, c));
    const double dac = std::sqrt(l2_distance_sq(a, c));
    CHECK(dac <= dab + dbc + 1e-12);
    CHECK(l2_distance_sq(a, b) == doctest::Approx(l2_distance_sq(b, a)).epsilon(1e-14));
  }
}

TEST_CASE("grid mismatch raises a structured error") {
  auto g1 = build_grid(spec_1d(16));
  auto g2 = build_grid(spec_1d(24));
  auto f1 = make_initial(g1, 2, InitialRecipe{});
  auto f2 = make_initial(g2, 2, InitialRecipe{});
  CHECK_THROWS_AS(l2_distance_sq(f1, f2), Error);
}

TEST_CASE("make_initial: constant pair") {
  auto g = build_grid(GridSpec{Geometry::PolarDisk, 10, 16});
  auto f = make_initial(g, 3, InitialRecipe{});
  CHECK(dirichlet_energy(f) == 0.0);
  CHECK(max_orth_residual(f) < 1e-14);
  CHECK(max_pair_residual(f) < 1e-13);
  CHECK(f.plus.get(0)(0, 0) == 1.0);
  CHECK(f.minus.get(0)(0, 0) == -1.0);  // I - 2 e1(x)e1
}

TEST_CASE("make_initial: smooth-random is deterministic and feasible") {
  for (GridSpec s : {spec_1d(32),
                     GridSpec{Geometry::FlatBox2D, 8, 12},
                     GridSpec{Geometry::PolarDisk, 8, 16}}) {
    auto g = build_grid(s);
    InitialRecipe r;
    r.kind = InitialRecipe::Kind::SmoothRandom;
    r.seed = 7;
    r.amplitude = 0.5;
    auto f1 = make_initial(g, 3, r);
    auto f2 = make_initial(g, 3, r);
    CHECK(f1.plus.a == f2.plus.a);
    CHECK(f1.minus.a == f2.minus.a);
    CHECK(f1.axes == f2.axes);

    CHECK(max_orth_residual(f1) < 1e-12);
    CHECK(max_pair_residual(f1) < 1e-12);
    CHECK(dirichlet_energy(f1) > 0.0);

    // Stored axis matches the residual-extracted axis up to sign.
    for (int p = 0; p < g->num_iface; ++p) {
      auto res = minimal_pair_residual(f1.plus.get(g->iface_plus[p]),
                                       f1.minus.get(g->iface_minus[p]));
      CHECK(std::abs(std::abs(vdot(res.axis, f1.axis_vec(p))) - 1.0) < 1e-8);
    }
  }
}

TEST_CASE("snapshot round-trip is bit-exact") {
  auto g = build_grid(GridSpec{Geometry::FlatBox2D, 6, 10});
  InitialRecipe r;
  r.kind = InitialRecipe::Kind::SmoothRandom;
  r.seed = 12345;
  auto f = make_initial(g, 2, r);
  const std::string prefix = "/tmp/orthoflow_test_snap";
  write_paired_snapshot(prefix, f);
  auto f2 = read_paired_snapshot(prefix, g);
  CHECK(f.plus.a == f2.plus.a);
  CHECK(f.minus.a == f2.minus.a);
  CHECK(f.axes == f2.axes);

  // user-file recipe goes through the same reader.
  InitialRecipe uf;
  uf.kind = InitialRecipe::Kind::UserFile;
  uf.path_prefix = prefix;
  auto f3 = make_initial(g, 2, uf);
  CHECK(f3.plus.a == f.plus.a);

  std::remove((prefix + "_plus.txt").c_str());
  std::remove((prefix + "_minus.txt").c_str());
  std::remove((prefix + "_axes.txt").c_str());
}

TEST_CASE("malformed user file raises a structured error with diagnostics") {
  auto g = build_grid(spec_1d(8));
  auto f = make_initial(g, 2, InitialRecipe{});
  const std::string prefix = "/tmp/orthoflow_test_badsnap";
  write_paired_snapshot(prefix, f);
  // Corrupt one value in the plus file.
  {
    FILE* fp = std::fopen((prefix + "_plus.txt").c_str(), "r+");
    REQUIRE(fp);
    std::fseek(fp, -4, SEEK_END);
    std::fputs("oops", fp);
    std::fclose(fp);
  }
  try {
    read_paired_snapshot(prefix, g);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ParseError);
    CHECK(std::string(e.what()).find("node") != std::string::npos);
  }
  std::remove((prefix + "_plus.txt").c_str());
  std::remove((prefix + "_minus.txt").c_str());
  std::remove((prefix + "_axes.txt").c_str());
}
