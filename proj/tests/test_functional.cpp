#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "orthoflow/functional.hpp"
#include "orthoflow/rng.hpp"

using namespace orthoflow;

namespace {

GridPtr grid_1d(int m = 24) {
  GridSpec s;
  s.geom = Geometry::FlatBox1D;
  s.m_normal = m;
  return build_grid(s);
}

PairedField random_field(const GridPtr& g, int n, std::uint64_t seed, double amp = 0.5) {
  InitialRecipe r;
  r.kind = InitialRecipe::Kind::SmoothRandom;
  r.seed = seed;
  r.amplitude = amp;
  return make_initial(g, n, r);
}

VelocityField random_velocity(const GridPtr& g, std::uint64_t seed, double vmax) {
  VelocityField v = VelocityField::zero(*g);
  Rng rng(seed);
  for (double& x : v.plus) x = vmax * (2.0 * rng.uniform() - 1.0);
  for (double& x : v.minus) x = vmax * (2.0 * rng.uniform() - 1.0);
  return v;
}

// Perturbs a field along a sparse variation: A <- A exp(eps W).
PairedField perturb(const PairedField& a, const TestField& w, double eps) {
  PairedField out = a;
  const int n = a.n;
  std::vector<double> prod(static_cast<std::size_t>(n) * n);
  for (const auto& [node, m] : w.plus) {
    Mat e = exp_antisym(m * eps, 1e-8).mat;
    mm(n, prod.data(), a.plus.at(node), e.data());
    std::copy(prod.begin(), prod.end(), out.plus.at(node));
  }
  for (const auto& [node, m] : w.minus) {
    Mat e = exp_antisym(m * eps, 1e-8).mat;
    mm(n, prod.data(), a.minus.at(node), e.data());
    std::copy(prod.begin(), prod.end(), out.minus.at(node));
  }
  return out;
}

} // namespace

TEST_CASE("energy breakdown at A = Atilde") {
  auto g = grid_1d();
  auto f = random_field(g, 2, 11);
  VelocityField v = random_velocity(g, 3, 1.0);
  EnergyBreakdown e = energy(f, f, &v, 0.01);
  CHECK(e.dirichlet == doctest::Approx(dirichlet_energy(f)).epsilon(1e-15));
  CHECK(e.proximity == 0.0);
  CHECK(e.transport == 0.0);
  CHECK(e.total == e.dirichlet);

  auto c = make_initial(g, 2, InitialRecipe{});
  EnergyBreakdown e0 = energy(c, c, nullptr, 0.01);
  CHECK(e0.total == 0.0);
}

TEST_CASE("energy with V absent equals V = 0 exactly") {
  auto g = grid_1d();
  auto f = random_field(g, 3, 4);
  auto f2 = random_field(g, 3, 5);
  VelocityField vz = VelocityField::zero(*g);
  EnergyBreakdown ea = energy(f, f2, nullptr, 0.02);
  EnergyBreakdown eb = energy(f, f2, &vz, 0.02);
  CHECK(ea.total == eb.total);
  CHECK(ea.transport == eb.transport);
}

TEST_CASE("energy lower bound via Cauchy (100 random instances)") {
  auto g = grid_1d(16);
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    auto a = random_field(g, 2, rng.next_u64());
    auto at = random_field(g, 2, rng.next_u64());
    const double vmax = rng.uniform(0.1, 3.0);
    VelocityField v = random_velocity(g, rng.next_u64(), vmax);
    const double h = rng.uniform(0.005, 0.1);
    EnergyBreakdown e = energy(a, at, &v, h);
    const double bound = -2.0 * h * vmax * vmax * dirichlet_energy(at);
    CHECK(e.total >= bound - 1e-10);
  }
}

TEST_CASE("breakdown sums to total") {
  auto g = grid_1d();
  auto a = random_field(g, 2, 21);
  auto at = random_field(g, 2, 22);
  VelocityField v = random_velocity(g, 23, 0.7);
  EnergyBreakdown e = energy(a, at, &v, 0.01);
  CHECK(e.total == doctest::Approx(e.dirichlet + e.proximity + e.transport).epsilon(1e-12));
  CHECK(e.dirichlet >= 0.0);
  CHECK(e.proximity >= 0.0);
}

TEST_CASE("riemannian gradient vanishes at a constant-pair stationary point") {
  auto g = grid_1d();
  auto c = make_initial(g, 3, InitialRecipe{});
  GradientField gr = riemannian_gradient(c, c, nullptr, 0.01);
  CHECK(std::sqrt(gradient_norm_sq(gr)) < 1e-12);
}

TEST_CASE("gradient locality: single perturbed node touches only its stencil") {
  auto g = grid_1d(24);
  auto c = make_initial(g, 2, InitialRecipe{});
  PairedField a = c;
  const int node = 10;
  Mat w(2);
  w(0, 1) = 0.3;
  w(1, 0) = -0.3;
  a.plus.set(node, exp_antisym(w).mat);
  GradientField gr = riemannian_gradient(a, c, nullptr, 0.01);
  for (int i = 0; i < a.plus.num_nodes; ++i) {
    const double nrm = frob(gr.plus.get(i));
    if (std::abs(i - node) <= 1)
      continue;
    CHECK(nrm < 1e-14);
  }
  for (int i = 0; i < a.minus.num_nodes; ++i) CHECK(frob(gr.minus.get(i)) < 1e-14);
}

TEST_CASE("gradient values are antisymmetric everywhere") {
  auto g = build_grid(GridSpec{Geometry::FlatBox2D, 6, 8});
  auto a = random_field(g, 3, 31);
  auto at = random_field(g, 3, 32);
  VelocityField v = random_velocity(g, 33, 0.5);
  GradientField gr = riemannian_gradient(a, at, &v, 0.02);
  for (int i = 0; i < a.plus.num_nodes; ++i) {
    Mat m = gr.plus.get(i);
    CHECK(frob(m - m.antisym()) < 1e-12);
  }
  for (int i = 0; i < a.minus.num_nodes; ++i) {
    Mat m = gr.minus.get(i);
    CHECK(frob(m - m.antisym()) < 1e-12);
  }
}

TEST_CASE("first variation matches central finite differences (1e-6 relative)") {
  auto g = grid_1d(12);
  auto a = random_field(g, 3, 41);
  auto at = random_field(g, 3, 42);
  VelocityField v = random_velocity(g, 43, 0.5);
  const double h = 0.05;
  auto testset = make_el_testset(a, 4, 1);
  GradientField gr = riemannian_gradient(a, at, &v, h);

  const double eps = 1e-5;
  for (std::size_t k = 0; k < testset.size(); k += 3) {
    const TestField& w = testset[k];
    const double ep = energy(perturb(a, w, eps), at, &v, h).total;
    const double em = energy(perturb(a, w, -eps), at, &v, h).total;
    const double fd = (ep - em) / (2.0 * eps);

    double pair = 0.0;
    for (const auto& [node, m] : w.plus) pair += mat_dot(gr.plus.get(node), m);
    for (const auto& [node, m] : w.minus) pair += mat_dot(gr.minus.get(node), m);

    // 2 * el_form is the same directional derivative through the assembly.
    const double form = 2.0 * el_form(a, at, &v, h, w);
    if (std::abs(fd) > 1e-8) {
      CHECK(pair == doctest::Approx(fd).epsilon(1e-6));
      CHECK(form == doctest::Approx(fd).epsilon(1e-6));
    } else {
      CHECK(std::abs(pair - fd) < 1e-10);
    }
  }
}

TEST_CASE("el_form equals an independently assembled three-term form") {
  auto g = grid_1d(10);
  auto a = random_field(g, 2, 51);
  auto at = random_field(g, 2, 52);
  VelocityField v = random_velocity(g, 53, 0.8);
  const double h = 0.03;
  auto testset = make_el_testset(a, 3, 1);

  for (const TestField& w : testset) {
    // Dense copies of the variation for the edge loop.
    MatrixField wp(a.n, a.plus.num_nodes), wm(a.n, a.minus.num_nodes);
    for (const auto& [node, m] : w.plus) wp.set(node, m);
    for (const auto& [node, m] : w.minus) wm.set(node, m);

    double direct = 0.0;
    for (Phase ph : {Phase::Plus, Phase::Minus}) {
      const MatrixField& af = a.phase(ph);
      const MatrixField& tf = at.phase(ph);
      const MatrixField& wf = ph == Phase::Plus ? wp : wm;
      const PhaseGrid& pg = ph == Phase::Plus ? g->plus : g->minus;
      const double* vv = ph == Phase::Plus ? v.plus.data() : v.minus.data();
      // Edge term: sum_e c_e (A_b - A_a) : (A_b W_b - A_a W_a).
      for (const EdgeRun& run : pg.runs) {
        for (int k = 0; k < run.count; ++k) {
          Mat awa = af.get(run.a0 + k) * wf.get(run.a0 + k);
          Mat awb = af.get(run.b0 + k) * wf.get(run.b0 + k);
          direct += run.w[k] * mat_dot(af.get(run.b0 + k) - af.get(run.a0 + k), awb - awa);
        }
      }
      // Proximity and transport terms.
      MatrixField vg;
      transport_field(tf, pg, vv, vg);
      for (int i = 0; i < af.num_nodes; ++i) {
        Mat aw = af.get(i) * wf.get(i);
        direct += pg.vol_w[i] * mat_dot(af.get(i) - tf.get(i), aw) / h;
        direct += pg.vol_w[i] * mat_dot(vg.get(i), aw);
      }
    }
    CHECK(el_form(a, at, &v, h, w) == doctest::Approx(direct).epsilon(1e-10));
  }
}

TEST_CASE("discrete cancellation: grad A : (grad A W) assembles to zero") {
  auto g = grid_1d(16);
  auto a = random_field(g, 3, 61);
  Rng rng(62);
  // For each edge, (A_b - A_a) : ((A_b - A_a) W) pairs a symmetric Gram
  // factor with an antisymmetric W, so every term vanishes identically.
  double acc = 0.0;
  double scale = 0.0;
  for (const EdgeRun& run : g->plus.runs) {
    for (int k = 0; k < run.count; ++k) {
      Mat d = a.plus.get(run.b0 + k) - a.plus.get(run.a0 + k);
      Mat w = random_antisym(3, rng);
      acc += run.w[k] * mat_dot(d, d * w);
      scale += run.w[k] * frob(d) * frob(d * w);
    }
  }
  CHECK(std::abs(acc) < 1e-14 * std::max(1.0, scale));
}

TEST_CASE("inadmissible test fields are rejected") {
  auto g = grid_1d(8);
  auto a = random_field(g, 3, 71);
  auto at = random_field(g, 3, 72);

  // Empty field: normalization undefined.
  CHECK_THROWS_AS(euler_lagrange_residual(a, at, nullptr, 0.01, {TestField{}}), Error);

  // V4 bump on one side only: violates the constraint.
  auto basis = v4_basis(a.axis_vec(0), 1e-8);
  REQUIRE(!basis.empty());
  TestField bad;
  bad.plus.push_back({g->iface_plus[0], basis[0]});
  try {
    euler_lagrange_residual(a, at, nullptr, 0.01, {bad});
    FAIL("expected inadmissible-test-field error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InadmissibleTestField);
  }
}
