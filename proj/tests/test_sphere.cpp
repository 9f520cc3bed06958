#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <fstream>
#include <doctest.h>

#include <cmath>

#include "orthoflow/sphere.hpp"

using namespace orthoflow;

TEST_CASE("constant data is a fixed point") {
  auto g = build_torus(32);
  auto u0 = make_sphere_constant(g, 3);
  StepConfig cfg;
  auto u1 = sphere_minimize_step(u0, 0.01, cfg);
  CHECK(sphere_l2_sq(u1, u0) == 0.0);

  auto fr = run_sphere_flow(u0, 0.1, 8, 0.9, cfg);
  for (const auto& r : fr.steps) {
    CHECK(r.dirichlet == 0.0);
    CHECK(r.kinetic_increment == 0.0);
    CHECK(r.el_residual < 1e-14);
  }
}

TEST_CASE("discrete Euler-Lagrange defect vanishes at convergence") {
  auto g = build_torus(48);
  auto ut = make_sphere_random(g, 3, 5, 0.8);
  StepConfig cfg;
  cfg.tol_grad = 1e-9;
  cfg.max_iters = 3000;
  auto u = sphere_minimize_step(ut, 0.02, cfg);
  CHECK(sphere_el_residual(u, ut, 0.02) <= 1e-6);
  CHECK(max_unit_deviation(u) <= 1e-12);
  // Energy does not exceed the warm start.
  CHECK(sphere_energy(u, ut, 0.02) <= sphere_dirichlet(ut));
}

TEST_CASE("4-node circle target matches the angle-lattice oracle") {
  auto g = build_torus(4);
  auto ut = make_sphere_random(g, 2, 11, 0.9);
  const double h = 0.05;
  StepConfig cfg;
  cfg.tol_grad = 1e-10;
  cfg.max_iters = 5000;
  auto u = sphere_minimize_step(ut, h, cfg);
  const double e_descent = sphere_energy(u, ut, h);

  // Cyclic exhaustive sweeps over per-node angles at 2 pi / 400 resolution.
  auto build = [&](const std::vector<double>& q) {
    SphereField f = make_sphere_constant(g, 2);
    for (int i = 0; i < 4; ++i) {
      f.at(i)[0] = std::cos(q[i]);
      f.at(i)[1] = std::sin(q[i]);
    }
    return f;
  };
  std::vector<double> q(4);
  for (int i = 0; i < 4; ++i) q[i] = std::atan2(ut.at(i)[1], ut.at(i)[0]);
  double best = sphere_energy(build(q), ut, h);
  const int npts = 400;
  for (int sweep = 0; sweep < 50; ++sweep) {
    double gain = 0.0;
    for (int var = 0; var < 4; ++var) {
      std::vector<double> qq = q;
      double bv = q[var], be = best;
      for (int i = 0; i < npts; ++i) {
        qq[var] = 2.0 * M_PI * i / npts;
        const double e = sphere_energy(build(qq), ut, h);
        if (e < be) {
          be = e;
          bv = qq[var];
        }
      }
      gain += best - be;
      q[var] = bv;
      best = be;
    }
    if (gain < 1e-13) break;
  }
  CHECK(e_descent <= best + 1e-10);
  // Two-sided agreement within the lattice quantization scale.
  CHECK(std::abs(e_descent - best) < 5e-3 * std::max(1.0, best));
}

TEST_CASE("flow: half-factor energy inequality and interpolant gap") {
  auto g = build_torus(64);
  auto u0 = make_sphere_random(g, 3, 7, 0.8);
  StepConfig cfg;
  cfg.tol_grad = 1e-8;
  auto fr = run_sphere_flow(u0, 0.1, 16, 0.9, cfg);

  const double d0 = fr.initial_dirichlet;
  REQUIRE(d0 > 0.0);
  // Per-step minimizing property: D_k + h||Delta/h||^2 <= D_{k-1}.
  double dprev = d0;
  for (const auto& r : fr.steps) {
    CHECK(r.dirichlet + r.kinetic_increment <= dprev + 1e-10);
    CHECK(r.unit_dev_max <= 1e-12);
    CHECK(r.el_residual <= 1e-5);
    dprev = r.dirichlet;
  }
  // Telescoped family: sum_{k<=j} kinetic + D_j <= D_0 for every j, hence
  // the half-factor sup form kinetic_sum + sup D / 2 <= D_0.
  CHECK(fr.half_telescope_slack <= 1e-10);
  CHECK(fr.kinetic_sum + 0.5 * fr.sup_dirichlet <= d0 + 1e-10);
  // Interpolant gap <= C h^2 T D_0; the telescoped kinetic bound forces
  // C <= 1/(3T).
  CHECK(fr.gap_constant > 0.0);
  CHECK(fr.gap_constant <= 1.0 / (3.0 * fr.T) + 1e-9);
}

TEST_CASE("wedge residual: zero cases and refinement trend") {
  auto g = build_torus(48);
  StepConfig cfg;
  cfg.tol_grad = 1e-10;  // the trend needs the solver floor out of the way
  cfg.max_iters = 20000;

  SphereTestFn phi;
  phi.t0 = 0.03;
  phi.t1 = 0.08;
  phi.cx = 0.4;
  phi.hx = 0.35;

  // Constant flow: identically zero.
  auto cflow = run_sphere_flow(make_sphere_constant(g, 3), 0.1, 8, 0.9, cfg);
  for (double r : wedge_residual(cflow, phi)) CHECK(r == 0.0);

  // Support outside (0,T): zero.
  auto u0 = make_sphere_random(g, 3, 9, 0.7);
  auto fr = run_sphere_flow(u0, 0.1, 8, 0.9, cfg);
  SphereTestFn off = phi;
  off.t0 = 0.2;
  off.t1 = 0.3;
  for (double r : wedge_residual(fr, off)) CHECK(r == 0.0);

  // Fixed phi, refining N: the max component decreases monotonically until
  // it reaches the rounding floor of the assembly.
  const double floor = 1e-12;
  double prev = -1.0;
  for (int N : {8, 16, 32}) {
    auto frn = run_sphere_flow(u0, 0.1, N, 0.9, cfg);
    double mx = 0.0;
    for (double r : wedge_residual(frn, phi)) mx = std::max(mx, std::abs(r));
    if (prev >= 0.0) CHECK((mx < prev || (mx < floor && prev < floor)));
    prev = mx;
  }
}

TEST_CASE("trace CSV reduced schema") {
  auto g = build_torus(16);
  auto u0 = make_sphere_random(g, 2, 3, 0.4);
  auto fr = run_sphere_flow(u0, 0.05, 4, 0.5, StepConfig{});
  fr.write_csv("/tmp/orthoflow_sphere_trace.csv");
  std::ifstream is("/tmp/orthoflow_sphere_trace.csv");
  std::string header;
  std::getline(is, header);
  CHECK(header == "m,t,E_dirichlet,kinetic_increment,el_residual,unit_dev_max");
  std::remove("/tmp/orthoflow_sphere_trace.csv");
}
