#include "orthoflow/flow.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "orthoflow/kernels.hpp"
#include "orthoflow/rng.hpp"

namespace orthoflow {

namespace {

constexpr double kPi = std::numbers::pi;

int slab_of(double t, double h, int nsteps) {
  int m = static_cast<int>(std::ceil(t / h - 1e-12)) - 1;
  if (m < 0) m = 0;
  if (m > nsteps - 1) m = nsteps - 1;
  return m;
}

// Chord interpolation along the normal direction at a fixed tangential
// index. Queries landing on a node (within 1e-9 slices) copy the node value
// exactly, so identity pullbacks are bit-exact and stay on the manifold.
Mat interp_normal(const MatrixField& f, const PhaseGrid& g, int itan, double c,
                  bool* exact_hit = nullptr) {
  double s = (c - g.normal0) / g.normal_step;
  if (s < 0.0) s = 0.0;
  if (s > g.n_normal - 1) s = g.n_normal - 1;
  const double r = std::round(s);
  if (std::abs(s - r) < 1e-9) {
    if (exact_hit) *exact_hit = true;
    return f.get(g.node(static_cast<int>(r), itan));
  }
  if (exact_hit) *exact_hit = false;
  int j = static_cast<int>(std::floor(s));
  if (j > g.n_normal - 2) j = g.n_normal - 2;
  const double w = s - j;
  Mat a = f.get(g.node(j, itan));
  Mat b = f.get(g.node(j + 1, itan));
  return a * (1.0 - w) + b * w;
}

GridSpec spec_at_interface(const GridSpec& base, const InterfaceMotion& motion, double t) {
  GridSpec s = base;
  const double p = motion.interface_pos(t);
  if (base.geom == Geometry::PolarDisk)
    s.r_iface = p;
  else if (base.geom == Geometry::FlatBox1D)
    s.iface_pos = p;
  return s;
}

void domain_bounds(const GridSpec& spec, double& core, double& outer) {
  if (spec.geom == Geometry::PolarDisk) {
    core = spec.r_core;
    outer = spec.R;
  } else {
    core = -1.0;
    outer = 1.0;
  }
}

// Pulls A^m back through Phi_h^m(., t1) onto the step-(m+1) grid: chord
// interpolation along rays followed by a manifold snap; interface and
// exact-hit nodes are copied. Returns the max snap distance (the re-grid
// transfer error).
double pullback_warm_start(const PairedField& am, const GridPtr& g1, const DiffeoFamily& fam,
                           int m, PairedField& out) {
  const double t1 = (m + 1) * fam.h();
  const int n = am.n;
  out = make_paired_field(g1, n);
  double transfer = 0.0;
  for (Phase ph : {Phase::Plus, Phase::Minus}) {
    const PhaseGrid& gnew = ph == Phase::Plus ? g1->plus : g1->minus;
    const PhaseGrid& gold = ph == Phase::Plus ? am.grid->plus : am.grid->minus;
    const MatrixField& src = am.phase(ph);
    MatrixField& dst = out.phase(ph);
    std::vector<bool> iface(gnew.num_nodes, false);
    for (int id : ph == Phase::Plus ? g1->iface_plus : g1->iface_minus) iface[id] = true;
    for (int j = 0; j < gnew.n_normal; ++j) {
      const double c = gnew.normal0 + j * gnew.normal_step;
      const double z = fam.map_normal(m, c, t1);
      for (int i = 0; i < gnew.n_tangent; ++i) {
        const int id = gnew.node(j, i);
        if (iface[id]) continue;
        bool hit = false;
        Mat chord = interp_normal(src, gold, i, z, &hit);
        if (hit) {
          dst.set(id, chord);
        } else {
          Mat snapped = nearest_orthogonal(chord).mat;
          transfer = std::max(transfer, frob_dist(chord, snapped));
          dst.set(id, snapped);
        }
      }
    }
  }
  // Interface pairs: the diffeomorphism maps the interface onto the anchor
  // interface exactly, so copy the pair and its axis and rebuild A- in the
  // chart.
  for (int p = 0; p < g1->num_iface; ++p) {
    out.plus.set(g1->iface_plus[p], am.plus.get(am.grid->iface_plus[p]));
    const Vec ax = am.axis_vec(p);
    std::copy(ax.begin(), ax.end(), out.axis(p));
    out.minus.set(g1->iface_minus[p],
                  out.plus.get(g1->iface_plus[p]) * reflection(ax, 1e-8));
  }
  return transfer;
}

VelocityField velocity_on_grid(const GridPtr& g, const DiffeoFamily& fam, int m) {
  VelocityField v = VelocityField::zero(*g);
  for (Phase ph : {Phase::Plus, Phase::Minus}) {
    const PhaseGrid& pg = ph == Phase::Plus ? g->plus : g->minus;
    double* dst = (ph == Phase::Plus ? v.plus : v.minus).data();
    for (int i = 0; i < pg.num_nodes; ++i) {
      const double c = pg.coords[static_cast<std::size_t>(i) * pg.dim];
      dst[static_cast<std::size_t>(i) * pg.dim] = fam.velocity_normal(m, c);
    }
  }
  return v;
}

double phase_dirichlet(const PairedField& f, Phase ph) {
  return dirichlet_energy_phase(f.phase(ph),
                                ph == Phase::Plus ? f.grid->plus : f.grid->minus);
}

void finish_trace(FlowTrace& tr, double d0) {
  tr.initial_dirichlet = d0;
  tr.kinetic_sum = 0.0;
  tr.sup_dirichlet = 0.0;
  tr.c_tilde = 0.0;
  tr.dirichlet_monotone = true;
  tr.energy_telescope_slack = -d0;
  double prev = d0;
  double kin = 0.0;
  for (const FlowStepRecord& r : tr.steps) {
    const double d = r.dirichlet_plus + r.dirichlet_minus;
    kin += r.kinetic_increment;
    tr.kinetic_sum = kin;
    tr.sup_dirichlet = std::max(tr.sup_dirichlet, d);
    tr.c_tilde = std::max(tr.c_tilde, r.c_tilde_running);
    if (d > prev * (1.0 + 1e-12) + 1e-14) tr.dirichlet_monotone = false;
    tr.energy_telescope_slack = std::max(tr.energy_telescope_slack, kin + d - d0);
    prev = d;
    tr.final_dirichlet = d;
  }
}

} // namespace

FlowResult run_fixed(const PairedField& a0, const FlowConfig& cfg) {
  if (cfg.N < 2) fail(Errc::InvalidArgument, "run_fixed: N >= 2 required");
  const double h = cfg.h();
  FlowResult fr;
  fr.cfg = cfg;
  fr.grids.assign(static_cast<std::size_t>(cfg.N) + 1, a0.grid);
  fr.iterates.push_back(a0);
  fr.trace.T = cfg.T;
  fr.trace.h = h;
  fr.trace.N = cfg.N;
  const double d0 = dirichlet_energy(a0);
  double dprev = d0;

  for (int m = 0; m < cfg.N; ++m) {
    const PairedField& am = fr.iterates.back();
    StepResult res = minimize_step(am, nullptr, h, cfg.step);
    fr.warm_starts.push_back(am);

    FlowStepRecord rec;
    rec.m = m + 1;
    rec.t = (m + 1) * h;
    rec.dirichlet_plus = phase_dirichlet(res.field, Phase::Plus);
    rec.dirichlet_minus = phase_dirichlet(res.field, Phase::Minus);
    rec.total_energy = res.energy_after.total;
    rec.kinetic_increment = l2_distance_sq(res.field, am) / h;
    rec.orth_residual_max = max_orth_residual(res.field);
    rec.pair_residual_max = max_pair_residual(res.field);
    auto testset = make_el_testset(res.field, cfg.el_interior_nodes, cfg.el_iface_pairs);
    rec.el_residual = euler_lagrange_residual(res.field, am, nullptr, h, testset);
    const double d = rec.dirichlet_plus + rec.dirichlet_minus;
    double need = 0.0;
    if (dprev > 1e-14 && d > dprev) need = std::log(d / dprev) / h;
    rec.c_tilde_running =
        std::max(need, fr.trace.steps.empty() ? 0.0 : fr.trace.steps.back().c_tilde_running);
    rec.iterations = res.iterations;
    rec.grad_norm = res.final_grad_norm;
    fr.trace.steps.push_back(rec);
    fr.iterates.push_back(std::move(res.field));
    dprev = d;
  }
  finish_trace(fr.trace, d0);
  fr.trace.initial_attach_C = initial_attachment_constant(fr);
  return fr;
}

FlowResult run_moving(const PairedField& a0, const FlowConfig& cfg) {
  if (cfg.N < 2) fail(Errc::InvalidArgument, "run_moving: N >= 2 required");
  if (cfg.motion.kind == MotionKind::ShrinkingCircle && cfg.grid.geom != Geometry::PolarDisk)
    fail(Errc::GeometryError, "ShrinkingCircle requires the PolarDisk geometry");
  if (cfg.motion.kind == MotionKind::PrescribedPoint1D && cfg.grid.geom != Geometry::FlatBox1D)
    fail(Errc::GeometryError, "PrescribedPoint1D requires the FlatBox1D geometry");
  const double h = cfg.h();
  double core, outer;
  domain_bounds(cfg.grid, core, outer);
  auto fam = std::make_shared<DiffeoFamily>(cfg.motion, h, cfg.T, core, outer);

  const GridSpec spec0 = spec_at_interface(cfg.grid, cfg.motion, 0.0);
  if (!(a0.grid->spec == spec0))
    fail(Errc::GridMismatch, "run_moving: initial field grid does not match Gamma(0)");

  FlowResult fr;
  fr.cfg = cfg;
  fr.diffeos = fam;
  fr.grids.push_back(a0.grid);
  fr.iterates.push_back(a0);
  fr.trace.T = cfg.T;
  fr.trace.h = h;
  fr.trace.N = cfg.N;
  const double d0 = dirichlet_energy(a0);
  double dprev = d0;

  for (int m = 0; m < cfg.N; ++m) {
    const double t1 = (m + 1) * h;
    GridPtr g1 = build_grid(spec_at_interface(cfg.grid, cfg.motion, t1));
    PairedField warm;
    const double transfer = pullback_warm_start(fr.iterates.back(), g1, *fam, m, warm);
    VelocityField vel = velocity_on_grid(g1, *fam, m);
    StepResult res = minimize_step(warm, &vel, h, cfg.step);

    FlowStepRecord rec;
    rec.m = m + 1;
    rec.t = t1;
    rec.dirichlet_plus = phase_dirichlet(res.field, Phase::Plus);
    rec.dirichlet_minus = phase_dirichlet(res.field, Phase::Minus);
    rec.total_energy = res.energy_after.total;
    rec.kinetic_increment = l2_distance_sq(res.field, warm) / h;
    rec.orth_residual_max = max_orth_residual(res.field);
    rec.pair_residual_max = max_pair_residual(res.field);
    auto testset = make_el_testset(res.field, cfg.el_interior_nodes, cfg.el_iface_pairs);
    rec.el_residual = euler_lagrange_residual(res.field, warm, &vel, h, testset);
    rec.transfer_error = transfer;
    const double d = rec.dirichlet_plus + rec.dirichlet_minus;
    double need = 0.0;
    if (dprev > 1e-14 && d > dprev) need = std::log(d / dprev) / h;
    rec.c_tilde_running =
        std::max(need, fr.trace.steps.empty() ? 0.0 : fr.trace.steps.back().c_tilde_running);
    // Jacobian deviation over the slab, sampled.
    double jd = 0.0;
    for (int it = 1; it <= 4; ++it) {
      const double ts = m * h + h * it / 4.0;
      for (int ic = 0; ic <= 16; ++ic) {
        const double c = core + (outer - core) * ic / 16.0;
        jd = std::max(jd, std::abs(fam->jacobian(m, c, ts, a0.grid->dim) - 1.0));
      }
    }
    rec.jac_dev_max = jd;
    rec.iterations = res.iterations;
    rec.grad_norm = res.final_grad_norm;
    fr.trace.steps.push_back(rec);
    fr.warm_starts.push_back(std::move(warm));
    fr.velocities.push_back(std::move(vel));
    fr.grids.push_back(g1);
    fr.iterates.push_back(std::move(res.field));
    dprev = d;
  }
  finish_trace(fr.trace, d0);
  fr.trace.initial_attach_C = initial_attachment_constant(fr);
  return fr;
}

Mat evaluate_interpolant(const FlowResult& fr, Interp which, Phase ph, int tangential,
                         double normal_coord, double t) {
  const double h = fr.trace.h;
  if (t < 0.0 || t > fr.cfg.T * (1.0 + 1e-12))
    fail(Errc::InvalidArgument, "evaluate_interpolant: t outside [0, T]");
  const auto& grids = fr.grids;
  if (t <= 0.0) {
    const PhaseGrid& g = ph == Phase::Plus ? grids[0]->plus : grids[0]->minus;
    return interp_normal(fr.iterates[0].phase(ph), g, tangential, normal_coord);
  }
  const int m = slab_of(t, h, fr.trace.N);
  const double theta = (t - m * h) / h;

  double za = normal_coord, zb = normal_coord;
  if (fr.moving()) {
    za = fr.diffeos->map_normal(m, normal_coord, t);
    zb = fr.diffeos->map_bar_normal(m, normal_coord, t);
  }
  const PhaseGrid& ga = ph == Phase::Plus ? grids[m]->plus : grids[m]->minus;
  const PhaseGrid& gb = ph == Phase::Plus ? grids[m + 1]->plus : grids[m + 1]->minus;
  Mat b = interp_normal(fr.iterates[m + 1].phase(ph), gb, tangential, zb);
  if (which == Interp::Constant) {
    if (orth_residual(b) > 1e-12) b = nearest_orthogonal(b).mat;
    return b;
  }
  Mat a = interp_normal(fr.iterates[m].phase(ph), ga, tangential, za);
  if (which == Interp::Linear) return a * (1.0 - theta) + b * theta;
  const double lam = fr.cfg.lambda;
  if (theta >= 1.0 - lam) return b;
  const double thl = theta / (1.0 - lam);
  return a * (1.0 - thl) + b * thl;
}

double interpolant_gap_sq(const FlowResult& fr) {
  const double h = fr.trace.h;
  const int n = fr.cfg.n;
  const std::size_t bs = static_cast<std::size_t>(n) * n;
  double total = 0.0;
  // 2-point Gauss on each slab for the (1-theta)^2 weight (exact for the
  // fixed case where the Jacobian factor is 1).
  const double gauss[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
  for (int m = 0; m < fr.trace.N; ++m) {
    const PairedField& next = fr.iterates[m + 1];
    const PairedField& warm = fr.warm_starts[m];
    for (double gq : gauss) {
      const double theta = gq;
      const double wq = 0.5 * h * (1.0 - theta) * (1.0 - theta);
      if (!fr.moving()) {
        total += wq * l2_distance_sq(next, warm) / 1.0;
        continue;
      }
      const double t = m * h + theta * h;
      double acc = 0.0;
      for (Phase ph : {Phase::Plus, Phase::Minus}) {
        const PhaseGrid& g = ph == Phase::Plus ? fr.grids[m + 1]->plus : fr.grids[m + 1]->minus;
        const MatrixField& fa = next.phase(ph);
        const MatrixField& fb = warm.phase(ph);
        for (int j = 0; j < g.n_normal; ++j) {
          const double y = g.normal0 + j * g.normal_step;
          const double chat = fr.diffeos->map_normal_inverse(
              m, fr.diffeos->map_normal(m, y, (m + 1) * h), t);
          // J((PhiBar)^-1)(y, t) = 1 / J(PhiBar)(x, t) at x = PhiBar^-1(y).
          const double jinv =
              1.0 / fr.diffeos->jacobian_bar(m, chat, t, fr.grids[0]->dim);
          for (int i = 0; i < g.n_tangent; ++i) {
            const int id = g.node(j, i);
            acc += g.vol_w[id] * jinv *
                   kernels::sumsq_diff(fa.at(id), fb.at(id), bs);
          }
        }
      }
      total += wq * acc;
    }
  }
  return total;
}

LambdaPairStats lambda_pair_statistics(const FlowResult& fr, double lambda,
                                       int samples_per_slab) {
  if (!(lambda > 0.0 && lambda < 1.0))
    fail(Errc::InvalidArgument, "lambda must lie in (0,1)");
  LambdaPairStats st;
  const int S = std::max(samples_per_slab, fr.trace.N);
  long exact = 0, totalcnt = 0;
  const int npairs = fr.grids[0]->num_iface;
  const int pstride = std::max(1, npairs / 8);
  for (int m = 0; m < fr.trace.N; ++m) {
    const PairedField& next = fr.iterates[m + 1];
    const PairedField& warm = fr.moving() ? fr.warm_starts[m] : fr.iterates[m];
    const GridPtr& g1 = fr.grids[m + 1];
    for (int p = 0; p < npairs; p += pstride) {
      const Mat dplus = next.plus.get(g1->iface_plus[p]) - warm.plus.get(
          fr.moving() ? g1->iface_plus[p] : fr.grids[m]->iface_plus[p]);
      st.max_chord_delta = std::max(st.max_chord_delta, frob(dplus));
    }
    for (int k = 1; k <= S; ++k) {
      const double frac = static_cast<double>(k) / S;
      ++totalcnt;
      if (frac > 1.0 - lambda) {
        ++exact;  // plateau: the interpolant sits on the stored minimal pair
        continue;
      }
      const double thl = frac / (1.0 - lambda);
      for (int p = 0; p < npairs; p += pstride) {
        const int ip = g1->iface_plus[p];
        const int im = g1->iface_minus[p];
        Mat ap = fr.moving()
                     ? warm.plus.get(ip) * (1.0 - thl) + next.plus.get(ip) * thl
                     : fr.iterates[m].plus.get(fr.grids[m]->iface_plus[p]) * (1.0 - thl) +
                           next.plus.get(ip) * thl;
        Mat am = fr.moving()
                     ? warm.minus.get(im) * (1.0 - thl) + next.minus.get(im) * thl
                     : fr.iterates[m].minus.get(fr.grids[m]->iface_minus[p]) * (1.0 - thl) +
                           next.minus.get(im) * thl;
        st.max_offplateau_residual =
            std::max(st.max_offplateau_residual, minimal_pair_residual(ap, am).residual);
      }
    }
  }
  st.fraction_exact = static_cast<double>(exact) / totalcnt;
  return st;
}

double initial_attachment_constant(const FlowResult& fr) {
  const double d0 = fr.trace.initial_dirichlet > 0.0 ? fr.trace.initial_dirichlet
                                                     : dirichlet_energy(fr.iterates[0]);
  if (d0 <= 1e-14) return 0.0;
  const double h = fr.trace.h;
  const int n = fr.cfg.n;
  const std::size_t bs = static_cast<std::size_t>(n) * n;
  double cmax = 0.0;
  for (int m = 1; m <= fr.trace.N; ++m) {
    const double tinf = m * h;  // inf of (t + h) over the slab carrying A^m
    double dist = 0.0;
    if (!fr.moving()) {
      dist = l2_distance_sq(fr.iterates[m], fr.iterates[0]);
    } else {
      const PairedField& am = fr.iterates[m];
      for (Phase ph : {Phase::Plus, Phase::Minus}) {
        const PhaseGrid& g = ph == Phase::Plus ? fr.grids[m]->plus : fr.grids[m]->minus;
        const PhaseGrid& g0 = ph == Phase::Plus ? fr.grids[0]->plus : fr.grids[0]->minus;
        const MatrixField& f = am.phase(ph);
        const MatrixField& f0 = fr.iterates[0].phase(ph);
        for (int j = 0; j < g.n_normal; ++j) {
          // Lagrangian pullback to time 0 through the slab maps at their
          // right endpoints.
          double c = g.normal0 + j * g.normal_step;
          for (int s = m - 1; s >= 0; --s)
            c = fr.diffeos->map_normal(s, c, (s + 1) * h);
          for (int i = 0; i < g.n_tangent; ++i) {
            const int id = g.node(j, i);
            Mat ref = interp_normal(f0, g0, i, c);
            dist += g.vol_w[id] * kernels::sumsq_diff(f.at(id), ref.data(), bs);
          }
        }
      }
    }
    cmax = std::max(cmax, dist / (tinf * d0));
  }
  return cmax;
}

// ------------------------------------------------------------- weak forms

namespace {

inline double bump(double u) {  // C^2, supported on |u| < 1, bump(0) = 1
  const double a = std::abs(u);
  if (a >= 1.0) return 0.0;
  const double s = 1.0 - a;
  return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

inline double bump_d(double u) {
  const double a = std::abs(u);
  if (a >= 1.0) return 0.0;
  const double s = 1.0 - a;
  const double d = s * s * (30.0 + s * (-60.0 + 30.0 * s));
  return u >= 0.0 ? -d : d;
}

double angdiff(double a, double b) {
  double d = a - b;
  while (d > kPi) d -= 2.0 * kPi;
  while (d < -kPi) d += 2.0 * kPi;
  return d;
}

} // namespace

double WeakTestField::scalar(const TwoPhaseGrid& g, Phase ph, const double* coord,
                             double t) const {
  if (plus_only && ph == Phase::Minus) return 0.0;
  if (minus_only && ph == Phase::Plus) return 0.0;
  const double tmid = 0.5 * (t0 + t1), thw = 0.5 * (t1 - t0);
  double v = bump((t - tmid) / thw);
  v *= bump((coord[0] - center_n) / halfw_n);
  if (g.dim == 2 && halfw_t > 0.0) {
    const double tc = g.spec.geom == Geometry::PolarDisk ? angdiff(coord[1], center_t)
                                                         : coord[1] - center_t;
    v *= bump(tc / halfw_t);
  }
  return v;
}

void WeakTestField::scalar_grad(const TwoPhaseGrid& g, Phase ph, const double* coord,
                                double t, double* grad_out) const {
  grad_out[0] = 0.0;
  if (g.dim == 2) grad_out[1] = 0.0;
  if (plus_only && ph == Phase::Minus) return;
  if (minus_only && ph == Phase::Plus) return;
  const double tmid = 0.5 * (t0 + t1), thw = 0.5 * (t1 - t0);
  const double ft = bump((t - tmid) / thw);
  const double un = (coord[0] - center_n) / halfw_n;
  double fn = bump(un), dfn = bump_d(un) / halfw_n;
  double ftan = 1.0, dftan = 0.0;
  if (g.dim == 2 && halfw_t > 0.0) {
    const double ut = (g.spec.geom == Geometry::PolarDisk ? angdiff(coord[1], center_t)
                                                          : coord[1] - center_t) /
                      halfw_t;
    ftan = bump(ut);
    dftan = bump_d(ut) / halfw_t;
    if (g.spec.geom == Geometry::PolarDisk) dftan /= coord[0];  // physical component
  }
  grad_out[0] = ft * dfn * ftan;
  if (g.dim == 2) grad_out[1] = ft * fn * dftan;
}

std::vector<WeakTestField> make_weak_test_library(const FlowConfig& cfg, int n,
                                                  std::uint64_t seed, int count) {
  Rng rng = Rng::split(seed, 91);
  std::vector<WeakTestField> lib;
  const bool polar = cfg.grid.geom == Geometry::PolarDisk;
  double core, outer;
  domain_bounds(cfg.grid, core, outer);
  double pmin = cfg.motion.interface_pos(0.0), pmax = pmin;
  for (int k = 0; k <= 16; ++k) {
    const double p = cfg.motion.interface_pos(cfg.T * k / 16.0);
    pmin = std::min(pmin, p);
    pmax = std::max(pmax, p);
  }
  for (int k = 0; k < count; ++k) {
    WeakTestField w;
    const double tmid = cfg.T * rng.uniform(0.3, 0.7);
    const double thw = cfg.T * rng.uniform(0.15, 0.25);
    w.t0 = tmid - thw;
    w.t1 = tmid + thw;
    w.dir = random_antisym(n, rng);
    w.dir *= 1.0 / frob(w.dir);
    const bool iface_supported = (k % 2 == 0);
    if (iface_supported) {
      // Straddles Gamma(t) for all t; equal directions on both phases keep
      // (Psi+ - Psi-) = 0 there.
      w.center_n = 0.5 * (pmin + pmax);
      w.halfw_n = (pmax - pmin) * 0.5 + rng.uniform(0.15, 0.3) * (outer - core);
    } else {
      // Interior of the minus phase, clear of Gamma at all times.
      const double lo = pmax + 0.05 * (outer - core);
      const double hi = outer - 0.02 * (outer - core);
      w.center_n = rng.uniform(lo + 0.3 * (hi - lo), hi - 0.3 * (hi - lo));
      w.halfw_n = std::min(w.center_n - lo, hi - w.center_n);
      w.minus_only = true;
    }
    if (cfg.grid.geom != Geometry::FlatBox1D) {
      w.center_t = polar ? rng.uniform(0.0, 2.0 * kPi) : rng.uniform(-0.4, 0.4);
      w.halfw_t = polar ? rng.uniform(1.0, 2.5) : rng.uniform(0.4, 0.9);
    }
    lib.push_back(std::move(w));
  }
  return lib;
}

namespace {

// Per-slab assembly context: value and gradient factors on the anchor grid,
// with the moving-case change of variables.
struct SlabGeo {
  const FlowResult* fr;
  int m;
  double t;      // Gauss time inside the slab
  double theta;  // (t - t_m)/h

  // For node with normal coordinate y on the anchor grid: physical pullback
  // coordinate (PhiBar^-1) and inverse-Jacobian weight.
  void node_factors(double y, double& chat, double& jinv) const {
    if (!fr->moving()) {
      chat = y;
      jinv = 1.0;
      return;
    }
    const double h = fr->trace.h;
    chat = fr->diffeos->map_normal_inverse(m, fr->diffeos->map_normal(m, y, (m + 1) * h), t);
    jinv = 1.0 / fr->diffeos->jacobian_bar(m, chat, t, fr->grids[0]->dim);
  }
};

} // namespace

double weak_neumann_residual(const FlowResult& fr, const WeakTestField& psi) {
  const double h = fr.trace.h;
  const int n = fr.cfg.n;
  const std::size_t bs = static_cast<std::size_t>(n) * n;
  const double gauss[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
  double total = 0.0;
  std::vector<double> m1(bs), m2(bs), dta(bs);

  for (int m = 0; m < fr.trace.N; ++m) {
    const PairedField& next = fr.iterates[m + 1];
    const PairedField& warm = fr.moving() ? fr.warm_starts[m] : fr.iterates[m];
    const GridPtr& g1 = fr.grids[m + 1];
    for (double gq : gauss) {
      SlabGeo geo{&fr, m, m * h + gq * h, gq};
      const double wq = 0.5 * h;
      for (Phase ph : {Phase::Plus, Phase::Minus}) {
        const PhaseGrid& g = ph == Phase::Plus ? g1->plus : g1->minus;
        const MatrixField& fb = next.phase(ph);
        const MatrixField& fa = warm.phase(ph);
        const double* vel = nullptr;
        MatrixField trans_warm, trans_next;
        if (fr.moving()) {
          vel = (ph == Phase::Plus ? fr.velocities[m].plus : fr.velocities[m].minus).data();
          transport_field(fa, g, vel, trans_warm);
          transport_field(fb, g, vel, trans_next);
        }
        // Precompute Psi at mapped node positions and per-node measures.
        std::vector<double> psival(g.num_nodes), meas(g.num_nodes);
        std::vector<double> psigrad(static_cast<std::size_t>(g.num_nodes) * g.dim);
        for (int j = 0; j < g.n_normal; ++j) {
          const double y = g.normal0 + j * g.normal_step;
          double chat, jinv;
          geo.node_factors(y, chat, jinv);
          for (int i = 0; i < g.n_tangent; ++i) {
            const int id = g.node(j, i);
            double coord[2] = {chat, g.dim == 2 ? g.coords[2 * id + 1] : 0.0};
            psival[id] = psi.scalar(*g1, ph, coord, geo.t);
            psi.scalar_grad(*g1, ph, coord, geo.t, &psigrad[static_cast<std::size_t>(id) * g.dim]);
            meas[id] = jinv;
          }
        }
        // Term 1: (dtA A^T) : Psi with dtA from the linear interpolant plus
        // the moving-frame transport corrections.
        for (int id = 0; id < g.num_nodes; ++id) {
          if (psival[id] == 0.0) continue;
          const double* pa = fa.at(id);
          const double* pb = fb.at(id);
          for (std::size_t k = 0; k < bs; ++k) dta[k] = (pb[k] - pa[k]) / h;
          if (fr.moving()) {
            const double* tw = trans_warm.at(id);
            const double* tn = trans_next.at(id);
            for (std::size_t k = 0; k < bs; ++k)
              dta[k] += (1.0 - geo.theta) * tw[k] + geo.theta * tn[k];
          }
          mmt(n, m1.data(), dta.data(), pb);  // (dtA) Abar^T
          double dot = 0.0;
          for (int r = 0; r < n; ++r)
            for (int c2 = 0; c2 < n; ++c2) dot += m1[r * n + c2] * psi.dir(r, c2);
          total += wq * g.vol_w[id] * meas[id] * psival[id] * dot;
        }
        // Term 2: edge-based (grad Abar Abar^T) : grad Psi.
        for (const EdgeRun& run : g.runs) {
          for (int k = 0; k < run.count; ++k) {
            const int ia = run.a0 + k, ib = run.b0 + k;
            if (psival[ia] == 0.0 && psival[ib] == 0.0) continue;
            const double* pa = fb.at(ia);
            const double* pb = fb.at(ib);
            for (std::size_t kk = 0; kk < bs; ++kk) m2[kk] = pb[kk] - pa[kk];
            mmt(n, m1.data(), m2.data(), pa);  // (A_b - A_a) A_a^T
            double dot = 0.0;
            for (int r = 0; r < n; ++r)
              for (int c2 = 0; c2 < n; ++c2) dot += m1[r * n + c2] * psi.dir(r, c2);
            total += wq * run.w[k] * 0.5 * (meas[ia] + meas[ib]) * (psival[ib] - psival[ia]) * dot;
          }
        }
      }
    }
  }
  return std::abs(total);
}

double weak_interior_residual(const FlowResult& fr, const WeakTestField& phi) {
  const double h = fr.trace.h;
  const int n = fr.cfg.n;
  const std::size_t bs = static_cast<std::size_t>(n) * n;
  const double gauss[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
  Mat acc = Mat::zero(n);
  std::vector<double> dta(bs), tmp(bs), tmp2(bs);

  for (int m = 0; m < fr.trace.N; ++m) {
    const PairedField& next = fr.iterates[m + 1];
    const PairedField& warm = fr.moving() ? fr.warm_starts[m] : fr.iterates[m];
    const GridPtr& g1 = fr.grids[m + 1];
    for (double gq : gauss) {
      SlabGeo geo{&fr, m, m * h + gq * h, gq};
      const double wq = 0.5 * h;
      for (Phase ph : {Phase::Plus, Phase::Minus}) {
        const PhaseGrid& g = ph == Phase::Plus ? g1->plus : g1->minus;
        const MatrixField& fb = next.phase(ph);
        const MatrixField& fa = warm.phase(ph);
        const double* vel = nullptr;
        MatrixField trans_warm, trans_next;
        if (fr.moving()) {
          vel = (ph == Phase::Plus ? fr.velocities[m].plus : fr.velocities[m].minus).data();
          transport_field(fa, g, vel, trans_warm);
          transport_field(fb, g, vel, trans_next);
        }
        std::vector<double> phival(g.num_nodes), meas(g.num_nodes);
        std::vector<double> phigrad(static_cast<std::size_t>(g.num_nodes) * g.dim);
        for (int j = 0; j < g.n_normal; ++j) {
          const double y = g.normal0 + j * g.normal_step;
          double chat, jinv;
          geo.node_factors(y, chat, jinv);
          for (int i = 0; i < g.n_tangent; ++i) {
            const int id = g.node(j, i);
            double coord[2] = {chat, g.dim == 2 ? g.coords[2 * id + 1] : 0.0};
            phival[id] = phi.scalar(*g1, ph, coord, geo.t);
            phi.scalar_grad(*g1, ph, coord, geo.t, &phigrad[static_cast<std::size_t>(id) * g.dim]);
            meas[id] = jinv;
          }
        }
        for (int id = 0; id < g.num_nodes; ++id) {
          const bool active = phival[id] != 0.0 ||
                              phigrad[static_cast<std::size_t>(id) * g.dim] != 0.0 ||
                              (g.dim == 2 && phigrad[static_cast<std::size_t>(id) * g.dim + 1] != 0.0);
          if (!active) continue;
          const double wnode = wq * g.vol_w[id] * meas[id];
          // dtA phi
          const double* pa = fa.at(id);
          const double* pb = fb.at(id);
          for (std::size_t k = 0; k < bs; ++k) dta[k] = (pb[k] - pa[k]) / h;
          if (fr.moving()) {
            const double* tw = trans_warm.at(id);
            const double* tn = trans_next.at(id);
            for (std::size_t k = 0; k < bs; ++k)
              dta[k] += (1.0 - geo.theta) * tw[k] + geo.theta * tn[k];
          }
          for (int r = 0; r < n; ++r)
            for (int c2 = 0; c2 < n; ++c2)
              for (int c3 = 0; c3 < n; ++c3)
                acc(r, c3) += wnode * phival[id] * dta[r * n + c2] * phi.dir(c2, c3);
          // grad A . grad phi and the quadratic term, with the centered
          // discrete gradient of the constant interpolant.
          for (int d = 0; d < g.dim; ++d) {
            const double scale = g.grad_s[static_cast<std::size_t>(id) * g.dim + d];
            const double* fp = fb.at(g.grad_ip[static_cast<std::size_t>(id) * g.dim + d]);
            const double* fm = fb.at(g.grad_im[static_cast<std::size_t>(id) * g.dim + d]);
            for (std::size_t k = 0; k < bs; ++k) tmp[k] = scale * (fp[k] - fm[k]);
            const double gphi = phigrad[static_cast<std::size_t>(id) * g.dim + d];
            for (int r = 0; r < n; ++r)
              for (int c2 = 0; c2 < n; ++c2)
                for (int c3 = 0; c3 < n; ++c3)
                  acc(r, c3) += wnode * gphi * tmp[r * n + c2] * phi.dir(c2, c3);
            // grad A A^T grad A phi
            if (phival[id] != 0.0) {
              mmt(n, tmp2.data(), tmp.data(), pb);
              std::vector<double> t3(bs);
              mm(n, t3.data(), tmp2.data(), tmp.data());
              for (int r = 0; r < n; ++r)
                for (int c2 = 0; c2 < n; ++c2)
                  for (int c3 = 0; c3 < n; ++c3)
                    acc(r, c3) += wnode * phival[id] * t3[r * n + c2] * phi.dir(c2, c3);
            }
          }
        }
      }
    }
  }
  return frob(acc);
}

void FlowTrace::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) fail(Errc::ParseError, "cannot open for write: " + path);
  os << "m,t,E_dirichlet_plus,E_dirichlet_minus,E_total,kinetic_increment,"
        "orth_residual_max,pair_residual_max,el_residual,c_tilde_running,jac_dev_max\n";
  char buf[512];
  for (const FlowStepRecord& r : steps) {
    std::snprintf(buf, sizeof(buf),
                  "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.m,
                  r.t, r.dirichlet_plus, r.dirichlet_minus, r.total_energy,
                  r.kinetic_increment, r.orth_residual_max, r.pair_residual_max,
                  r.el_residual, r.c_tilde_running, r.jac_dev_max);
    os << buf;
  }
}

} // namespace orthoflow
