#include "orthoflow/grid.hpp"

#include <cmath>
#include <numbers>

#include "orthoflow/kernels.hpp"

namespace orthoflow {

const char* geometry_name(Geometry g) {
  switch (g) {
    case Geometry::FlatBox1D: return "FlatBox1D";
    case Geometry::FlatBox2D: return "FlatBox2D";
    case Geometry::PolarDisk: return "PolarDisk";
  }
  return "?";
}

Geometry geometry_from_name(const std::string& name) {
  if (name == "FlatBox1D") return Geometry::FlatBox1D;
  if (name == "FlatBox2D") return Geometry::FlatBox2D;
  if (name == "PolarDisk") return Geometry::PolarDisk;
  fail(Errc::ParseError, "unknown geometry: " + name);
}

namespace {

constexpr double kPi = std::numbers::pi;

// 1D phase on a segment: nodes j = 0..m at iface + dir*j*step, node 0 on
// the interface.
PhaseGrid build_segment(double iface, double dir, double length, int m) {
  PhaseGrid g;
  g.dim = 1;
  g.n_normal = m + 1;
  g.n_tangent = 1;
  g.num_nodes = m + 1;
  const double step = length / m;
  g.normal0 = iface;
  g.normal_step = dir * step;
  g.coords.resize(g.num_nodes);
  g.vol_w.resize(g.num_nodes);
  for (int j = 0; j <= m; ++j) {
    g.coords[j] = iface + dir * j * step;
    g.vol_w[j] = (j == 0 || j == m) ? 0.5 * step : step;
  }
  EdgeRun run;
  run.a0 = 0;
  run.b0 = 1;
  run.count = m;
  run.w.assign(m, step / (step * step));  // w_e / len^2 = 1/step
  g.runs.push_back(run);
  g.grad_im.resize(g.num_nodes);
  g.grad_ip.resize(g.num_nodes);
  g.grad_s.resize(g.num_nodes);
  for (int j = 0; j <= m; ++j) {
    const int jm = j > 0 ? j - 1 : j;
    const int jp = j < m ? j + 1 : j;
    g.grad_im[j] = jm;
    g.grad_ip[j] = jp;
    g.grad_s[j] = 1.0 / ((g.coords[jp] - g.coords[jm]));
  }
  g.total_volume = length;
  return g;
}

// 2D box phase: tangential x1 in [-1,1] with mt intervals, normal x2 from
// the interface inward, mn intervals of height `height` with sign `dir`.
PhaseGrid build_box2d(double dir, double height, int mn, int mt) {
  PhaseGrid g;
  g.dim = 2;
  g.n_normal = mn + 1;
  g.n_tangent = mt + 1;
  g.num_nodes = g.n_normal * g.n_tangent;
  const double dn = height / mn;
  const double dt = 2.0 / mt;
  g.normal0 = 0.0;
  g.normal_step = dir * dn;
  g.coords.resize(2 * g.num_nodes);
  g.vol_w.resize(g.num_nodes);
  auto tanw = [&](int i) { return (i == 0 || i == mt) ? 0.5 * dt : dt; };
  auto norw = [&](int j) { return (j == 0 || j == mn) ? 0.5 * dn : dn; };
  for (int j = 0; j <= mn; ++j) {
    for (int i = 0; i <= mt; ++i) {
      const int id = g.node(j, i);
      g.coords[2 * id] = -1.0 + i * dt;
      g.coords[2 * id + 1] = dir * j * dn;
      g.vol_w[id] = tanw(i) * norw(j);
    }
  }
  // Tangential edges.
  for (int j = 0; j <= mn; ++j) {
    EdgeRun run;
    run.a0 = g.node(j, 0);
    run.b0 = g.node(j, 1);
    run.count = mt;
    run.w.assign(mt, norw(j) / dt);
    g.runs.push_back(run);
  }
  // Normal edges.
  for (int j = 0; j < mn; ++j) {
    EdgeRun run;
    run.a0 = g.node(j, 0);
    run.b0 = g.node(j + 1, 0);
    run.count = g.n_tangent;
    run.w.resize(g.n_tangent);
    for (int i = 0; i <= mt; ++i) run.w[i] = tanw(i) / dn;
    g.runs.push_back(run);
  }
  g.grad_im.resize(2 * g.num_nodes);
  g.grad_ip.resize(2 * g.num_nodes);
  g.grad_s.resize(2 * g.num_nodes);
  for (int j = 0; j <= mn; ++j) {
    for (int i = 0; i <= mt; ++i) {
      const int id = g.node(j, i);
      const int im = i > 0 ? i - 1 : i;
      const int ip = i < mt ? i + 1 : i;
      g.grad_im[2 * id] = g.node(j, im);
      g.grad_ip[2 * id] = g.node(j, ip);
      g.grad_s[2 * id] = 1.0 / ((ip - im) * dt);
      const int jm = j > 0 ? j - 1 : j;
      const int jp = j < mn ? j + 1 : j;
      g.grad_im[2 * id + 1] = g.node(jm, i);
      g.grad_ip[2 * id + 1] = g.node(jp, i);
      g.grad_s[2 * id + 1] = 1.0 / (dir * (jp - jm) * dn);
    }
  }
  g.total_volume = 2.0 * height;
  return g;
}

// Polar annulus phase: theta periodic with nt nodes, radial from r_in to
// r_out with mr intervals. iface_at_inner marks which radial end carries
// the interface (only used by the caller for pairing).
PhaseGrid build_annulus(double r_in, double r_out, int mr, int nt) {
  PhaseGrid g;
  g.dim = 2;
  g.n_normal = mr + 1;
  g.n_tangent = nt;
  g.num_nodes = g.n_normal * nt;
  const double dr = (r_out - r_in) / mr;
  const double dth = 2.0 * kPi / nt;
  g.normal0 = r_in;
  g.normal_step = dr;
  g.coords.resize(2 * g.num_nodes);
  g.vol_w.resize(g.num_nodes);
  auto radw = [&](int j) { return (j == 0 || j == mr) ? 0.5 * dr : dr; };
  auto r_of = [&](int j) { return r_in + j * dr; };
  for (int j = 0; j <= mr; ++j) {
    for (int i = 0; i < nt; ++i) {
      const int id = g.node(j, i);
      g.coords[2 * id] = r_of(j);
      g.coords[2 * id + 1] = i * dth;
      g.vol_w[id] = r_of(j) * radw(j) * dth;
    }
  }
  // Radial edges: weight r_mid*dth*dr / dr^2.
  for (int j = 0; j < mr; ++j) {
    EdgeRun run;
    run.a0 = g.node(j, 0);
    run.b0 = g.node(j + 1, 0);
    run.count = nt;
    run.w.assign(nt, (r_of(j) + 0.5 * dr) * dth / dr);
    g.runs.push_back(run);
  }
  // Angular edges: length r*dth, transverse weight radw(j), metric-weighted
  // quadrature radw/(r*dth); one wrap edge per ring.
  for (int j = 0; j <= mr; ++j) {
    const double w = radw(j) / (r_of(j) * dth);
    EdgeRun run;
    run.a0 = g.node(j, 0);
    run.b0 = g.node(j, 1);
    run.count = nt - 1;
    run.w.assign(nt - 1, w);
    g.runs.push_back(run);
    EdgeRun wrap;
    wrap.a0 = g.node(j, nt - 1);
    wrap.b0 = g.node(j, 0);
    wrap.count = 1;
    wrap.w.assign(1, w);
    g.runs.push_back(wrap);
  }
  g.grad_im.resize(2 * g.num_nodes);
  g.grad_ip.resize(2 * g.num_nodes);
  g.grad_s.resize(2 * g.num_nodes);
  for (int j = 0; j <= mr; ++j) {
    for (int i = 0; i < nt; ++i) {
      const int id = g.node(j, i);
      const int jm = j > 0 ? j - 1 : j;
      const int jp = j < mr ? j + 1 : j;
      g.grad_im[2 * id] = g.node(jm, i);
      g.grad_ip[2 * id] = g.node(jp, i);
      g.grad_s[2 * id] = 1.0 / ((jp - jm) * dr);
      const int im = (i + nt - 1) % nt;
      const int ip = (i + 1) % nt;
      g.grad_im[2 * id + 1] = g.node(j, im);
      g.grad_ip[2 * id + 1] = g.node(j, ip);
      g.grad_s[2 * id + 1] = 1.0 / (2.0 * dth * r_of(j));
    }
  }
  g.total_volume = kPi * (r_out * r_out - r_in * r_in);
  return g;
}

} // namespace

GridPtr build_grid(const GridSpec& spec) {
  auto grid = std::make_shared<TwoPhaseGrid>();
  grid->spec = spec;
  switch (spec.geom) {
    case Geometry::FlatBox1D: {
      grid->dim = 1;
      const double s = spec.iface_pos;
      if (!(s > -1.0 && s < 1.0)) fail(Errc::GeometryError, "FlatBox1D: interface outside (-1,1)");
      grid->plus = build_segment(s, +1.0, 1.0 - s, spec.m_normal);
      grid->minus = build_segment(s, -1.0, 1.0 + s, spec.m_normal);
      grid->num_iface = 1;
      grid->iface_plus = {0};
      grid->iface_minus = {0};
      grid->iface_w = {1.0};
      grid->analytic_volume = 2.0;
      break;
    }
    case Geometry::FlatBox2D: {
      grid->dim = 2;
      grid->plus = build_box2d(+1.0, 1.0, spec.m_normal, spec.m_tangent);
      grid->minus = build_box2d(-1.0, 1.0, spec.m_normal, spec.m_tangent);
      grid->num_iface = spec.m_tangent + 1;
      const double dt = 2.0 / spec.m_tangent;
      for (int i = 0; i <= spec.m_tangent; ++i) {
        grid->iface_plus.push_back(grid->plus.node(0, i));
        grid->iface_minus.push_back(grid->minus.node(0, i));
        grid->iface_w.push_back((i == 0 || i == spec.m_tangent) ? 0.5 * dt : dt);
      }
      grid->analytic_volume = 4.0;
      break;
    }
    case Geometry::PolarDisk: {
      grid->dim = 2;
      if (!(spec.r_core < spec.r_iface && spec.r_iface < spec.R))
        fail(Errc::GeometryError, "PolarDisk: need r_core < r_iface < R");
      grid->plus = build_annulus(spec.r_core, spec.r_iface, spec.m_normal, spec.m_tangent);
      grid->minus = build_annulus(spec.r_iface, spec.R, spec.m_normal, spec.m_tangent);
      grid->num_iface = spec.m_tangent;
      const double dth = 2.0 * kPi / spec.m_tangent;
      for (int i = 0; i < spec.m_tangent; ++i) {
        grid->iface_plus.push_back(grid->plus.node(grid->plus.n_normal - 1, i));
        grid->iface_minus.push_back(grid->minus.node(0, i));
        grid->iface_w.push_back(spec.r_iface * dth);
      }
      grid->analytic_volume = kPi * (spec.R * spec.R - spec.r_core * spec.r_core);
      break;
    }
  }
  return grid;
}

PairedField make_paired_field(const GridPtr& grid, int n) {
  PairedField f;
  f.grid = grid;
  f.n = n;
  f.plus = MatrixField(n, grid->plus.num_nodes);
  f.minus = MatrixField(n, grid->minus.num_nodes);
  f.axes.assign(static_cast<std::size_t>(grid->num_iface) * n, 0.0);
  return f;
}

double dirichlet_energy_phase(const MatrixField& f, const PhaseGrid& g) {
  const std::size_t bs = static_cast<std::size_t>(f.n) * f.n;
  double e = 0.0;
  for (const EdgeRun& run : g.runs)
    e += kernels::weighted_sumsq_diff_blocks(f.a.data() + run.a0 * bs,
                                             f.a.data() + run.b0 * bs, run.w.data(),
                                             run.count, bs);
  return e;
}

double dirichlet_energy(const PairedField& f) {
  return dirichlet_energy_phase(f.plus, f.grid->plus) +
         dirichlet_energy_phase(f.minus, f.grid->minus);
}

bool same_grid(const PairedField& f, const PairedField& g) {
  return f.grid == g.grid || f.grid->spec == g.grid->spec;
}

double l2_distance_sq(const PairedField& f, const PairedField& g) {
  if (!same_grid(f, g) || f.n != g.n)
    fail(Errc::GridMismatch, "l2_distance_sq: fields on different grids");
  const std::size_t bs = static_cast<std::size_t>(f.n) * f.n;
  return kernels::weighted_sumsq_diff_blocks(f.plus.a.data(), g.plus.a.data(),
                                             f.grid->plus.vol_w.data(),
                                             f.grid->plus.num_nodes, bs) +
         kernels::weighted_sumsq_diff_blocks(f.minus.a.data(), g.minus.a.data(),
                                             f.grid->minus.vol_w.data(),
                                             f.grid->minus.num_nodes, bs);
}

double max_orth_residual(const PairedField& f) {
  double r = 0.0;
  for (const MatrixField* mf : {&f.plus, &f.minus})
    for (int i = 0; i < mf->num_nodes; ++i) r = std::max(r, orth_residual(mf->get(i)));
  return r;
}

double max_pair_residual(const PairedField& f) {
  double r = 0.0;
  for (int p = 0; p < f.grid->num_iface; ++p) {
    auto res = minimal_pair_residual(f.plus.get(f.grid->iface_plus[p]),
                                     f.minus.get(f.grid->iface_minus[p]));
    r = std::max(r, res.residual);
  }
  return r;
}

} // namespace orthoflow
