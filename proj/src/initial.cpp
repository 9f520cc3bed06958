#include <cmath>
#include <numbers>

#include "orthoflow/grid.hpp"
#include "orthoflow/rng.hpp"

namespace orthoflow {

namespace {

constexpr double kPi = std::numbers::pi;

struct WaveSet {
  std::vector<Mat> dirs;        // antisymmetric directions, unit Frobenius
  std::vector<double> amp;
  std::vector<double> k1, k2;   // wave numbers (k2 integer-valued for theta)
  std::vector<double> ph1, ph2;
};

WaveSet draw_waves(int n, int modes, double amplitude, double decay, bool periodic_second,
                   Rng& rng) {
  WaveSet w;
  for (int k = 1; k <= modes; ++k) {
    Mat g = random_antisym(n, rng);
    const double nrm = frob(g);
    if (nrm > 1e-12) g *= 1.0 / nrm;
    w.dirs.push_back(g);
    w.amp.push_back(amplitude * std::pow(static_cast<double>(k), -decay) *
                    rng.uniform(0.5, 1.0));
    w.k1.push_back(static_cast<double>(k));
    w.k2.push_back(static_cast<double>(periodic_second ? rng.uniform_int(modes + 1)
                                                       : rng.uniform_int(modes) + 1));
    w.ph1.push_back(rng.uniform(0.0, 2.0 * kPi));
    w.ph2.push_back(rng.uniform(0.0, 2.0 * kPi));
  }
  return w;
}

// Smooth scalar profile of wave k at normalized coordinates (u, v); v is an
// angle when the geometry is periodic in the second direction.
double wave_value(const WaveSet& w, std::size_t k, double u, double v, bool periodic_second,
                  int dim) {
  double f = std::cos(kPi * w.k1[k] * u + w.ph1[k]);
  if (dim == 2) f *= periodic_second ? std::cos(w.k2[k] * v + w.ph2[k])
                                     : std::cos(kPi * w.k2[k] * v + w.ph2[k]);
  return f;
}

// Normalized in-phase coordinates (u = span across the phase in the normal
// direction, v = tangential), both in [0,1] except the polar angle.
void node_uv(const TwoPhaseGrid& grid, const PhaseGrid& g, int node, double& u, double& v,
             bool& periodic) {
  periodic = grid.spec.geom == Geometry::PolarDisk;
  const int j = node / g.n_tangent;
  const int i = node % g.n_tangent;
  u = (g.n_normal > 1) ? static_cast<double>(j) / (g.n_normal - 1) : 0.0;
  switch (grid.spec.geom) {
    case Geometry::FlatBox1D: v = 0.0; break;
    case Geometry::FlatBox2D: v = static_cast<double>(i) / (g.n_tangent - 1); break;
    case Geometry::PolarDisk: v = g.coords[2 * node + 1]; break;
  }
}

// Distance from the interface normalized to [0,1] inside the minus phase.
double minus_iface_dist(const TwoPhaseGrid& grid, int node) {
  const PhaseGrid& g = grid.minus;
  const int j = node / g.n_tangent;
  return (g.n_normal > 1) ? static_cast<double>(j) / (g.n_normal - 1) : 0.0;
}

} // namespace

PairedField make_initial(const GridPtr& grid, int n, const InitialRecipe& recipe) {
  PairedField f = make_paired_field(grid, n);

  if (recipe.kind == InitialRecipe::Kind::UserFile)
    return read_paired_snapshot(recipe.path_prefix, grid);

  if (recipe.kind == InitialRecipe::Kind::ConstantPair) {
    Mat id = Mat::identity(n);
    Vec e1(n, 0.0);
    e1[0] = 1.0;
    Mat refl = reflection(e1);
    for (int i = 0; i < grid->plus.num_nodes; ++i) f.plus.set(i, id);
    for (int i = 0; i < grid->minus.num_nodes; ++i) f.minus.set(i, refl);
    for (int p = 0; p < grid->num_iface; ++p)
      std::copy(e1.begin(), e1.end(), f.axis(p));
    return f;
  }

  // SmoothRandom. Substreams: 1 = plus field, 2 = axis field, 3 = minus field.
  Rng rng_plus = Rng::split(recipe.seed, 1);
  Rng rng_axis = Rng::split(recipe.seed, 2);
  Rng rng_minus = Rng::split(recipe.seed, 3);
  const bool polar = grid->spec.geom == Geometry::PolarDisk;

  WaveSet wp = draw_waves(n, recipe.modes, recipe.amplitude, recipe.decay, polar, rng_plus);
  for (int i = 0; i < grid->plus.num_nodes; ++i) {
    double u, v;
    bool per;
    node_uv(*grid, grid->plus, i, u, v, per);
    Mat w = Mat::zero(n);
    for (std::size_t k = 0; k < wp.dirs.size(); ++k)
      w += wp.dirs[k] * (wp.amp[k] * wave_value(wp, k, u, v, per, grid->dim));
    f.plus.set(i, exp_antisym(w).mat);
  }

  // Unit axis field on Gamma: e1 tilted by a smooth tangential perturbation.
  std::vector<double> axwave_k(n), axwave_ph(n), axwave_amp(n);
  for (int c = 0; c < n; ++c) {
    axwave_k[c] = polar ? rng_axis.uniform_int(recipe.modes + 1)
                        : rng_axis.uniform_int(recipe.modes) + 1;
    axwave_ph[c] = rng_axis.uniform(0.0, 2.0 * kPi);
    axwave_amp[c] = recipe.amplitude * rng_axis.uniform(0.3, 1.0);
  }
  for (int p = 0; p < grid->num_iface; ++p) {
    double gam = 0.0;  // tangential coordinate along Gamma
    if (grid->spec.geom == Geometry::FlatBox2D)
      gam = static_cast<double>(p) / std::max(1, grid->num_iface - 1);
    else if (polar)
      gam = grid->plus.coords[2 * grid->iface_plus[p] + 1];
    Vec ax(n, 0.0);
    ax[0] = 1.0;
    for (int c = 0; c < n; ++c)
      ax[c] += axwave_amp[c] * (polar ? std::cos(axwave_k[c] * gam + axwave_ph[c])
                                      : std::cos(kPi * axwave_k[c] * gam + axwave_ph[c]));
    ax = normalized(ax);
    std::copy(ax.begin(), ax.end(), f.axis(p));
  }

  // Interface trace of the minus phase, exact minimal pair by construction.
  std::vector<Mat> trace;
  trace.reserve(grid->num_iface);
  for (int p = 0; p < grid->num_iface; ++p)
    trace.push_back(f.plus.get(grid->iface_plus[p]) * reflection(f.axis_vec(p)));

  // Extend into the minus phase: exp of a field vanishing on Gamma times the
  // trace along the matching tangential index.
  WaveSet wm = draw_waves(n, recipe.modes, recipe.amplitude, recipe.decay, polar, rng_minus);
  for (int i = 0; i < grid->minus.num_nodes; ++i) {
    double u, v;
    bool per;
    node_uv(*grid, grid->minus, i, u, v, per);
    const double dist = minus_iface_dist(*grid, i);
    Mat w = Mat::zero(n);
    for (std::size_t k = 0; k < wm.dirs.size(); ++k)
      w += wm.dirs[k] * (dist * wm.amp[k] * wave_value(wm, k, u, v, per, grid->dim));
    const int itan = i % grid->minus.n_tangent;
    // Pair p <-> tangential index: FlatBox pairs are enumerated by the
    // tangential index; PolarDisk likewise (pair p sits at theta_p).
    const int p = grid->num_iface == 1 ? 0 : itan;
    f.minus.set(i, exp_antisym(w).mat * trace[p]);
  }
  return f;
}

} // namespace orthoflow
