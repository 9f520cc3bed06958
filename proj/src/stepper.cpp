#include "orthoflow/stepper.hpp"

#include <cmath>

#include "orthoflow/kernels.hpp"

namespace orthoflow {

std::pair<Mat, Mat> admissible_direction_project(const Mat& wplus, const Mat& wminus,
                                                 const Vec& axis) {
  Mat d4 = v4_component(wplus - wminus, axis, 1e-8);
  return {wplus - d4 * 0.5, wminus + d4 * 0.5};
}

namespace {

struct IfaceGrad {
  Mat g;        // Riemannian gradient of the shared A+ on Gamma
  Vec axis_g;   // tangential axis gradient
};

// Parameterized gradient: interior nodes carry antisym(A^T E); interface
// pairs carry the (A+, axis) chart gradient. The minus interface nodes are
// derived unknowns and carry no gradient of their own.
struct ChartGradient {
  MatrixField plus, minus;
  std::vector<IfaceGrad> iface;
  double norm_sq = 0.0;
};

double chart_dot(const ChartGradient& a, const ChartGradient& b) {
  double s = kernels::dot(a.plus.a.data(), b.plus.a.data(), a.plus.a.size()) +
             kernels::dot(a.minus.a.data(), b.minus.a.data(), a.minus.a.size());
  for (std::size_t p = 0; p < a.iface.size(); ++p) {
    s += mat_dot(a.iface[p].g, b.iface[p].g);
    s += kernels::dot(a.iface[p].axis_g.data(), b.iface[p].axis_g.data(),
                      a.iface[p].axis_g.size());
  }
  return s;
}

ChartGradient chart_gradient(const PairedField& a, const PairedField& atilde,
                             const VelocityField* v, double h) {
  const int n = a.n;
  MatrixField ep, em;
  euclidean_gradient(a, atilde, v, h, ep, em);
  ChartGradient g;
  g.plus = MatrixField(n, ep.num_nodes);
  g.minus = MatrixField(n, em.num_nodes);

  std::vector<bool> iface_p(ep.num_nodes, false), iface_m(em.num_nodes, false);
  for (int id : a.grid->iface_plus) iface_p[id] = true;
  for (int id : a.grid->iface_minus) iface_m[id] = true;

  std::vector<double> tmp(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < ep.num_nodes; ++i) {
    if (iface_p[i]) continue;
    mtm(n, tmp.data(), a.plus.at(i), ep.at(i));
    antisym_of(n, g.plus.at(i), tmp.data());
  }
  for (int i = 0; i < em.num_nodes; ++i) {
    if (iface_m[i]) continue;
    mtm(n, tmp.data(), a.minus.at(i), em.at(i));
    antisym_of(n, g.minus.at(i), tmp.data());
  }
  g.norm_sq = kernels::sumsq(g.plus.a.data(), g.plus.a.size()) +
              kernels::sumsq(g.minus.a.data(), g.minus.a.size());

  g.iface.resize(a.grid->num_iface);
  for (int p = 0; p < a.grid->num_iface; ++p) {
    const int ip = a.grid->iface_plus[p];
    const int im = a.grid->iface_minus[p];
    const Vec axis = a.axis_vec(p);
    const Mat refl = reflection(axis, 1e-8);
    Mat eplus = ep.get(ip);
    Mat eminus = em.get(im);
    Mat aplus = a.plus.get(ip);
    // d/dW of E(A+ exp(W), A+ exp(W) R): antisym(A+^T (E+ + E- R)).
    Mat combined = eplus + eminus * refl;
    Mat atc(n);
    mtm(n, atc.data(), aplus.data(), combined.data());
    IfaceGrad ig;
    ig.g = atc.antisym();
    // d/dn: -2 (M + M^T) n with M = A+^T E-, projected tangentially.
    Mat m(n);
    mtm(n, m.data(), aplus.data(), eminus.data());
    Vec ag(n, 0.0);
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += (m(i, j) + m(j, i)) * axis[j];
      ag[i] = -2.0 * s;
    }
    const double proj = vdot(ag, axis);
    for (int i = 0; i < n; ++i) ag[i] -= proj * axis[i];
    ig.axis_g = ag;
    g.norm_sq += kernels::sumsq(ig.g.data(), ig.g.size()) + kernels::sumsq(ag.data(), n);
    g.iface[p] = std::move(ig);
  }
  return g;
}

// Applies the chart update with step tau into a reusable buffer; interface
// minus values are rebuilt exactly as A+ R(axis).
void apply_step(const PairedField& a, const ChartGradient& g, double tau,
                PairedField& out) {
  // Every node value and axis is overwritten below, so the buffer only
  // needs the right shape.
  out.grid = a.grid;
  out.n = a.n;
  out.plus.n = a.plus.n;
  out.plus.num_nodes = a.plus.num_nodes;
  out.plus.a.resize(a.plus.a.size());
  out.minus.n = a.minus.n;
  out.minus.num_nodes = a.minus.num_nodes;
  out.minus.a.resize(a.minus.a.size());
  out.axes.resize(a.axes.size());
  const int n = a.n;
  std::vector<bool> iface_p(a.plus.num_nodes, false), iface_m(a.minus.num_nodes, false);
  for (int id : a.grid->iface_plus) iface_p[id] = true;
  for (int id : a.grid->iface_minus) iface_m[id] = true;

  std::vector<double> prod(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < a.plus.num_nodes; ++i) {
    if (iface_p[i]) continue;
    Mat w = g.plus.get(i) * -tau;
    Mat e = exp_antisym(w, 1e-6).mat;
    mm(n, prod.data(), a.plus.at(i), e.data());
    std::copy(prod.begin(), prod.end(), out.plus.at(i));
  }
  for (int i = 0; i < a.minus.num_nodes; ++i) {
    if (iface_m[i]) continue;
    Mat w = g.minus.get(i) * -tau;
    Mat e = exp_antisym(w, 1e-6).mat;
    mm(n, prod.data(), a.minus.at(i), e.data());
    std::copy(prod.begin(), prod.end(), out.minus.at(i));
  }
  for (int p = 0; p < a.grid->num_iface; ++p) {
    const int ip = a.grid->iface_plus[p];
    const int im = a.grid->iface_minus[p];
    Mat w = g.iface[p].g * -tau;
    Mat e = exp_antisym(w, 1e-6).mat;
    mm(n, prod.data(), a.plus.at(ip), e.data());
    std::copy(prod.begin(), prod.end(), out.plus.at(ip));

    Vec axis = a.axis_vec(p);
    for (int i = 0; i < a.n; ++i) axis[i] -= tau * g.iface[p].axis_g[i];
    axis = normalized(axis);
    // Sign continuity with the previous iterate.
    if (vdot(axis, a.axis_vec(p)) < 0.0)
      for (double& x : axis) x = -x;
    std::copy(axis.begin(), axis.end(), out.axis(p));

    Mat aminus = out.plus.get(ip) * reflection(axis, 1e-8);
    out.minus.set(im, aminus);
  }
}

// Snaps all node values back to the manifold and re-derives the interface
// minus values exactly.
void resnap(PairedField& a) {
  for (int i = 0; i < a.plus.num_nodes; ++i)
    a.plus.set(i, nearest_orthogonal(a.plus.get(i)).mat);
  for (int i = 0; i < a.minus.num_nodes; ++i)
    a.minus.set(i, nearest_orthogonal(a.minus.get(i)).mat);
  for (int p = 0; p < a.grid->num_iface; ++p) {
    const int ip = a.grid->iface_plus[p];
    const int im = a.grid->iface_minus[p];
    a.minus.set(im, a.plus.get(ip) * reflection(a.axis_vec(p), 1e-8));
  }
}

} // namespace

StepResult minimize_step(const PairedField& atilde, const VelocityField* v, double h,
                         const StepConfig& cfg) {
  if (h <= 0.0) fail(Errc::InvalidArgument, "minimize_step: h must be positive");
  if (max_orth_residual(atilde) > 1e-8)
    fail(Errc::InfeasibleWarmStart, "warm start is not manifold-valid");
  if (max_pair_residual(atilde) > cfg.tol_pair)
    fail(Errc::InfeasibleWarmStart, "warm start violates the minimal-pair condition");

  StepResult res;
  res.field = atilde;
  // Re-derive the interface exactly in the chart so the parameterization
  // invariant holds bit-exactly from the start.
  for (int p = 0; p < atilde.grid->num_iface; ++p) {
    const int ip = atilde.grid->iface_plus[p];
    const int im = atilde.grid->iface_minus[p];
    res.field.minus.set(im, res.field.plus.get(ip) * reflection(res.field.axis_vec(p), 1e-8));
  }
  res.energy_before = energy(res.field, atilde, v, h);
  EnergyBreakdown cur = res.energy_before;

  const double tau_start = cfg.tau0 > 0.0 ? cfg.tau0 : 0.5 * h;
  double tau = tau_start;
  const double tau_cap = 100.0 * tau_start;
  PairedField cand;  // line-search buffer, reused across iterations
  int floor_hits = 0;  // consecutive accepted decreases at rounding scale
  ChartGradient gprev;
  double t_accepted = 0.0;  // step of the previous accepted update

  for (int it = 0; it < cfg.max_iters; ++it) {
    ChartGradient g = chart_gradient(res.field, atilde, v, h);
    res.final_grad_norm = std::sqrt(g.norm_sq);
    if (res.final_grad_norm <= cfg.tol_grad) {
      res.converged = true;
      break;
    }
    // Barzilai-Borwein trial step from the previous accepted move
    // (s = -t G_prev, y = G - G_prev), Armijo-safeguarded below.
    if (t_accepted > 0.0) {
      const double sy = t_accepted * (gprev.norm_sq - chart_dot(gprev, g));
      const double ss = t_accepted * t_accepted * gprev.norm_sq;
      if (sy > 1e-300) tau = std::min(std::max(ss / sy, 1e-4 * tau_start), tau_cap);
    }
    bool accepted = false;
    double t = std::min(tau, tau_cap);
    double min_delta = 1e300;
    for (int half = 0; half < 60; ++half) {
      apply_step(res.field, g, t, cand);
      EnergyBreakdown cen = energy(cand, atilde, v, h);
      min_delta = std::min(min_delta, cen.total - cur.total);
      if (cen.total <= cur.total - cfg.armijo_c * t * g.norm_sq) {
        std::swap(res.field, cand);
        if (cur.total - cen.total <= 64.0 * 2.3e-16 * (std::abs(cur.total) + 1e-12))
          ++floor_hits;
        else
          floor_hits = 0;
        cur = cen;
        accepted = true;
        res.descent_accepted = true;
        t_accepted = t;
        break;
      }
      t *= cfg.beta;
    }
    gprev = std::move(g);
    if (floor_hits >= 3) {
      // Progress is indistinguishable from rounding jitter: converged at
      // the floating-point floor.
      res.converged = true;
      break;
    }
    res.iterations = it + 1;
    if (!accepted) {
      // All trial energies within rounding distance of the current one:
      // the search hit the floating-point floor, not genuine stagnation.
      if (std::abs(min_delta) <= 64.0 * 2.3e-16 * (std::abs(cur.total) + 1e-12)) {
        res.converged = true;
        break;
      }
      fail(Errc::LineSearchStagnation,
           "line search failed after 60 halvings at iteration " + std::to_string(it) +
               ", grad norm " + std::to_string(res.final_grad_norm));
    }
    if (cfg.reorthogonalize_every > 0 && (it + 1) % cfg.reorthogonalize_every == 0) {
      resnap(res.field);
      cur = energy(res.field, atilde, v, h);
    }
  }
  if (!res.converged) {
    ChartGradient g = chart_gradient(res.field, atilde, v, h);
    res.final_grad_norm = std::sqrt(g.norm_sq);
  }
  resnap(res.field);
  res.energy_after = energy(res.field, atilde, v, h);
  // The warm start is feasible, so the accepted energy can never exceed it;
  // the final snap perturbs at rounding level only.
  if (res.energy_after.total > res.energy_before.total) {
    res.field = atilde;
    res.energy_after = res.energy_before;
  }
  return res;
}

} // namespace orthoflow
