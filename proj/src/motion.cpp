#include "orthoflow/motion.hpp"

#include <cmath>
#include <limits>

namespace orthoflow {

double InterfaceMotion::lifespan() const {
  if (kind == MotionKind::ShrinkingCircle) return 0.5 * r0 * r0;
  return std::numeric_limits<double>::infinity();
}

double InterfaceMotion::interface_pos(double t) const {
  switch (kind) {
    case MotionKind::Stationary: return 0.0;
    case MotionKind::ShrinkingCircle: return std::sqrt(r0 * r0 - 2.0 * t);
    case MotionKind::PrescribedPoint1D: return s0 + s_amp * std::sin(s_omega * t);
  }
  return 0.0;
}

double InterfaceMotion::interface_vel(double t) const {
  switch (kind) {
    case MotionKind::Stationary: return 0.0;
    case MotionKind::ShrinkingCircle: return -1.0 / interface_pos(t);
    case MotionKind::PrescribedPoint1D: return s_amp * s_omega * std::cos(s_omega * t);
  }
  return 0.0;
}

double InterfaceMotion::interface_acc(double t) const {
  switch (kind) {
    case MotionKind::Stationary: return 0.0;
    case MotionKind::ShrinkingCircle: {
      const double p = interface_pos(t);
      return -1.0 / (p * p * p);
    }
    case MotionKind::PrescribedPoint1D:
      return -s_amp * s_omega * s_omega * std::sin(s_omega * t);
  }
  return 0.0;
}

double InterfaceMotion::curvature(double t) const {
  if (kind == MotionKind::ShrinkingCircle) return 1.0 / interface_pos(t);
  return 0.0;
}

double InterfaceMotion::normal_speed(double t) const {
  if (kind == MotionKind::ShrinkingCircle) return -interface_vel(t);  // inward-positive
  if (kind == MotionKind::PrescribedPoint1D) return interface_vel(t);
  return 0.0;
}

namespace {

// Quintic smoothstep and derivatives: q(0)=0, q(1)=1, q'=q''=0 at both ends.
inline double q5(double u) { return u * u * u * (10.0 + u * (-15.0 + 6.0 * u)); }
inline double q5p(double u) { return u * u * (30.0 + u * (-60.0 + 30.0 * u)); }
inline double q5pp(double u) { return u * (60.0 + u * (-180.0 + 120.0 * u)); }
inline double q5ppp(double u) { return 60.0 + u * (-360.0 + 180.0 * u); }

struct Bump {
  double w, w1;
  // B, B', B'', B''' at signed offset u from the band center.
  void eval(double u, double& b, double& bp, double& bpp, double& bppp) const {
    const double a = std::abs(u);
    if (a >= w) {
      b = bp = bpp = bppp = 0.0;
      return;
    }
    if (a <= w1) {
      b = 1.0;
      bp = bpp = bppp = 0.0;
      return;
    }
    const double inv = 1.0 / (w - w1);
    const double s = (w - a) * inv;  // in (0,1)
    b = q5(s);
    double d1 = -q5p(s) * inv;             // dB/da
    double d2 = q5pp(s) * inv * inv;       // d2B/da2
    double d3 = -q5ppp(s) * inv * inv * inv;
    const double sign = u >= 0 ? 1.0 : -1.0;
    bp = sign * d1;
    bpp = d2;
    bppp = sign * d3;
  }
};

constexpr double kEdgeGap = 0.01;  // band kept this far inside the domain

} // namespace

DiffeoFamily::Band DiffeoFamily::band_for(int m) const {
  if (motion_.kind == MotionKind::Stationary) return {0.0, 0.0};
  const double t0 = m * h_, t1 = (m + 1) * h_;
  const double plo = std::min(motion_.interface_pos(t0), motion_.interface_pos(t1));
  const double phi = std::max(motion_.interface_pos(t0), motion_.interface_pos(t1));
  const double scale = motion_.kind == MotionKind::ShrinkingCircle ? motion_.r0 : 1.0;
  double w = 0.2 * scale;
  w = std::min(w, plo - core_ - kEdgeGap);
  w = std::min(w, outer_ - phi - kEdgeGap);
  if (w <= 0.0)
    fail(Errc::GeometryError, "diffeo band does not fit between the interface and the domain edge");
  // Plateau-free bump: q5 reaches 1 with vanishing first and second
  // derivatives at the peak, so the interface still carries B = 1, B' = 0
  // exactly while the transition stays as gentle as possible.
  return {w, 0.0};
}

DiffeoFamily::DiffeoFamily(const InterfaceMotion& motion, double h, double T,
                           double core_bound, double outer_bound, double margin)
    : motion_(motion), h_(h), T_(T), core_(core_bound), outer_(outer_bound) {
  if (h <= 0.0 || T <= 0.0) fail(Errc::InvalidArgument, "DiffeoFamily: need h, T > 0");
  const double t0 = motion.lifespan();
  if (std::isfinite(t0) && T >= t0 * (1.0 - margin))
    fail(Errc::LifespanExceeded,
         "T = " + std::to_string(T) + " exceeds lifespan margin; T0 = " + std::to_string(t0));
  nsteps_ = static_cast<int>(std::lround(T / h));
  if (std::abs(nsteps_ * h - T) > 1e-9 * std::max(1.0, T))
    fail(Errc::InvalidArgument, "DiffeoFamily: T must be an integer multiple of h");

  if (motion.kind != MotionKind::Stationary) {
    // h0 guard: |Delta| * max|B'| <= 0.5 on every slab.
    for (int m = 0; m < nsteps_; ++m) {
      const Band bd = band_for(m);
      const double delta =
          std::abs(motion.interface_pos(m * h_) - motion.interface_pos((m + 1) * h_));
      const double bpmax = (15.0 / 8.0) / (bd.w - bd.w1);
      if (delta * bpmax > 0.5)
        fail(Errc::StepTooLarge,
             "step h = " + std::to_string(h) + " violates ||DPhi - I|| <= 0.5 at slab " +
                 std::to_string(m));
    }
  }
}

DiffeoDerivs DiffeoFamily::eval(int m, double c, double t) const {
  DiffeoDerivs d{c, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  if (motion_.kind == MotionKind::Stationary) return d;
  const double tm = m * h_;
  const double p = motion_.interface_pos(t);
  const double pm = motion_.interface_pos(tm);
  const double pv = motion_.interface_vel(t);
  const double pa = motion_.interface_acc(t);
  const double delta = pm - p;
  const Band bd = band_for(m);
  Bump bump{bd.w, bd.w1};
  double b, bp, bpp, bppp;
  bump.eval(c - p, b, bp, bpp, bppp);

  d.rho = c + delta * b;
  d.d_c = 1.0 + delta * bp;
  d.d_cc = delta * bpp;
  // d/dt at fixed c: delta' = -pv, dB/dt = -pv * B'.
  d.d_t = -pv * (b + delta * bp);
  d.d_ct = -pv * (bp + delta * bpp);
  // Second time derivative (band center moves with p(t)).
  d.d_tt = -pa * (b + delta * bp) + pv * pv * (2.0 * bp + delta * bpp);
  d.d_ctt = -pa * (bp + delta * bpp) + pv * pv * (2.0 * bpp + delta * bppp);
  return d;
}

double DiffeoFamily::map_normal_inverse(int m, double y, double t) const {
  if (motion_.kind == MotionKind::Stationary) return y;
  double lo = core_, hi = outer_;
  double s = y;  // good initial guess: the map is a near-identity
  for (int it = 0; it < 100; ++it) {
    const DiffeoDerivs d = eval(m, s, t);
    const double f = d.rho - y;
    if (std::abs(f) < 1e-15 * std::max(1.0, std::abs(y))) return s;
    if (f > 0.0)
      hi = s;
    else
      lo = s;
    double step = f / d.d_c;
    double snew = s - step;
    if (!(snew > lo && snew < hi)) snew = 0.5 * (lo + hi);
    s = snew;
  }
  return s;
}

double DiffeoFamily::map_bar_normal(int m, double c, double t) const {
  const double anchor = map_normal(m, c, t);
  return map_normal_inverse(m, anchor, (m + 1) * h_);
}

double DiffeoFamily::d_map_bar_dnormal(int m, double c, double t) const {
  const double sbar = map_bar_normal(m, c, t);
  return eval(m, c, t).d_c / eval(m, sbar, (m + 1) * h_).d_c;
}

double DiffeoFamily::velocity_normal(int m, double c) const {
  return eval(m, c, (m + 1) * h_).d_t;
}

Mat DiffeoFamily::dphi_cartesian(int m, const double* coord, double t, int dim) const {
  if (dim == 1) {
    Mat d(2);  // report as 2x2 with trivial second direction for uniformity
    d(0, 0) = eval(m, coord[0], t).d_c;
    d(1, 1) = 1.0;
    return d;
  }
  const double r = coord[0], th = coord[1];
  const DiffeoDerivs dd = eval(m, r, t);
  const double g = dd.rho / r;
  const double xh[2] = {std::cos(th), std::sin(th)};
  Mat d(2);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      d(a, b) = g * ((a == b ? 1.0 : 0.0) - xh[a] * xh[b]) + dd.d_c * xh[a] * xh[b];
  return d;
}

double DiffeoFamily::jacobian(int m, double c, double t, int dim) const {
  const DiffeoDerivs d = eval(m, c, t);
  if (dim == 1) return d.d_c;
  return (d.rho / c) * d.d_c;
}

double DiffeoFamily::jacobian_bar(int m, double c, double t, int dim) const {
  const double sbar = map_bar_normal(m, c, t);
  const double dbar = d_map_bar_dnormal(m, c, t);
  if (dim == 1) return dbar;
  return (sbar / c) * dbar;
}

double DiffeoFamily::d2phi_max_abs(int m, const double* coord, double t, int dim) const {
  if (dim == 1) return std::abs(eval(m, coord[0], t).d_cc);
  // Radial map Phi = x g(|x|):
  //   d_c d_b Phi_a = g'(xh_c dab + xh_b dac + xh_a dbc)
  //                 + (rho'' - 3 g') xh_a xh_b xh_c.
  const double r = coord[0], th = coord[1];
  const DiffeoDerivs dd = eval(m, r, t);
  const double g = dd.rho / r;
  const double gp = (dd.d_c - g) / r;
  const double xh[2] = {std::cos(th), std::sin(th)};
  double mx = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int cdir = 0; cdir < 2; ++cdir) {
        const double dab = a == b ? 1.0 : 0.0;
        const double dac = a == cdir ? 1.0 : 0.0;
        const double dbc = b == cdir ? 1.0 : 0.0;
        const double v = gp * (xh[cdir] * dab + xh[b] * dac + xh[a] * dbc) +
                         (dd.d_cc - 3.0 * gp) * xh[a] * xh[b] * xh[cdir];
        mx = std::max(mx, std::abs(v));
      }
  return mx;
}

double DiffeoFamily::dt_derivs_max_abs(int m, const double* coord, double t, int dim) const {
  const double c = dim == 1 ? coord[0] : coord[0];
  const DiffeoDerivs dd = eval(m, c, t);
  double mx = std::max(std::abs(dd.d_t), std::abs(dd.d_tt));
  if (dim == 1) {
    mx = std::max(mx, std::abs(dd.d_ct));
    mx = std::max(mx, std::abs(dd.d_ctt));
    return mx;
  }
  // Cartesian mixed derivatives of the radial map x * (rho/s): the time
  // derivative of DPhi has entries (d_t rho / s)(dab - xh xh) + d_ct xh xh.
  const double gt = dd.d_t / c;
  const double gtt = dd.d_tt / c;
  mx = std::max({mx, std::abs(gt), std::abs(dd.d_ct), std::abs(gtt), std::abs(dd.d_ctt)});
  return mx;
}

DiffeoBoundsReport DiffeoFamily::verify_bounds(int dim, int samples_per_slab,
                                               int samples_normal, double c0_cap) const {
  DiffeoBoundsReport rep;
  rep.h = h_;
  const Mat eye = Mat::identity(2);
  for (int m = 0; m < nsteps_; ++m) {
    for (int it = 1; it <= samples_per_slab; ++it) {
      const double t = m * h_ + h_ * it / samples_per_slab;
      for (int ic = 0; ic <= samples_normal; ++ic) {
        const double c = core_ + (outer_ - core_) * ic / samples_normal;
        const double coord[2] = {c, 0.37};  // radial maps: any angle is representative
        const Mat dphi = dphi_cartesian(m, coord, t, dim);
        const double dev = frob_dist(dphi, eye);
        rep.c0 = std::max(rep.c0, dev / h_);
        rep.c1 = std::max(rep.c1, dt_derivs_max_abs(m, coord, t, dim));
        rep.c2 = std::max(rep.c2, d2phi_max_abs(m, coord, t, dim));
        rep.jac_dev = std::max(rep.jac_dev, std::abs(jacobian(m, c, t, dim) - 1.0));
        if (dev / h_ > c0_cap && rep.ok) {
          rep.ok = false;
          rep.violation = "||DPhi-I||/h = " + std::to_string(dev / h_) + " at (m=" +
                          std::to_string(m) + ", t=" + std::to_string(t) +
                          ", c=" + std::to_string(c) + ")";
        }
      }
    }
  }
  if (!rep.ok) fail(Errc::BoundViolation, "verify_bounds: " + rep.violation);
  return rep;
}

} // namespace orthoflow
