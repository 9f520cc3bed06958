#pragma once

#include <string>

#include "orthoflow/grid.hpp"

// Interface motion in time and the per-slab diffeomorphism families
// identifying the moving domains with their step-anchor snapshots.
//
// For slab m (time t in (mh,(m+1)h]) the map Phi_h^m(.,t): Omega(t) ->
// Omega(mh) moves only the normal coordinate c (radius for PolarDisk, x for
// the 1D box):
//
//     rho(c,t) = c + (p(t_m) - p(t)) * B(c - p(t)),
//
// where p(t) is the interface position and B is a C^2 bump, identically 1
// at the interface and 0 near the core/outer boundary. The interface circle
// maps exactly onto the anchor interface, the map is the identity where
// B = 0, and the left-limit time derivative at the slab end equals the
// instantaneous interface velocity on the interface.

namespace orthoflow {

enum class MotionKind { Stationary, ShrinkingCircle, PrescribedPoint1D };

struct InterfaceMotion {
  MotionKind kind = MotionKind::Stationary;
  double r0 = 0.8;  // ShrinkingCircle initial radius
  // PrescribedPoint1D: s(t) = s0 + s_amp * sin(s_omega * t); kappa = 0.
  double s0 = 0.0;
  double s_amp = 0.0;
  double s_omega = 1.0;

  bool is_mcf() const { return kind != MotionKind::PrescribedPoint1D; }
  double lifespan() const;             // T0 (infinity for non-circle motions)
  double interface_pos(double t) const;
  double interface_vel(double t) const;    // d(pos)/dt
  double interface_acc(double t) const;
  double curvature(double t) const;        // kappa(t)
  double normal_speed(double t) const;     // V(t), inward-positive for MCF
};

struct DiffeoDerivs {
  double rho;     // mapped normal coordinate
  double d_c;     // d rho / dc
  double d_cc;    // d2 rho / dc2
  double d_t;     // d rho / dt
  double d_tt;
  double d_ct;    // d2 rho / (dc dt)
  double d_ctt;   // d3 rho / (dc dt2)
};

struct DiffeoBoundsReport {
  double c0 = 0.0;       // sup ||DPhi - I|| / h
  double c1 = 0.0;       // sup over l=1,2 of t-derivatives (incl. mixed)
  double c2 = 0.0;       // sup of second spatial derivatives
  double jac_dev = 0.0;  // sup |J - 1|
  double h = 0.0;
  bool ok = true;
  std::string violation;  // offending (m, t, c) when a cap is exceeded
};

class DiffeoFamily {
 public:
  // Validates T against the motion lifespan (margin fraction of T0) and h
  // against the largest step keeping ||DPhi - I|| <= 0.5.
  DiffeoFamily(const InterfaceMotion& motion, double h, double T,
               double core_bound, double outer_bound, double margin = 0.1);

  const InterfaceMotion& motion() const { return motion_; }
  int num_steps() const { return nsteps_; }
  double h() const { return h_; }
  double core_bound() const { return core_; }
  double outer_bound() const { return outer_; }

  // Scalar radial/1D profile of Phi_h^m(.,t) with all derivatives.
  DiffeoDerivs eval(int m, double c, double t) const;
  double map_normal(int m, double c, double t) const { return eval(m, c, t).rho; }
  double map_normal_inverse(int m, double y, double t) const;

  // Composed map PhiBar: Omega(t) -> Omega((m+1)h).
  double map_bar_normal(int m, double c, double t) const;
  double d_map_bar_dnormal(int m, double c, double t) const;

  // Left-limit velocity at the slab end, normal component at coordinate c
  // of the (m+1)h anchor domain (tangential component is identically 0).
  double velocity_normal(int m, double c) const;

  // Cartesian derivative data at a point of Omega(t) given in grid
  // coordinates (r,theta) for polar or (x) in 1D. dim = 1 or 2.
  Mat dphi_cartesian(int m, const double* coord, double t, int dim) const;
  double jacobian(int m, double c, double t, int dim) const;
  double jacobian_bar(int m, double c, double t, int dim) const;
  double d2phi_max_abs(int m, const double* coord, double t, int dim) const;
  // Max abs entry among d/dt^l of DPhi for l = 1, 2 plus |dtPhi|, |dttPhi|.
  double dt_derivs_max_abs(int m, const double* coord, double t, int dim) const;

  DiffeoBoundsReport verify_bounds(int dim, int samples_per_slab = 8,
                                   int samples_normal = 64,
                                   double c0_cap = 1e6) const;

 private:
  struct Band {
    double w = 0.0;   // support half-width
    double w1 = 0.0;  // plateau half-width
  };
  Band band_for(int m) const;

  InterfaceMotion motion_;
  double h_ = 0.0;
  double T_ = 0.0;
  double core_ = 0.0;
  double outer_ = 1.0;
  int nsteps_ = 0;
};

} // namespace orthoflow
