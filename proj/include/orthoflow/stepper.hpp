#pragma once

#include "orthoflow/functional.hpp"

// One minimizing-movement step: constrained Riemannian descent over the
// discrete admissible set. Interior nodes move on O(n) via A <- A exp(-tau G);
// each interface pair is parameterized exactly by (A+ on Gamma, unit axis)
// with A- := A+ (I - 2 n(x)n), so the minimal-pair constraint holds to
// machine precision throughout and admissible variations are precisely the
// tangent directions of the parameterization.

namespace orthoflow {

struct StepConfig {
  int max_iters = 800;
  double tol_grad = 1e-7;
  double tau0 = -1.0;  // < 0 selects the default 0.5*h
  double beta = 0.5;
  double armijo_c = 1e-4;
  int reorthogonalize_every = 25;
  double tol_pair = 1e-8;  // warm-start feasibility tolerance
};

struct StepResult {
  PairedField field;
  int iterations = 0;
  double final_grad_norm = 0.0;
  EnergyBreakdown energy_before, energy_after;
  bool descent_accepted = false;
  bool converged = false;
};

StepResult minimize_step(const PairedField& atilde, const VelocityField* v, double h,
                         const StepConfig& cfg);

// Projects the pair difference onto the orthogonal complement of V4,
// splitting the correction equally between the two sides.
std::pair<Mat, Mat> admissible_direction_project(const Mat& wplus, const Mat& wminus,
                                                 const Vec& axis);

} // namespace orthoflow
