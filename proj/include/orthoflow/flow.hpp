#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "orthoflow/motion.hpp"
#include "orthoflow/stepper.hpp"

// Time marching for both constructions: the fixed-interface loop (one grid,
// V absent) and the moving-interface loop (re-gridded domain per step, warm
// start pulled back through the analytic diffeomorphisms, velocity term
// active). Also the three interpolants and the residual diagnostics
// evaluated on the trajectory.

namespace orthoflow {

struct FlowConfig {
  double T = 0.1;
  int N = 16;
  double lambda = 0.9;
  int n = 2;
  GridSpec grid;
  InterfaceMotion motion;
  StepConfig step;
  int el_interior_nodes = 4;  // EL testset size per step
  int el_iface_pairs = 2;

  double h() const { return T / N; }
};

struct FlowStepRecord {
  int m = 0;        // produced iterate index (1-based)
  double t = 0.0;   // t_m of the produced iterate
  double dirichlet_plus = 0.0, dirichlet_minus = 0.0;
  double total_energy = 0.0;        // E_h at the accepted minimizer
  double kinetic_increment = 0.0;   // h ||(A^{m} - At^{m-1})/h||^2
  double orth_residual_max = 0.0;
  double pair_residual_max = 0.0;
  double el_residual = 0.0;
  double c_tilde_running = 0.0;
  double jac_dev_max = 0.0;
  double transfer_error = 0.0;      // moving case: manifold snap distance
  int iterations = 0;
  double grad_norm = 0.0;
};

struct FlowTrace {
  double T = 0.0, h = 0.0;
  int N = 0;
  double initial_dirichlet = 0.0;
  std::vector<FlowStepRecord> steps;
  double c_tilde = 0.0;
  double kinetic_sum = 0.0;
  double sup_dirichlet = 0.0;       // over m >= 1
  double final_dirichlet = 0.0;
  double initial_attach_C = 0.0;    // max_m ||Abar(t)-A0||^2 / ((t+h) D0)
  bool dirichlet_monotone = true;   // fixed case
  // max over j of [sum_{m<j} kinetic_m + D_j] - D_0 (telescoped energy
  // inequality; <= 0 up to rounding in the fixed case).
  double energy_telescope_slack = 0.0;

  void write_csv(const std::string& path) const;
};

struct FlowResult {
  FlowConfig cfg;
  std::vector<GridPtr> grids;            // per iterate (shared object when fixed)
  std::vector<PairedField> iterates;     // A^0 .. A^N
  std::vector<PairedField> warm_starts;  // At^m used to produce A^{m+1}
  std::vector<VelocityField> velocities; // moving case, one per step
  std::shared_ptr<DiffeoFamily> diffeos; // null for fixed runs
  FlowTrace trace;

  bool moving() const { return diffeos != nullptr; }
};

FlowResult run_fixed(const PairedField& a0, const FlowConfig& cfg);
FlowResult run_moving(const PairedField& a0, const FlowConfig& cfg);

enum class Interp { Linear, Constant, Lambda };

// Evaluates an interpolant at time t in [0, T] at the point of Omega(t)
// addressed by (phase, tangential node index, normal coordinate). Linear
// and Lambda are chord interpolants; Constant is snapped to the manifold.
Mat evaluate_interpolant(const FlowResult& fr, Interp which, Phase ph, int tangential,
                         double normal_coord, double t);

// Space-time integral of ||A_linear - A_constant||^2 over all slabs
// (2-point Gauss in time, anchor-grid quadrature in space).
double interpolant_gap_sq(const FlowResult& fr);

struct LambdaPairStats {
  double fraction_exact = 0.0;       // of space-time interface samples
  double max_offplateau_residual = 0.0;
  double max_chord_delta = 0.0;      // max ||A^{m+1}-A^m|| over iface nodes
};
LambdaPairStats lambda_pair_statistics(const FlowResult& fr, double lambda,
                                       int samples_per_slab = 64);

// Initial-data attachment: max over iterates of
// ||Abar(t) - A0||^2_{L2} / ((t+h) * dirichlet(A0)), with the moving case
// compared along the Lagrangian pullback to time 0.
double initial_attachment_constant(const FlowResult& fr);

// ---------------------------------------------------------------- weak forms

// Analytic space-time test field: temporal hat times a spatial bump times a
// constant antisymmetric direction per phase. Interface-supported fields
// use a common direction so (Psi+ - Psi-) = 0 on Gamma (admissible for any
// axis); interior fields vanish near Gamma.
struct WeakTestField {
  double t0 = 0.0, t1 = 0.0;   // temporal hat support
  double center_n = 0.0;       // bump center, normal coordinate
  double halfw_n = 0.0;        // bump half-width, normal direction
  double center_t = 0.0;       // tangential center (angle for polar)
  double halfw_t = 0.0;        // tangential half-width (<=0: constant in tangent)
  Mat dir;                     // antisymmetric direction (both phases)
  bool plus_only = false;      // restrict support to one phase
  bool minus_only = false;

  double scalar(const TwoPhaseGrid& g, Phase ph, const double* coord, double t) const;
  void scalar_grad(const TwoPhaseGrid& g, Phase ph, const double* coord, double t,
                   double* grad_out) const;  // physical components
};

std::vector<WeakTestField> make_weak_test_library(const FlowConfig& cfg, int n,
                                                  std::uint64_t seed, int count);

// | sum_phases int int ( dtA A^T : Psi + grad A A^T : grad Psi ) | with the
// linear interpolant's time derivative and the constant interpolant's
// spatial gradient (edge-based), assembled on the anchor grids with the
// diffeomorphism change of variables in the moving case.
double weak_neumann_residual(const FlowResult& fr, const WeakTestField& psi);

// Frobenius norm of the matrix-valued interior weak-form residual
// int int ( dtA Phi + grad A grad Phi + grad A A^T grad A Phi ) for a
// scalar bump Phi times the identity-free matrix direction.
double weak_interior_residual(const FlowResult& fr, const WeakTestField& phi);

} // namespace orthoflow
