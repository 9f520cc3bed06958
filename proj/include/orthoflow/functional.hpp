#pragma once

#include <cstdint>
#include <utility>

#include "orthoflow/grid.hpp"
#include "orthoflow/vsplit.hpp"

// The discrete step energy
//
//   E_h(V, At; A) = sum_phases [ ||grad A||^2 + h^-1 ||A - At||^2
//                                + 2 (V . grad At) : (A - At) ]
//
// with edge quadrature for the gradient term, volume weights for the rest,
// and centered differences (one-sided at boundaries) for V . grad At.
// Absent V is the convention E_h(At; A) and produces bit-identical values
// to V = 0.

namespace orthoflow {

struct EnergyBreakdown {
  double dirichlet = 0.0;
  double proximity = 0.0;
  double transport = 0.0;
  double total = 0.0;
};

// Per-node velocity vectors in the grid coordinate frame (physical
// components: (x) for 1D, (x1,x2) for the box, (radial, tangential) for the
// polar disk), dim entries per node.
struct VelocityField {
  std::vector<double> plus, minus;

  static VelocityField zero(const TwoPhaseGrid& g) {
    VelocityField v;
    v.plus.assign(static_cast<std::size_t>(g.plus.num_nodes) * g.dim, 0.0);
    v.minus.assign(static_cast<std::size_t>(g.minus.num_nodes) * g.dim, 0.0);
    return v;
  }
};

// Directional-derivative field (V . grad F) per node.
void transport_field(const MatrixField& f, const PhaseGrid& g, const double* v,
                     MatrixField& out);

EnergyBreakdown energy(const PairedField& a, const PairedField& atilde,
                       const VelocityField* v, double h);

// dE/dA in the node values (both phases), including all three terms.
void euclidean_gradient(const PairedField& a, const PairedField& atilde,
                        const VelocityField* v, double h, MatrixField& eplus,
                        MatrixField& eminus);

struct GradientField {
  MatrixField plus, minus;  // antisymmetric per node
};

// antisym(A^T dE/dA) per node; at interface pairs the pair (G+, G-) is
// projected onto the admissible cone (difference orthogonal to V4, the
// correction split equally between the sides).
GradientField riemannian_gradient(const PairedField& a, const PairedField& atilde,
                                  const VelocityField* v, double h);

double gradient_norm_sq(const GradientField& g);

// Sparse discrete variation: per phase, a list of (node, antisymmetric Mat).
struct TestField {
  std::vector<std::pair<int, Mat>> plus, minus;
  double norm() const;
};

// Directional derivative (1/2) d/deps E(A exp(eps W)) |_0 assembled through
// the Euclidean gradient pairing  sum <antisym(A^T E), W>.
double el_form(const PairedField& a, const PairedField& atilde, const VelocityField* v,
               double h, const TestField& w);

// max over the testset of |el_form| / ||W||. Interface entries must satisfy
// (W+ - W-) orthogonal to V4 w.r.t. the stored axis (tolerance 1e-10),
// otherwise a structured error is raised.
double euler_lagrange_residual(const PairedField& a, const PairedField& atilde,
                               const VelocityField* v, double h,
                               const std::vector<TestField>& testset);

// Deterministic test-field library: per-node antisymmetric basis bumps on a
// stride-spread interior subset plus admissible interface pairs (common
// bumps and V3 one-sided bumps).
std::vector<TestField> make_el_testset(const PairedField& a, int interior_per_phase,
                                       int iface_pairs);

} // namespace orthoflow
