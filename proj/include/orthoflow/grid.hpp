#pragma once

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "orthoflow/mat.hpp"

// Discrete two-phase domains Omega = Omega+ u Gamma u Omega- with duplicated
// interface nodes, trapezoid volume weights, and edge quadrature for the
// Dirichlet energy. Structured grids only: FlatBox (d=1,2, interface on the
// x_d = const hyperplane) and PolarDisk (annulus r in [r_core, R], interface
// on a concentric circle, theta periodic).

namespace orthoflow {

enum class Geometry { FlatBox1D, FlatBox2D, PolarDisk };
enum class Phase { Plus, Minus };

const char* geometry_name(Geometry g);
Geometry geometry_from_name(const std::string& name);

struct GridSpec {
  Geometry geom = Geometry::FlatBox1D;
  int m_normal = 32;      // intervals per phase across the interface direction
  int m_tangent = 32;     // tangential intervals (FlatBox2D) or ntheta (PolarDisk)
  double iface_pos = 0.0; // 1D interface location
  double R = 1.0;         // PolarDisk outer radius
  double r_core = 0.05;   // PolarDisk excised core radius
  double r_iface = 0.5;   // PolarDisk interface circle
  bool operator==(const GridSpec&) const = default;
};

// A directional batch of edges with common index offset; w[k] is the
// quadrature weight of edge k already divided by length^2, so the energy
// contribution is w[k] * ||A(b0+k) - A(a0+k)||^2.
struct EdgeRun {
  int a0 = 0, b0 = 0, count = 0;
  std::vector<double> w;
};

struct PhaseGrid {
  int dim = 1;
  int num_nodes = 0;
  int n_normal = 0, n_tangent = 1;  // node counts; num_nodes = n_normal*n_tangent
  std::vector<double> coords;       // dim per node
  std::vector<double> vol_w;
  std::vector<EdgeRun> runs;
  // Centered-difference stencils (one-sided at boundaries, periodic in
  // theta): per node and direction, dA_dir = grad_s * (A[ip] - A[im]).
  std::vector<int> grad_im, grad_ip;
  std::vector<double> grad_s;
  // Normal-direction bookkeeping for pullback interpolation: coordinate of
  // slice j is normal0 + j*normal_step (signed), node = j*n_tangent + i.
  double normal0 = 0.0, normal_step = 0.0;
  double total_volume = 0.0;

  int node(int j_normal, int i_tangent) const { return j_normal * n_tangent + i_tangent; }
};

struct TwoPhaseGrid {
  GridSpec spec;
  int dim = 1;
  PhaseGrid plus, minus;
  int num_iface = 0;
  std::vector<int> iface_plus, iface_minus;  // node indices per pair
  std::vector<double> iface_w;               // discrete H^{d-1} weight per pair
  double analytic_volume = 0.0;
};

using GridPtr = std::shared_ptr<const TwoPhaseGrid>;

GridPtr build_grid(const GridSpec& spec);

struct MatrixField {
  int n = 0;
  int num_nodes = 0;
  std::vector<double> a;  // node-major, n*n per node

  MatrixField() = default;
  MatrixField(int n_, int nodes) : n(n_), num_nodes(nodes), a(static_cast<std::size_t>(nodes) * n_ * n_, 0.0) {}
  double* at(int i) { return a.data() + static_cast<std::size_t>(i) * n * n; }
  const double* at(int i) const { return a.data() + static_cast<std::size_t>(i) * n * n; }
  Mat get(int i) const {
    return Mat(n, std::vector<double>(at(i), at(i) + static_cast<std::size_t>(n) * n));
  }
  void set(int i, const Mat& m) { std::copy(m.data(), m.data() + m.size(), at(i)); }
};

struct PairedField {
  GridPtr grid;
  int n = 0;
  MatrixField plus, minus;
  std::vector<double> axes;  // num_iface * n, discrete n(x) per pair

  double* axis(int p) { return axes.data() + static_cast<std::size_t>(p) * n; }
  const double* axis(int p) const { return axes.data() + static_cast<std::size_t>(p) * n; }
  Vec axis_vec(int p) const { return Vec(axis(p), axis(p) + n); }
  MatrixField& phase(Phase ph) { return ph == Phase::Plus ? plus : minus; }
  const MatrixField& phase(Phase ph) const { return ph == Phase::Plus ? plus : minus; }
};

PairedField make_paired_field(const GridPtr& grid, int n);

// Sum over both phases of the edge-difference quadrature; zero iff the
// field is constant per phase.
double dirichlet_energy(const PairedField& f);
double dirichlet_energy_phase(const MatrixField& f, const PhaseGrid& g);

// Volume-weighted squared L2 distance over both phases.
double l2_distance_sq(const PairedField& f, const PairedField& g);

// Constraint diagnostics.
double max_orth_residual(const PairedField& f);
double max_pair_residual(const PairedField& f);
bool same_grid(const PairedField& f, const PairedField& g);

struct InitialRecipe {
  enum class Kind { ConstantPair, SmoothRandom, UserFile };
  Kind kind = Kind::ConstantPair;
  std::uint64_t seed = 0;
  double amplitude = 0.5;
  int modes = 3;        // Fourier modes per direction in the random fields
  double decay = 2.0;   // per-mode amplitude falloff k^-decay
  std::string path_prefix;  // UserFile: reads <prefix>_plus.txt/_minus.txt/_axes.txt
};

// Returns a manifold-valid field satisfying the minimal-pair condition at
// every interface pair by construction.
PairedField make_initial(const GridPtr& grid, int n, const InitialRecipe& recipe);

// Snapshot format: self-describing text header + one node per line at 17
// significant digits; round-trips bit-exactly.
void write_field_snapshot(const std::string& path, const PairedField& f, Phase phase);
void write_axes_snapshot(const std::string& path, const PairedField& f);
void write_paired_snapshot(const std::string& prefix, const PairedField& f);
PairedField read_paired_snapshot(const std::string& prefix, const GridPtr& grid);

} // namespace orthoflow
