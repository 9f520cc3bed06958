#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "orthoflow/vsplit.hpp"

// Standalone randomized oracles for the O(n) tangent/normal algebra, the
// V1-V5 decomposition, and the four equivalent forms of the interface
// Neumann coupling for a minimal pair. Reports are deterministic per seed
// and serialize to JSON.

namespace orthoflow {

// Verdict dead band: a condition "holds" below tol_hold * scale and
// "fails" above tol_fail * scale; the factor-10 gap keeps the randomized
// implication-graph check away from boundary flakiness.
inline constexpr double kTolHold = 1e-12;
inline constexpr double kTolFail = 1e-10;

struct EquivalenceReport {
  double r1 = 0.0, r2 = 0.0, r3 = 0.0, r4 = 0.0;  // defect of each condition
  bool m1 = false, m2 = false, m3 = false, m4 = false;
  bool boundary = false;    // some residual fell inside the dead band
  bool consistent = true;   // no condition holds while another fails
  std::optional<Mat> w;     // recovered common W when M3 holds
  double scale = 1.0;

  std::string to_json() const;
};

// dnu_plus/minus play the role of the normal-derivative traces.
EquivalenceReport check_equivalences(const OrthMat& aplus, const OrthMat& aminus,
                                     const Mat& dnu_plus, const Mat& dnu_minus,
                                     double tol_pair = 1e-8);

struct VPerpReport {
  int n = 0, trials = 0;
  std::uint64_t seed = 0;
  double max_reconstruction = 0.0;   // relative
  double max_cross = 0.0;            // pairwise component inner products
  double max_split = 0.0;            // A_n = V3+V4, S_n = V1+V2+V5 defect
  double max_sym_v4 = 0.0;           // (n(x)n)X and X(n(x)n) vs V4
  std::array<int, 5> dims{};
  std::array<int, 5> dims_expected{};
  bool pass = false;

  std::string to_json() const;
};

VPerpReport check_v_perp(int n, int trials, std::uint64_t seed);

struct TangentNormalReport {
  int n = 0, trials = 0;
  std::uint64_t seed = 0;
  double max_tangent_defect = 0.0;      // X_t^T A + A^T X_t
  double max_normal_pairing = 0.0;      // BA : tangent basis
  double max_curve_drift = 0.0;         // orthogonality of A exp(t A^T X)
  double min_gram_det = 0.0;            // tangent basis independence
  bool dims_ok = false;
  bool pass = false;

  std::string to_json() const;
};

TangentNormalReport check_tangent_normal(int n, int trials, std::uint64_t seed);

struct EquivalenceBatteryReport {
  int n = 0, trials = 0;
  std::uint64_t seed = 0;
  int inconsistencies = 0;
  int positives = 0, negatives = 0;
  double worst_positive = 0.0;  // largest defect among constructed positives
  bool pass = false;

  std::string to_json() const;
};

// Randomized constructions: exact positives (dnu = A W, W in V4), V3-mixed
// negatives, and unstructured negatives; counts dead-band inconsistencies.
EquivalenceBatteryReport check_equivalence_battery(int n, int trials, std::uint64_t seed);

} // namespace orthoflow
