#pragma once

#include <array>

#include "orthoflow/mat.hpp"

// Orthogonal decomposition of M_n relative to a unit axis n:
//   V1 = span{n(x)n}
//   V2 = {n(x)L + L(x)n : L.n = 0}         V3 = {n(x)L - L(x)n : L.n = 0}
//   V4 = span{L(x)m - m(x)L},  V5 = span{L(x)L, L(x)m + m(x)L}
// with L, m running over an orthonormal completion of the axis.
// dim = (1, n-1, n-1, (n-1)(n-2)/2, n(n-1)/2); A_n = V3+V4, S_n = V1+V2+V5.

namespace orthoflow {

struct VSplit {
  Vec axis;
  Mat v1, v2, v3, v4, v5;
  Mat reconstruct() const { return v1 + v2 + v3 + v4 + v5; }
};

// Deterministic orthonormal frame {axis, l_1, ..., l_{n-1}} as columns,
// built by the Householder reflection that swaps e_1 and the axis.
Mat frame_from_axis(const Vec& axis, double tol = kTolOrthDefault);

VSplit v_decompose(const Mat& m, const Vec& axis, double tol = kTolOrthDefault);

// W - V4-part of W for antisymmetric W (the V3 component).
Mat project_v4_complement(const Mat& w, const Vec& axis, double tol = kTolOrthDefault);

// V4 component alone (defined for any M; for antisymmetric input this is
// W - project_v4_complement(W)).
Mat v4_component(const Mat& m, const Vec& axis, double tol = kTolOrthDefault);

// Orthonormal basis of V4 (Frobenius-normalized), deterministic order.
std::vector<Mat> v4_basis(const Vec& axis, double tol = kTolOrthDefault);

// dim(V1..V5) per the closed formula.
std::array<int, 5> v_dims(int n);

} // namespace orthoflow
