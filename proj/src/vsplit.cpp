#include "orthoflow/vsplit.hpp"

#include <array>
#include <cmath>

namespace orthoflow {

Mat frame_from_axis(const Vec& axis, double tol) {
  const int n = static_cast<int>(axis.size());
  if (std::abs(vnorm(axis) - 1.0) > tol) fail(Errc::NonUnitAxis, "frame_from_axis: axis not unit");
  Mat f = Mat::identity(n);
  // Householder reflection swapping e_1 and axis; identity when axis ~ e_1.
  Vec u(n);
  u[0] = axis[0] - 1.0;
  for (int i = 1; i < n; ++i) u[i] = axis[i];
  const double s = vnorm(u);
  if (s > 1e-12) {
    for (double& x : u) x /= s;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) f(i, j) -= 2.0 * u[i] * u[j];
  }
  // Column 0 is the axis (exactly, up to rounding); re-seat it for safety.
  for (int i = 0; i < n; ++i) f(i, 0) = axis[i];
  return f;
}

VSplit v_decompose(const Mat& m, const Vec& axis, double tol) {
  const int n = m.n();
  if (static_cast<int>(axis.size()) != n)
    fail(Errc::DimensionMismatch, "v_decompose: axis dimension mismatch");
  const Mat f = frame_from_axis(axis, tol);
  // Coordinates in the frame: Mhat = F^T M F.
  Mat tmp(n), mhat(n);
  mtm(n, tmp.data(), f.data(), m.data());
  mm(n, mhat.data(), tmp.data(), f.data());

  Mat h1 = Mat::zero(n), h2 = Mat::zero(n), h3 = Mat::zero(n), h4 = Mat::zero(n),
      h5 = Mat::zero(n);
  h1(0, 0) = mhat(0, 0);
  for (int j = 1; j < n; ++j) {
    const double a = mhat(0, j), b = mhat(j, 0);
    h2(0, j) = 0.5 * (a + b);
    h2(j, 0) = 0.5 * (a + b);
    h3(0, j) = 0.5 * (a - b);
    h3(j, 0) = -0.5 * (a - b);
  }
  for (int i = 1; i < n; ++i) {
    for (int j = 1; j < n; ++j) {
      const double a = mhat(i, j), b = mhat(j, i);
      h4(i, j) = 0.5 * (a - b);
      h5(i, j) = 0.5 * (a + b);
    }
  }

  auto back = [&](const Mat& h) {
    Mat t(n), r(n);
    mm(n, t.data(), f.data(), h.data());
    mmt(n, r.data(), t.data(), f.data());
    return r;
  };

  VSplit out;
  out.axis = axis;
  out.v1 = back(h1);
  out.v2 = back(h2);
  out.v3 = back(h3);
  out.v4 = back(h4);
  out.v5 = back(h5);
  return out;
}

Mat project_v4_complement(const Mat& w, const Vec& axis, double tol) {
  return w - v4_component(w, axis, tol);
}

Mat v4_component(const Mat& m, const Vec& axis, double tol) {
  return v_decompose(m, axis, tol).v4;
}

std::vector<Mat> v4_basis(const Vec& axis, double tol) {
  const int n = static_cast<int>(axis.size());
  const Mat f = frame_from_axis(axis, tol);
  std::vector<Mat> basis;
  const double inv = 1.0 / std::sqrt(2.0);
  for (int i = 1; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      Mat g(n);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
          g(r, c) = inv * (f(r, i) * f(c, j) - f(r, j) * f(c, i));
      basis.push_back(g);
    }
  }
  return basis;
}

std::array<int, 5> v_dims(int n) {
  return {1, n - 1, n - 1, (n - 1) * (n - 2) / 2, n * (n - 1) / 2};
}

} // namespace orthoflow
