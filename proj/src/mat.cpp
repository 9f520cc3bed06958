#include "orthoflow/mat.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "orthoflow/kernels.hpp"

namespace orthoflow {

Mat Mat::outer(const Vec& u, const Vec& v) {
  if (u.size() != v.size()) fail(Errc::DimensionMismatch, "outer: size mismatch");
  const int n = static_cast<int>(u.size());
  Mat m(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = u[i] * v[j];
  return m;
}

Mat& Mat::operator+=(const Mat& o) {
  if (o.n_ != n_) fail(Errc::DimensionMismatch, "Mat +=: dimension mismatch");
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
  return *this;
}

Mat& Mat::operator-=(const Mat& o) {
  if (o.n_ != n_) fail(Errc::DimensionMismatch, "Mat -=: dimension mismatch");
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
  return *this;
}

Mat& Mat::operator*=(double s) {
  for (double& x : a_) x *= s;
  return *this;
}

Mat Mat::operator*(const Mat& o) const {
  if (o.n_ != n_) fail(Errc::DimensionMismatch, "Mat *: dimension mismatch");
  Mat c(n_);
  mm(n_, c.data(), data(), o.data());
  return c;
}

Mat Mat::transpose() const {
  Mat t(n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Mat Mat::sym() const {
  Mat s(n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) s(i, j) = 0.5 * ((*this)(i, j) + (*this)(j, i));
  return s;
}

Mat Mat::antisym() const {
  Mat s(n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) s(i, j) = 0.5 * ((*this)(i, j) - (*this)(j, i));
  return s;
}

double Mat::trace() const {
  double t = 0.0;
  for (int i = 0; i < n_; ++i) t += (*this)(i, i);
  return t;
}

void mm(int n, double* c, const double* a, const double* b) {
  if (n == 3) {
    for (int i = 0; i < 3; ++i) {
      const double a0 = a[3 * i], a1 = a[3 * i + 1], a2 = a[3 * i + 2];
      c[3 * i] = a0 * b[0] + a1 * b[3] + a2 * b[6];
      c[3 * i + 1] = a0 * b[1] + a1 * b[4] + a2 * b[7];
      c[3 * i + 2] = a0 * b[2] + a1 * b[5] + a2 * b[8];
    }
    return;
  }
  if (n == 2) {
    c[0] = a[0] * b[0] + a[1] * b[2];
    c[1] = a[0] * b[1] + a[1] * b[3];
    c[2] = a[2] * b[0] + a[3] * b[2];
    c[3] = a[2] * b[1] + a[3] * b[3];
    return;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += a[i * n + k] * b[k * n + j];
      c[i * n + j] = s;
    }
  }
}

void mtm(int n, double* c, const double* a, const double* b) {
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += a[k * n + i] * b[k * n + j];
      c[i * n + j] = s;
    }
  }
}

void mmt(int n, double* c, const double* a, const double* b) {
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += a[i * n + k] * b[j * n + k];
      c[i * n + j] = s;
    }
  }
}

void antisym_of(int n, double* w, const double* m) {
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) w[i * n + j] = 0.5 * (m[i * n + j] - m[j * n + i]);
}

double frob(const Mat& m) { return std::sqrt(kernels::sumsq(m.data(), m.size())); }

double frob_dist(const Mat& a, const Mat& b) {
  if (a.n() != b.n()) fail(Errc::DimensionMismatch, "frob_dist: dimension mismatch");
  return std::sqrt(kernels::sumsq_diff(a.data(), b.data(), a.size()));
}

double mat_dot(const Mat& a, const Mat& b) {
  if (a.n() != b.n()) fail(Errc::DimensionMismatch, "mat_dot: dimension mismatch");
  return kernels::dot(a.data(), b.data(), a.size());
}

double max_abs(const Mat& m) {
  double v = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) v = std::max(v, std::abs(m.data()[i]));
  return v;
}

double vdot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) fail(Errc::DimensionMismatch, "vdot: size mismatch");
  return kernels::dot(a.data(), b.data(), a.size());
}

double vnorm(const Vec& a) { return std::sqrt(kernels::sumsq(a.data(), a.size())); }

Vec normalized(const Vec& a) {
  const double s = vnorm(a);
  if (s == 0.0) fail(Errc::InvalidArgument, "normalized: zero vector");
  Vec r = a;
  for (double& x : r) x /= s;
  return r;
}

namespace {

// LU with partial pivoting; returns permutation sign, factors in place.
int lu_factor(int n, std::vector<double>& a, std::vector<int>& piv) {
  int sign = 1;
  piv.resize(n);
  for (int k = 0; k < n; ++k) {
    int p = k;
    double best = std::abs(a[k * n + k]);
    for (int i = k + 1; i < n; ++i) {
      const double v = std::abs(a[i * n + k]);
      if (v > best) {
        best = v;
        p = i;
      }
    }
    piv[k] = p;
    if (p != k) {
      for (int j = 0; j < n; ++j) std::swap(a[k * n + j], a[p * n + j]);
      sign = -sign;
    }
    const double d = a[k * n + k];
    if (d == 0.0) return 0;
    for (int i = k + 1; i < n; ++i) {
      a[i * n + k] /= d;
      const double f = a[i * n + k];
      for (int j = k + 1; j < n; ++j) a[i * n + j] -= f * a[k * n + j];
    }
  }
  return sign;
}

// Solves A X = B in place (B is n x n row-major) given LU factors.
void lu_solve(int n, const std::vector<double>& lu, const std::vector<int>& piv,
              double* b) {
  for (int k = 0; k < n; ++k) {
    if (piv[k] != k)
      for (int j = 0; j < n; ++j) std::swap(b[k * n + j], b[piv[k] * n + j]);
    for (int i = k + 1; i < n; ++i) {
      const double f = lu[i * n + k];
      for (int j = 0; j < n; ++j) b[i * n + j] -= f * b[k * n + j];
    }
  }
  for (int k = n - 1; k >= 0; --k) {
    const double d = lu[k * n + k];
    for (int j = 0; j < n; ++j) b[k * n + j] /= d;
    for (int i = 0; i < k; ++i) {
      const double f = lu[i * n + k];
      for (int j = 0; j < n; ++j) b[i * n + j] -= f * b[k * n + j];
    }
  }
}

} // namespace

double det(const Mat& m) {
  const int n = m.n();
  std::vector<double> a(m.data(), m.data() + m.size());
  std::vector<int> piv;
  const int sign = lu_factor(n, a, piv);
  if (sign == 0) return 0.0;
  double d = sign;
  for (int i = 0; i < n; ++i) d *= a[i * n + i];
  return d;
}

double orth_residual(const Mat& a) {
  const int n = a.n();
  Mat g(n);
  mtm(n, g.data(), a.data(), a.data());
  for (int i = 0; i < n; ++i) g(i, i) -= 1.0;
  return frob(g);
}

OrthMat make_orthogonal(const Mat& m, double tol) {
  const double r = orth_residual(m);
  if (r > tol) fail(Errc::NotOrthogonal, "make_orthogonal: ||A^T A - I|| = " + std::to_string(r));
  const double d = det(m);
  if (std::abs(std::abs(d) - 1.0) > tol)
    fail(Errc::NotOrthogonal, "make_orthogonal: |det| - 1 = " + std::to_string(std::abs(d) - 1.0));
  return OrthMat{m, d > 0 ? +1 : -1};
}

Mat reflection(const Vec& axis, double tol) {
  if (std::abs(vnorm(axis) - 1.0) > tol)
    fail(Errc::NonUnitAxis, "reflection: axis not unit");
  const int n = static_cast<int>(axis.size());
  Mat r = Mat::identity(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) r(i, j) -= 2.0 * axis[i] * axis[j];
  return r;
}

Mat tangent_project(const OrthMat& a, const Mat& x) {
  const int n = a.mat.n();
  if (x.n() != n) fail(Errc::DimensionMismatch, "tangent_project: dimension mismatch");
  Mat atx(n);
  mtm(n, atx.data(), a.mat.data(), x.data());
  Mat w(n);
  antisym_of(n, w.data(), atx.data());
  Mat out(n);
  mm(n, out.data(), a.mat.data(), w.data());
  return out;
}

OrthMat exp_antisym(const Mat& w, double tol) {
  const int n = w.n();
  {
    Mat s = w.sym();
    if (2.0 * frob(s) > tol)
      fail(Errc::NotAntisymmetric, "exp_antisym: ||W + W^T|| above tolerance");
  }
  if (n == 2) {
    const double th = 0.5 * (w(1, 0) - w(0, 1));
    Mat e(2);
    e(0, 0) = std::cos(th);
    e(0, 1) = -std::sin(th);
    e(1, 0) = std::sin(th);
    e(1, 1) = std::cos(th);
    return OrthMat{e, +1};
  }
  if (n == 3) {
    // Rodrigues: exp(W) = I + (sin t / t) W + ((1 - cos t)/t^2) W^2.
    const double w1 = 0.5 * (w(2, 1) - w(1, 2));
    const double w2 = 0.5 * (w(0, 2) - w(2, 0));
    const double w3 = 0.5 * (w(1, 0) - w(0, 1));
    const double t2 = w1 * w1 + w2 * w2 + w3 * w3;
    const double t = std::sqrt(t2);
    double a, b;  // sin t / t, (1 - cos t)/t^2
    if (t < 1e-4) {
      a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
      b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
    } else {
      a = std::sin(t) / t;
      b = (1.0 - std::cos(t)) / t2;
    }
    Mat ww(3);
    ww(0, 1) = -w3;
    ww(0, 2) = w2;
    ww(1, 0) = w3;
    ww(1, 2) = -w1;
    ww(2, 0) = -w2;
    ww(2, 1) = w1;
    Mat w2m(3);
    mm(3, w2m.data(), ww.data(), ww.data());
    Mat e = Mat::identity(3) + ww * a + w2m * b;
    return OrthMat{e, +1};
  }
  // Scale so ||W/2^s|| <= 0.25, apply Pade [6/6], square back.
  const double nrm = frob(w);
  int s = 0;
  double scale = 1.0;
  while (nrm * scale > 0.25) {
    scale *= 0.5;
    ++s;
  }
  Mat a = w;
  a *= scale;

  // Pade [6/6]: N = sum b_k A^k (even/odd split), exp(A) = D^{-1} N with
  // D(A) = N(-A).
  static const double b[7] = {1.0, 0.5, 5.0 / 44.0, 1.0 / 66.0, 1.0 / 792.0,
                              1.0 / 15840.0, 1.0 / 665280.0};
  Mat a2 = a * a;
  Mat a4 = a2 * a2;
  Mat a6 = a4 * a2;
  Mat even = Mat::identity(n) * b[0] + a2 * b[2] + a4 * b[4] + a6 * b[6];
  Mat oddc = Mat::identity(n) * b[1] + a2 * b[3] + a4 * b[5];
  Mat odd = a * oddc;
  Mat nmat = even + odd;
  Mat dmat = even - odd;

  std::vector<double> lu(dmat.data(), dmat.data() + dmat.size());
  std::vector<int> piv;
  if (lu_factor(n, lu, piv) == 0) fail(Errc::RankDeficient, "exp_antisym: singular Pade denominator");
  Mat x = nmat;
  lu_solve(n, lu, piv, x.data());

  for (int i = 0; i < s; ++i) x = x * x;
  return OrthMat{x, +1};
}

void sym_eigen(const Mat& a, Vec& evals, Mat& evecs) {
  const int n = a.n();
  Mat s = a;
  Mat v = Mat::identity(n);
  const double scale = std::max(frob(s), 1e-300);
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += s(p, q) * s(p, q);
    if (std::sqrt(2.0 * off) <= 1e-15 * scale) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = s(p, q);
        if (std::abs(apq) <= 1e-18 * scale) continue;
        const double app = s(p, p), aqq = s(q, q);
        const double theta = 0.5 * (aqq - app) / apq;
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (int k = 0; k < n; ++k) {
          const double skp = s(k, p), skq = s(k, q);
          s(k, p) = c * skp - sn * skq;
          s(k, q) = sn * skp + c * skq;
        }
        for (int k = 0; k < n; ++k) {
          const double spk = s(p, k), sqk = s(q, k);
          s(p, k) = c * spk - sn * sqk;
          s(q, k) = sn * spk + c * sqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }
  // Sort ascending, carrying eigenvector columns.
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](int i, int j) { return s(i, i) < s(j, j); });
  evals.assign(n, 0.0);
  evecs = Mat(n);
  for (int j = 0; j < n; ++j) {
    evals[j] = s(idx[j], idx[j]);
    for (int i = 0; i < n; ++i) evecs(i, j) = v(i, idx[j]);
  }
}

OrthMat nearest_orthogonal(const Mat& m) {
  const int n = m.n();
  // Near-orthogonal inputs (re-orthogonalization of drifted iterates):
  // Newton-Schulz converges quadratically to the polar factor.
  if (orth_residual(m) < 0.1) {
    Mat u = m;
    Mat utu(n), corr(n), next(n);
    for (int it = 0; it < 8; ++it) {
      mtm(n, utu.data(), u.data(), u.data());
      double res = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double d = utu(i, j) - (i == j ? 1.0 : 0.0);
          res += d * d;
        }
      if (res < 1e-30) break;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) corr(i, j) = 1.5 * (i == j ? 1.0 : 0.0) - 0.5 * utu(i, j);
      mm(n, next.data(), u.data(), corr.data());
      u = next;
    }
    return OrthMat{u, det(m) > 0 ? +1 : -1};
  }
  Mat g(n);
  mtm(n, g.data(), m.data(), m.data());  // M^T M
  Vec ev;
  Mat v(n);
  sym_eigen(g, ev, v);
  const double nrm = frob(m);
  if (ev[0] <= 0.0 || std::sqrt(std::max(ev[0], 0.0)) <= 1e-12 * nrm)
    fail(Errc::RankDeficient, "nearest_orthogonal: rank-deficient input");
  // U = M V diag(1/sqrt(lambda)) V^T
  Mat scaled = v;
  for (int j = 0; j < n; ++j) {
    const double inv = 1.0 / std::sqrt(ev[j]);
    for (int i = 0; i < n; ++i) scaled(i, j) *= inv;
  }
  Mat pinvsqrt(n);
  mmt(n, pinvsqrt.data(), scaled.data(), v.data());
  Mat u(n);
  mm(n, u.data(), m.data(), pinvsqrt.data());
  // One Newton-Schulz touch-up: U <- U (3I - U^T U)/2.
  Mat utu(n);
  mtm(n, utu.data(), u.data(), u.data());
  Mat corr = Mat::identity(n) * 1.5 - utu * 0.5;
  Mat u2(n);
  mm(n, u2.data(), u.data(), corr.data());
  return OrthMat{u2, det(m) > 0 ? +1 : -1};
}

MinimalPairResult minimal_pair_residual(const Mat& aplus, const Mat& aminus) {
  const int n = aplus.n();
  if (aminus.n() != n) fail(Errc::DimensionMismatch, "minimal_pair_residual: dimension mismatch");
  Mat r(n);
  mtm(n, r.data(), aplus.data(), aminus.data());  // R = A+^T A-
  Mat s(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      s(i, j) = 0.5 * ((i == j ? 1.0 : 0.0) - 0.5 * (r(i, j) + r(j, i)));
  Vec ev;
  Mat v(n);
  sym_eigen(s, ev, v);
  Vec axis(n);
  for (int i = 0; i < n; ++i) axis[i] = v(i, n - 1);  // leading eigenvector
  // Deterministic sign: first coordinate with |c| > 1e-12 * max made positive.
  double mx = 0.0;
  for (double c : axis) mx = std::max(mx, std::abs(c));
  for (double c : axis) {
    if (std::abs(c) > 1e-12 * mx) {
      if (c < 0.0)
        for (double& x : axis) x = -x;
      break;
    }
  }
  Mat refl = reflection(normalized(axis), 1e-9);
  MinimalPairResult out;
  out.axis = normalized(axis);
  out.residual = frob_dist(r, refl);
  return out;
}

Mat random_mat(int n, Rng& rng, double scale) {
  Mat m(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = scale * rng.normal();
  return m;
}

Mat random_antisym(int n, Rng& rng, double scale) {
  Mat m(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = scale * rng.normal();
      m(i, j) = v;
      m(j, i) = -v;
    }
  return m;
}

Mat random_sym(int n, Rng& rng, double scale) {
  Mat m(n);
  for (int i = 0; i < n; ++i) {
    m(i, i) = scale * rng.normal();
    for (int j = i + 1; j < n; ++j) {
      const double v = scale * rng.normal();
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  return m;
}

Vec random_unit(int n, Rng& rng) {
  Vec v(n);
  double s = 0.0;
  do {
    for (double& x : v) x = rng.normal();
    s = vnorm(v);
  } while (s < 1e-8);
  for (double& x : v) x /= s;
  return v;
}

OrthMat random_special_orthogonal(int n, Rng& rng) {
  return exp_antisym(random_antisym(n, rng, 0.7));
}

} // namespace orthoflow
