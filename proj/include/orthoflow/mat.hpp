#pragma once

#include <cstddef>
#include <vector>

#include "orthoflow/error.hpp"
#include "orthoflow/rng.hpp"

// Dense small-matrix arithmetic on M_n (n in [2,16]) and the O(n) manifold
// operations: tangent/normal projections, the exponential of antisymmetric
// matrices, polar re-orthogonalization, reflections and minimal pairs.

namespace orthoflow {

using Vec = std::vector<double>;

inline constexpr double kTolOrthDefault = 1e-10;

class Mat {
 public:
  Mat() = default;
  explicit Mat(int n) : n_(n), a_(static_cast<std::size_t>(n) * n, 0.0) {
    if (n < 2 || n > 16) fail(Errc::InvalidArgument, "Mat: n must be in [2,16]");
  }
  Mat(int n, std::vector<double> entries) : n_(n), a_(std::move(entries)) {
    if (a_.size() != static_cast<std::size_t>(n) * n)
      fail(Errc::DimensionMismatch, "Mat: entry count != n*n");
  }

  static Mat identity(int n) {
    Mat m(n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Mat zero(int n) { return Mat(n); }
  static Mat outer(const Vec& u, const Vec& v);

  int n() const { return n_; }
  double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * n_ + j]; }
  double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * n_ + j]; }
  double* data() { return a_.data(); }
  const double* data() const { return a_.data(); }
  std::size_t size() const { return a_.size(); }

  Mat& operator+=(const Mat& o);
  Mat& operator-=(const Mat& o);
  Mat& operator*=(double s);
  friend Mat operator+(Mat a, const Mat& b) { return a += b; }
  friend Mat operator-(Mat a, const Mat& b) { return a -= b; }
  friend Mat operator*(Mat a, double s) { return a *= s; }
  friend Mat operator*(double s, Mat a) { return a *= s; }
  Mat operator*(const Mat& o) const;

  Mat transpose() const;
  Mat sym() const;      // (M + M^T)/2
  Mat antisym() const;  // (M - M^T)/2
  double trace() const;

 private:
  int n_ = 0;
  std::vector<double> a_;
};

// Raw-pointer kernels on row-major n x n blocks (hot paths work on field
// storage directly; Mat wraps these for convenience).
void mm(int n, double* c, const double* a, const double* b);        // C = A*B
void mtm(int n, double* c, const double* a, const double* b);       // C = A^T*B
void mmt(int n, double* c, const double* a, const double* b);       // C = A*B^T
void antisym_of(int n, double* w, const double* m);                 // W = (M-M^T)/2

double frob(const Mat& m);
double frob_dist(const Mat& a, const Mat& b);
double mat_dot(const Mat& a, const Mat& b);  // Frobenius inner product X:Y
double max_abs(const Mat& m);

// Vector helpers.
double vdot(const Vec& a, const Vec& b);
double vnorm(const Vec& a);
Vec normalized(const Vec& a);

struct OrthMat {
  Mat mat;
  int det_sign = +1;  // sign of det(mat)
};

double det(const Mat& m);  // LU with partial pivoting

// ||A^T A - I||, the orthogonality defect.
double orth_residual(const Mat& a);

// Validating constructor for OrthMat (tol on ||A^T A - I|| and |det|-1).
OrthMat make_orthogonal(const Mat& m, double tol = kTolOrthDefault);

// Reflection I - 2 axis (x) axis; axis must be unit.
Mat reflection(const Vec& axis, double tol = kTolOrthDefault);

// Projection of X onto T_A O(n) = {X : X^T A + A^T X = 0}: A * antisym(A^T X).
Mat tangent_project(const OrthMat& a, const Mat& x);

// exp(W) for antisymmetric W; scaling-and-squaring with Pade [6/6].
OrthMat exp_antisym(const Mat& w, double tol = kTolOrthDefault);

// Polar factor U of M = U P, P symmetric positive definite; errors when
// smallest singular value <= 1e-12 * ||M||.
OrthMat nearest_orthogonal(const Mat& m);

// Symmetric eigendecomposition by cyclic Jacobi. Eigenvalues ascending;
// eigenvectors as columns of V.
void sym_eigen(const Mat& s, Vec& evals, Mat& evecs);

struct MinimalPairResult {
  double residual = 0.0;
  Vec axis;
};

// Distance of (A+, A-) from the minimal-pair set: R = A+^T A-,
// S = sym((I-R)/2), axis = leading unit eigenvector of S (sign fixed:
// first coordinate above 1e-12*max made positive), residual =
// ||R - (I - 2 axis(x)axis)||.
MinimalPairResult minimal_pair_residual(const Mat& aplus, const Mat& aminus);

// Random samplers used by tests and the verify module.
Mat random_mat(int n, Rng& rng, double scale = 1.0);
Mat random_antisym(int n, Rng& rng, double scale = 1.0);
Mat random_sym(int n, Rng& rng, double scale = 1.0);
Vec random_unit(int n, Rng& rng);
OrthMat random_special_orthogonal(int n, Rng& rng);

} // namespace orthoflow
