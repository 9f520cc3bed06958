#include "orthoflow/verify.hpp"

#include <cmath>

#include <json.hpp>

#include "orthoflow/rng.hpp"

namespace orthoflow {

using nlohmann::json;

namespace {

bool holds(double r, double scale) { return r <= kTolHold * scale; }
bool fails(double r, double scale) { return r >= kTolFail * scale; }
bool in_band(double r, double scale) { return !holds(r, scale) && !fails(r, scale); }

} // namespace

EquivalenceReport check_equivalences(const OrthMat& aplus, const OrthMat& aminus,
                                     const Mat& dnu_plus, const Mat& dnu_minus,
                                     double tol_pair) {
  const int n = aplus.mat.n();
  if (aplus.det_sign != +1 || aminus.det_sign != -1)
    fail(Errc::InvalidArgument, "check_equivalences: need det signs (+1, -1)");
  auto pair = minimal_pair_residual(aplus.mat, aminus.mat);
  if (pair.residual > tol_pair)
    fail(Errc::InvalidArgument, "check_equivalences: (A+, A-) is not a minimal pair");
  const Vec axis = pair.axis;           // right axis: A+^T A- = I - 2 n(x)n
  Vec laxis(n);                          // left axis: A- A+^T = I - 2 (A+ n)(x)(A+ n)
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += aplus.mat(i, j) * axis[j];
    laxis[i] = s;
  }
  laxis = normalized(laxis);

  EquivalenceReport rep;
  rep.scale = frob(dnu_plus) + frob(dnu_minus) + 1.0;

  Mat t1(n), t2(n);
  // M1, first identity: A^T D - D^T A equal across phases.
  mtm(n, t1.data(), aplus.mat.data(), dnu_plus.data());
  mtm(n, t2.data(), aminus.mat.data(), dnu_minus.data());
  Mat c1 = (t1 - t1.transpose()) - (t2 - t2.transpose());
  // M1, second identity: A D^T - D A^T equal across phases.
  mmt(n, t1.data(), dnu_plus.data(), aplus.mat.data());
  mmt(n, t2.data(), dnu_minus.data(), aminus.mat.data());
  Mat c2 = (t1.transpose() - t1) - (t2.transpose() - t2);
  rep.r1 = std::max(frob(c1), frob(c2));

  rep.r2 = frob_dist(dnu_plus, dnu_minus);

  // M3: A+^T D+ = A-^T D- = W in V4 (right axis).
  Mat w3p(n), w3m(n);
  mtm(n, w3p.data(), aplus.mat.data(), dnu_plus.data());
  mtm(n, w3m.data(), aminus.mat.data(), dnu_minus.data());
  {
    Mat mean = (w3p + w3m) * 0.5;
    const double equality = frob_dist(w3p, w3m);
    const double membership = frob(mean - v4_component(mean, axis, 1e-8));
    rep.r3 = std::max(equality, membership);
    if (holds(rep.r3, rep.scale)) rep.w = mean;
  }

  // M4: D+ A+^T = D- A-^T = W in V4 (left axis).
  Mat w4p(n), w4m(n);
  mmt(n, w4p.data(), dnu_plus.data(), aplus.mat.data());
  mmt(n, w4m.data(), dnu_minus.data(), aminus.mat.data());
  {
    Mat mean = (w4p + w4m) * 0.5;
    const double equality = frob_dist(w4p, w4m);
    const double membership = frob(mean - v4_component(mean, laxis, 1e-8));
    rep.r4 = std::max(equality, membership);
  }

  rep.m1 = holds(rep.r1, rep.scale);
  rep.m2 = holds(rep.r2, rep.scale);
  rep.m3 = holds(rep.r3, rep.scale);
  rep.m4 = holds(rep.r4, rep.scale);
  rep.boundary = in_band(rep.r1, rep.scale) || in_band(rep.r2, rep.scale) ||
                 in_band(rep.r3, rep.scale) || in_band(rep.r4, rep.scale);
  // Any condition holding forces every other to not-fail.
  const bool any_holds = rep.m1 || rep.m2 || rep.m3 || rep.m4;
  const bool any_fails = fails(rep.r1, rep.scale) || fails(rep.r2, rep.scale) ||
                         fails(rep.r3, rep.scale) || fails(rep.r4, rep.scale);
  rep.consistent = !(any_holds && any_fails);
  return rep;
}

std::string EquivalenceReport::to_json() const {
  json j;
  j["residuals"] = {{"m1", r1}, {"m2", r2}, {"m3", r3}, {"m4", r4}};
  j["holds"] = {{"m1", m1}, {"m2", m2}, {"m3", m3}, {"m4", m4}};
  j["scale"] = scale;
  j["boundary"] = boundary;
  j["consistent"] = consistent;
  j["w_recovered"] = w.has_value();
  return j.dump(2);
}

VPerpReport check_v_perp(int n, int trials, std::uint64_t seed) {
  if (n < 2) fail(Errc::InvalidArgument, "check_v_perp: n >= 2 required");
  VPerpReport rep;
  rep.n = n;
  rep.trials = trials;
  rep.seed = seed;
  rep.dims_expected = v_dims(n);
  Rng rng = Rng::split(seed, 11);

  for (int t = 0; t < trials; ++t) {
    const Vec axis = random_unit(n, rng);
    const Mat m = random_mat(n, rng);
    const double scale = std::max(frob(m), 1e-30);
    VSplit s = v_decompose(m, axis);
    rep.max_reconstruction =
        std::max(rep.max_reconstruction, frob_dist(s.reconstruct(), m) / scale);
    const Mat* parts[5] = {&s.v1, &s.v2, &s.v3, &s.v4, &s.v5};
    for (int i = 0; i < 5; ++i)
      for (int j = i + 1; j < 5; ++j)
        rep.max_cross = std::max(
            rep.max_cross, std::abs(mat_dot(*parts[i], *parts[j])) / (scale * scale));
    Mat anti = s.v3 + s.v4;
    Mat symm = s.v1 + s.v2 + s.v5;
    rep.max_split = std::max(rep.max_split, frob(anti - anti.antisym()) / scale);
    rep.max_split = std::max(rep.max_split, frob(symm - symm.sym()) / scale);

    const Mat x = random_sym(n, rng);
    const Mat nn = Mat::outer(axis, axis);
    const double xscale = std::max(frob(x), 1e-30);
    rep.max_sym_v4 =
        std::max(rep.max_sym_v4, frob(v4_component(nn * x, axis)) / xscale);
    rep.max_sym_v4 =
        std::max(rep.max_sym_v4, frob(v4_component(x * nn, axis)) / xscale);
  }

  // Projector traces give the dimensions.
  const Vec axis = random_unit(n, rng);
  double tr[5] = {0, 0, 0, 0, 0};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Mat e(n);
      e(i, j) = 1.0;
      VSplit s = v_decompose(e, axis);
      tr[0] += s.v1(i, j);
      tr[1] += s.v2(i, j);
      tr[2] += s.v3(i, j);
      tr[3] += s.v4(i, j);
      tr[4] += s.v5(i, j);
    }
  }
  for (int k = 0; k < 5; ++k) rep.dims[k] = static_cast<int>(std::lround(tr[k]));

  rep.pass = rep.max_reconstruction <= 1e-12 && rep.max_cross <= 1e-12 &&
             rep.max_split <= 1e-12 && rep.max_sym_v4 <= 1e-12 &&
             rep.dims == rep.dims_expected;
  return rep;
}

std::string VPerpReport::to_json() const {
  json j;
  j["n"] = n;
  j["trials"] = trials;
  j["seed"] = seed;
  j["max_reconstruction"] = max_reconstruction;
  j["max_cross"] = max_cross;
  j["max_split"] = max_split;
  j["max_sym_v4"] = max_sym_v4;
  j["dims"] = dims;
  j["dims_expected"] = dims_expected;
  j["pass"] = pass;
  return j.dump(2);
}

TangentNormalReport check_tangent_normal(int n, int trials, std::uint64_t seed) {
  if (n < 2) fail(Errc::InvalidArgument, "check_tangent_normal: n >= 2 required");
  TangentNormalReport rep;
  rep.n = n;
  rep.trials = trials;
  rep.seed = seed;
  rep.min_gram_det = 1e300;
  Rng rng = Rng::split(seed, 12);

  const int tdim = n * (n - 1) / 2;
  std::vector<Mat> abasis;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      Mat m(n);
      m(i, j) = 1.0;
      m(j, i) = -1.0;
      abasis.push_back(m);
    }
  std::vector<Mat> sbasis;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      Mat m(n);
      m(i, j) = 1.0;
      m(j, i) = 1.0;
      sbasis.push_back(m);
    }

  for (int t = 0; t < trials; ++t) {
    OrthMat a = random_special_orthogonal(n, rng);
    if (t % 2 == 1) {  // exercise the det = -1 sheet as well
      a.mat = a.mat * reflection(random_unit(n, rng));
      a.det_sign = -1;
    }
    const Mat x = random_mat(n, rng);
    const Mat xt = tangent_project(a, x);
    const double scale = std::max(frob(x), 1e-30);

    Mat g(n), h(n);
    mtm(n, g.data(), xt.data(), a.mat.data());
    mtm(n, h.data(), a.mat.data(), xt.data());
    rep.max_tangent_defect = std::max(rep.max_tangent_defect, frob(g + h) / scale);

    // Normal elements annihilate the tangent space.
    const Mat b = random_sym(n, rng);
    const Mat ba = b * a.mat;
    for (const Mat& gk : abasis) {
      Mat tangent = a.mat * gk;
      rep.max_normal_pairing = std::max(
          rep.max_normal_pairing, std::abs(mat_dot(ba, tangent)) / (frob(ba) * frob(tangent)));
    }

    // Tangent basis {A G_k} is linearly independent: Gram determinant
    // (identity-padded to the minimum matrix size when tdim = 1).
    const int gs = std::max(tdim, 2);
    Mat gram = Mat::identity(gs);
    for (int i = 0; i < tdim; ++i)
      for (int j = 0; j < tdim; ++j)
        gram(i, j) = mat_dot(a.mat * abasis[i], a.mat * abasis[j]);
    rep.min_gram_det = std::min(rep.min_gram_det, det(gram));

    // Exponential curve through a tangent vector stays on the manifold.
    Mat w(n);
    mtm(n, w.data(), a.mat.data(), xt.data());
    Mat wa = w.antisym();
    Mat curve = a.mat * exp_antisym(wa * 1e-3, 1e-6).mat;
    rep.max_curve_drift = std::max(rep.max_curve_drift, orth_residual(curve));
  }

  rep.dims_ok = (tdim + n * (n + 1) / 2) == n * n;
  rep.pass = rep.max_tangent_defect <= 1e-12 && rep.max_normal_pairing <= 1e-12 &&
             rep.max_curve_drift <= 1e-9 && rep.min_gram_det > 1e-8 && rep.dims_ok;
  return rep;
}

std::string TangentNormalReport::to_json() const {
  json j;
  j["n"] = n;
  j["trials"] = trials;
  j["seed"] = seed;
  j["max_tangent_defect"] = max_tangent_defect;
  j["max_normal_pairing"] = max_normal_pairing;
  j["max_curve_drift"] = max_curve_drift;
  j["min_gram_det"] = min_gram_det;
  j["dims_ok"] = dims_ok;
  j["pass"] = pass;
  return j.dump(2);
}

EquivalenceBatteryReport check_equivalence_battery(int n, int trials, std::uint64_t seed) {
  EquivalenceBatteryReport rep;
  rep.n = n;
  rep.trials = trials;
  rep.seed = seed;
  Rng rng = Rng::split(seed, 13);

  for (int t = 0; t < trials; ++t) {
    OrthMat aplus = random_special_orthogonal(n, rng);
    const Vec axis = random_unit(n, rng);
    OrthMat aminus{aplus.mat * reflection(axis), -1};

    Mat dplus(n), dminus(n);
    const int kind = t % 4;
    if (kind == 0 || kind == 1) {
      // Positive: dnu = A W with a common W in V4 (zero when n = 2).
      Mat w = Mat::zero(n);
      auto basis = v4_basis(axis, 1e-8);
      for (const Mat& g : basis) w += g * rng.normal();
      dplus = aplus.mat * w;
      dminus = aminus.mat * w;
    } else if (kind == 2) {
      // Negative: common W with a nonzero V3 component.
      const Mat f = frame_from_axis(axis, 1e-8);
      Vec l(n);
      for (int i = 0; i < n; ++i) l[i] = f(i, 1);
      Mat w = Mat::outer(axis, l) - Mat::outer(l, axis);
      auto basis = v4_basis(axis, 1e-8);
      for (const Mat& g : basis) w += g * rng.normal();
      dplus = aplus.mat * w;
      dminus = aminus.mat * w;
    } else {
      // Negative: unstructured traces.
      dplus = random_mat(n, rng);
      dminus = random_mat(n, rng);
    }

    EquivalenceReport r = check_equivalences(aplus, aminus, dplus, dminus);
    if (!r.consistent) ++rep.inconsistencies;
    if (kind <= 1) {
      ++rep.positives;
      rep.worst_positive = std::max(
          rep.worst_positive, std::max(std::max(r.r1, r.r2), std::max(r.r3, r.r4)) / r.scale);
    } else {
      ++rep.negatives;
    }
  }
  rep.pass = rep.inconsistencies == 0 && rep.worst_positive <= 1e-12;
  return rep;
}

std::string EquivalenceBatteryReport::to_json() const {
  json j;
  j["n"] = n;
  j["trials"] = trials;
  j["seed"] = seed;
  j["inconsistencies"] = inconsistencies;
  j["positives"] = positives;
  j["negatives"] = negatives;
  j["worst_positive"] = worst_positive;
  j["pass"] = pass;
  return j.dump(2);
}

} // namespace orthoflow
