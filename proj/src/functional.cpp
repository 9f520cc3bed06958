#include "orthoflow/functional.hpp"

#include <cmath>

#include "orthoflow/kernels.hpp"

namespace orthoflow {

void transport_field(const MatrixField& f, const PhaseGrid& g, const double* v,
                     MatrixField& out) {
  const int bs = f.n * f.n;
  out = MatrixField(f.n, f.num_nodes);
  for (int i = 0; i < f.num_nodes; ++i) {
    double* o = out.at(i);
    for (int d = 0; d < g.dim; ++d) {
      const double vd = v[static_cast<std::size_t>(i) * g.dim + d];
      if (vd == 0.0) continue;
      const double s = g.grad_s[static_cast<std::size_t>(i) * g.dim + d];
      const double* fp = f.at(g.grad_ip[static_cast<std::size_t>(i) * g.dim + d]);
      const double* fm = f.at(g.grad_im[static_cast<std::size_t>(i) * g.dim + d]);
      const double c = vd * s;
      for (int k = 0; k < bs; ++k) o[k] += c * (fp[k] - fm[k]);
    }
  }
}

namespace {

double transport_term_phase(const MatrixField& a, const MatrixField& atilde,
                            const PhaseGrid& g, const double* v) {
  MatrixField vg;
  transport_field(atilde, g, v, vg);
  const std::size_t bs = static_cast<std::size_t>(a.n) * a.n;
  std::vector<double> diff(a.a.size());
  for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = a.a[k] - atilde.a[k];
  return 2.0 * kernels::weighted_dot_blocks(vg.a.data(), diff.data(), g.vol_w.data(),
                                            g.num_nodes, bs);
}

} // namespace

EnergyBreakdown energy(const PairedField& a, const PairedField& atilde,
                       const VelocityField* v, double h) {
  if (!same_grid(a, atilde) || a.n != atilde.n)
    fail(Errc::GridMismatch, "energy: fields on different grids");
  if (h <= 0.0) fail(Errc::InvalidArgument, "energy: h must be positive");
  EnergyBreakdown e;
  e.dirichlet = dirichlet_energy(a);
  e.proximity = l2_distance_sq(a, atilde) / h;
  e.transport = 0.0;
  if (v) {
    e.transport = transport_term_phase(a.plus, atilde.plus, a.grid->plus, v->plus.data()) +
                  transport_term_phase(a.minus, atilde.minus, a.grid->minus, v->minus.data());
  }
  e.total = e.dirichlet + e.proximity + e.transport;
  return e;
}

void euclidean_gradient(const PairedField& a, const PairedField& atilde,
                        const VelocityField* v, double h, MatrixField& eplus,
                        MatrixField& eminus) {
  const int n = a.n;
  const int bs = n * n;
  for (Phase ph : {Phase::Plus, Phase::Minus}) {
    const MatrixField& af = a.phase(ph);
    const MatrixField& tf = atilde.phase(ph);
    const PhaseGrid& g = ph == Phase::Plus ? a.grid->plus : a.grid->minus;
    MatrixField& e = ph == Phase::Plus ? eplus : eminus;
    e = MatrixField(n, af.num_nodes);

    // Dirichlet: d/dA sum_e w ||A_b - A_a||^2.
    for (const EdgeRun& run : g.runs) {
      for (int k = 0; k < run.count; ++k) {
        const double c = 2.0 * run.w[k];
        const double* pa = af.at(run.a0 + k);
        const double* pb = af.at(run.b0 + k);
        double* ea = e.at(run.a0 + k);
        double* eb = e.at(run.b0 + k);
        for (int j = 0; j < bs; ++j) {
          const double d = c * (pa[j] - pb[j]);
          ea[j] += d;
          eb[j] -= d;
        }
      }
    }
    // Proximity: 2 h^-1 w_x (A - At).
    for (int i = 0; i < af.num_nodes; ++i) {
      const double c = 2.0 / h * g.vol_w[i];
      const double* pa = af.at(i);
      const double* pt = tf.at(i);
      double* ei = e.at(i);
      for (int j = 0; j < bs; ++j) ei[j] += c * (pa[j] - pt[j]);
    }
    // Transport: 2 w_x (V . grad At), constant in A.
    if (v) {
      const double* vd = ph == Phase::Plus ? v->plus.data() : v->minus.data();
      MatrixField vg;
      transport_field(tf, g, vd, vg);
      for (int i = 0; i < af.num_nodes; ++i) {
        const double c = 2.0 * g.vol_w[i];
        const double* t = vg.at(i);
        double* ei = e.at(i);
        for (int j = 0; j < bs; ++j) ei[j] += c * t[j];
      }
    }
  }
}

GradientField riemannian_gradient(const PairedField& a, const PairedField& atilde,
                                  const VelocityField* v, double h) {
  if (max_orth_residual(a) > 1e-6)
    fail(Errc::NotOrthogonal, "riemannian_gradient: field is not manifold-valid");
  const int n = a.n;
  MatrixField ep, em;
  euclidean_gradient(a, atilde, v, h, ep, em);
  GradientField g;
  g.plus = MatrixField(n, ep.num_nodes);
  g.minus = MatrixField(n, em.num_nodes);
  std::vector<double> atx(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < ep.num_nodes; ++i) {
    mtm(n, atx.data(), a.plus.at(i), ep.at(i));
    antisym_of(n, g.plus.at(i), atx.data());
  }
  for (int i = 0; i < em.num_nodes; ++i) {
    mtm(n, atx.data(), a.minus.at(i), em.at(i));
    antisym_of(n, g.minus.at(i), atx.data());
  }
  // Interface pairs: project (G+, G-) onto the admissible variation cone.
  for (int p = 0; p < a.grid->num_iface; ++p) {
    const int ip = a.grid->iface_plus[p];
    const int im = a.grid->iface_minus[p];
    Mat gp = g.plus.get(ip);
    Mat gm = g.minus.get(im);
    Mat d4 = v4_component(gp - gm, a.axis_vec(p), 1e-8);
    g.plus.set(ip, gp - d4 * 0.5);
    g.minus.set(im, gm + d4 * 0.5);
  }
  return g;
}

double gradient_norm_sq(const GradientField& g) {
  return kernels::sumsq(g.plus.a.data(), g.plus.a.size()) +
         kernels::sumsq(g.minus.a.data(), g.minus.a.size());
}

double TestField::norm() const {
  double s = 0.0;
  for (const auto& [node, m] : plus) s += kernels::sumsq(m.data(), m.size());
  for (const auto& [node, m] : minus) s += kernels::sumsq(m.data(), m.size());
  return std::sqrt(s);
}

double el_form(const PairedField& a, const PairedField& atilde, const VelocityField* v,
               double h, const TestField& w) {
  MatrixField ep, em;
  euclidean_gradient(a, atilde, v, h, ep, em);
  const int n = a.n;
  std::vector<double> aw(static_cast<std::size_t>(n) * n);
  double s = 0.0;
  for (const auto& [node, m] : w.plus) {
    mm(n, aw.data(), a.plus.at(node), m.data());
    s += kernels::dot(ep.at(node), aw.data(), aw.size());
  }
  for (const auto& [node, m] : w.minus) {
    mm(n, aw.data(), a.minus.at(node), m.data());
    s += kernels::dot(em.at(node), aw.data(), aw.size());
  }
  return 0.5 * s;
}

namespace {

void check_admissible(const PairedField& a, const TestField& w) {
  const double nrm = w.norm();
  if (nrm == 0.0) fail(Errc::InadmissibleTestField, "test field is identically zero");
  for (int p = 0; p < a.grid->num_iface; ++p) {
    const int ip = a.grid->iface_plus[p];
    const int im = a.grid->iface_minus[p];
    Mat wp = Mat::zero(a.n), wm = Mat::zero(a.n);
    bool touches = false;
    for (const auto& [node, m] : w.plus)
      if (node == ip) {
        wp = m;
        touches = true;
      }
    for (const auto& [node, m] : w.minus)
      if (node == im) {
        wm = m;
        touches = true;
      }
    if (!touches) continue;
    const double v4 = frob(v4_component(wp - wm, a.axis_vec(p), 1e-8));
    if (v4 > 1e-10 * nrm)
      fail(Errc::InadmissibleTestField,
           "test field violates the V4 constraint at pair " + std::to_string(p));
  }
}

} // namespace

double euler_lagrange_residual(const PairedField& a, const PairedField& atilde,
                               const VelocityField* v, double h,
                               const std::vector<TestField>& testset) {
  // One dense gradient assembly serves the whole testset.
  MatrixField ep, em;
  euclidean_gradient(a, atilde, v, h, ep, em);
  const int n = a.n;
  std::vector<double> aw(static_cast<std::size_t>(n) * n);
  double r = 0.0;
  for (const TestField& w : testset) {
    check_admissible(a, w);
    double s = 0.0;
    for (const auto& [node, m] : w.plus) {
      mm(n, aw.data(), a.plus.at(node), m.data());
      s += kernels::dot(ep.at(node), aw.data(), aw.size());
    }
    for (const auto& [node, m] : w.minus) {
      mm(n, aw.data(), a.minus.at(node), m.data());
      s += kernels::dot(em.at(node), aw.data(), aw.size());
    }
    r = std::max(r, std::abs(0.5 * s) / w.norm());
  }
  return r;
}

std::vector<TestField> make_el_testset(const PairedField& a, int interior_per_phase,
                                       int iface_pairs) {
  const int n = a.n;
  std::vector<Mat> abasis;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      Mat m(n);
      m(i, j) = 1.0 / std::sqrt(2.0);
      m(j, i) = -m(i, j);
      abasis.push_back(m);
    }

  std::vector<TestField> out;
  auto add_interior = [&](Phase ph, const PhaseGrid& g, const std::vector<int>& iface_nodes) {
    std::vector<bool> is_iface(g.num_nodes, false);
    for (int id : iface_nodes) is_iface[id] = true;
    int picked = 0;
    const int stride = std::max(1, g.num_nodes / std::max(1, interior_per_phase));
    for (int i = stride / 2; i < g.num_nodes && picked < interior_per_phase; i += stride) {
      if (is_iface[i]) continue;
      ++picked;
      for (const Mat& b : abasis) {
        TestField w;
        (ph == Phase::Plus ? w.plus : w.minus).push_back({i, b});
        out.push_back(std::move(w));
      }
    }
  };
  add_interior(Phase::Plus, a.grid->plus, a.grid->iface_plus);
  add_interior(Phase::Minus, a.grid->minus, a.grid->iface_minus);

  const int np = std::min(iface_pairs, a.grid->num_iface);
  const int pstride = std::max(1, a.grid->num_iface / std::max(1, np));
  for (int p = 0; p < a.grid->num_iface; p += pstride) {
    const int ip = a.grid->iface_plus[p];
    const int im = a.grid->iface_minus[p];
    const Vec axis = a.axis_vec(p);
    // Common bumps: difference zero.
    for (const Mat& b : abasis) {
      TestField w;
      w.plus.push_back({ip, b});
      w.minus.push_back({im, b});
      out.push_back(std::move(w));
    }
    // One-sided V3 bumps: difference in V3, orthogonal to V4.
    const Mat f = frame_from_axis(axis, 1e-8);
    for (int k = 1; k < n; ++k) {
      Vec l(n);
      for (int i = 0; i < n; ++i) l[i] = f(i, k);
      Mat w3 = Mat::outer(axis, l) - Mat::outer(l, axis);
      TestField w;
      w.plus.push_back({ip, w3});
      out.push_back(std::move(w));
    }
  }
  return out;
}

} // namespace orthoflow
