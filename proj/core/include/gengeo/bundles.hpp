// Holomorphic Hermitian line bundles over generalized complex manifolds:
// the dbar datum and generalized Chern connection, Chern curvature with its
// (1,1)-type check and classical block decomposition, the Hermitian-Einstein
// residual and its Hitchin wedge form, degrees and slope, and the Gauduchon
// condition with the associated second order operator.
#pragma once

#include "gengeo/gck.hpp"

namespace gengeo {

// ---------------------------------------------------------------------------
// Line bundle data
// ---------------------------------------------------------------------------

// A J-holomorphic Hermitian line bundle in a fixed unitary gauge.  The dbar
// datum is given by the classical (0,1)-forms alpha_{+-} (with respect to
// I_{+-}) of the induced holomorphic structures, and the Hermitian metric is
// h = e^{2f} h_0 with h_0(s, s) = 1 on the gauge section.
struct HoloLineBundle {
  const Backend* B = nullptr;
  FieldSet F;
  BiHermitian H;
  // Covector components (n complex entries) of alpha_{+-} at a point.
  std::function<CVec(const RVec&)> alpha_p, alpha_m;
  // Hermitian scale: h = e^{2f} h_0.
  std::function<Real(const RVec&)> fscale;

  static HoloLineBundle make(const Backend& B, const FieldSet& F, const BiHermitian& H,
                             std::function<CVec(const RVec&)> ap,
                             std::function<CVec(const RVec&)> am,
                             std::function<Real(const RVec&)> f = nullptr) {
    HoloLineBundle V;
    V.B = &B;
    V.F = F;
    V.H = H;
    V.alpha_p = std::move(ap);
    V.alpha_m = std::move(am);
    V.fscale = f ? std::move(f) : [](const RVec&) { return 0.0; };
    return V;
  }

  static HoloLineBundle trivial(const Backend& B, const FieldSet& F,
                                const BiHermitian& H,
                                std::function<Real(const RVec&)> f = nullptr) {
    const int n = B.n();
    auto zero = [n](const RVec&) { return CVec(CVec::Zero(n)); };
    return make(B, F, H, zero, zero, std::move(f));
  }

  int rank() const { return 1; }
  GenComplexStructure structure(const RVec& p) const { return H.at(F, p); }

  RVec grad_f(const RVec& p) const {
    const int n = B->n();
    auto wrap = [this](const RVec& q) {
      CVec v(1);
      v(0) = fscale(q);
      return v;
    };
    RVec g(n);
    for (int i = 0; i < n; ++i) g(i) = B->d_closure(wrap, p, i)(0).real();
    return g;
  }

  // dbar_J s = u^{0,1} (x) s as a section of T^{1,0}: the lifts of the metric
  // duals of alpha_{+-} carry the classical data, and the scale f contributes
  // the (0,1)-part of -df.  The 1/2 compensates the <.,.>-pairing doubling in
  // the section-to-form identification.
  CVec u01_section(const RVec& p) const {
    const GenMetric G = F.metric(p);
    const int n = G.n();
    const CVec ap = alpha_p(p), am = alpha_m(p);
    const RMat gi = G.g.llt().solve(RMat::Identity(n, n));
    CVec u = CVec::Zero(2 * n);
    for (int part : {0, 1}) {
      const CVec& a = part == 0 ? ap : am;
      const int s = part == 0 ? +1 : -1;
      const CVec Xa = gi.cast<Cplx>() * a;
      CVec lift(2 * n);
      lift.head(n) = Xa;
      lift.tail(n) = ((G.b + Real(s) * G.g).cast<Cplx>()) * Xa;
      u += Real(part == 0 ? 0.5 : -0.5) * lift;
    }
    CVec udf = CVec::Zero(2 * n);
    udf.tail(n) = grad_f(p).cast<Cplx>();
    u -= structure(p).p10() * udf;
    return u;
  }

  // Connection form of the generalized Chern connection in this gauge:
  // theta = (u^{0,1} - conj u^{0,1}) as a TM-form (imaginary valued).
  TFormField connection_form() const {
    TFormField t;
    const HoloLineBundle* self = this;
    t.val = [self](const RVec& q) {
      const CVec u = self->u01_section(q);
      const CVec w = u - u.conjugate();
      const int n = static_cast<int>(u.size()) / 2;
      CVec comps(2 * n);
      comps.head(n) = w.tail(n);
      comps.tail(n) = w.head(n);
      return GTForm::one_form(comps);
    };
    t.invariant = false;
    return t;
  }

  // The (0,1)-form u^{0,1} itself as a TM-form field (for dbar-flatness).
  TFormField u01_form() const {
    TFormField t;
    const HoloLineBundle* self = this;
    t.val = [self](const RVec& q) {
      const CVec u = self->u01_section(q);
      const int n = static_cast<int>(u.size()) / 2;
      CVec comps(2 * n);
      comps.head(n) = u.tail(n);
      comps.tail(n) = u.head(n);
      return GTForm::one_form(comps);
    };
    t.invariant = false;
    return t;
  }
};

// ---------------------------------------------------------------------------
// Chern curvature
// ---------------------------------------------------------------------------

// |(0,2)-component of dT u^{0,1}|: vanishes iff dbar_J o dbar_J = 0 at p.
inline Real jholo_residual(const HoloLineBundle& V, const GenConnection& D,
                           const RVec& p) {
  const GTForm du = dT(D, V.u01_form(), p);
  return type_project(V.structure(p), du, 0, 2).norm_inf();
}

// F^{T,C} = dT theta for the Chern connection form theta; imaginary valued.
inline GTForm chern_curvature(const HoloLineBundle& V, const GenConnection& D,
                              const RVec& p, bool check = false, Real tol = 1e-6) {
  if (check && jholo_residual(V, D, p) > tol)
    throw std::invalid_argument("chern_curvature: dbar datum is not flat");
  return dT(D, V.connection_form(), p);
}

// |(2,0)| + |(0,2)| components of the Chern curvature.
inline Real chern_type_residual(const HoloLineBundle& V, const GenConnection& D,
                                const RVec& p) {
  const GTForm Fg = chern_curvature(V, D, p);
  const GenComplexStructure Jc = V.structure(p);
  return type_project(Jc, Fg, 2, 0).norm_inf() + type_project(Jc, Fg, 0, 2).norm_inf();
}

// ---------------------------------------------------------------------------
// Classical (eigendecomposition) pipeline
// ---------------------------------------------------------------------------

// Connection 1-form nu_{+-} = alpha_{+-} - conj alpha_{+-} - i I_{+-}^T df of
// the classical Chern connection of (h, I_{+-}); imaginary valued covector.
inline CVec classical_nu(const HoloLineBundle& V, int sign, const RVec& p) {
  const CVec a = sign > 0 ? V.alpha_p(p) : V.alpha_m(p);
  const RMat I = sign > 0 ? V.H.Ip(p) : V.H.Im(p);
  const Cplx i(0.0, 1.0);
  return CVec(a - a.conjugate() - i * (I.transpose() * V.grad_f(p)).cast<Cplx>());
}

// Classical Chern curvature F_{+-} = d nu_{+-} as a 2-form over TM.
inline GTForm classical_chern_curvature(const HoloLineBundle& V, int sign,
                                        const RVec& p) {
  const int n = V.B->n();
  auto nucl = [&V, sign](const RVec& q) { return classical_nu(V, sign, q); };
  GTForm out(n, 2);
  for (int i = 0; i < n; ++i) {
    const CVec dnu = V.B->d_closure(nucl, p, i);
    CVec ei = CVec::Zero(n);
    ei(i) = 1.0;
    out += wedge(GTForm::one_form(ei), GTForm::one_form(dnu));
  }
  return out;
}

// Classical contraction Lambda_omega theta = (1/2) sum_i theta(V_i, I V_i)
// over a g-orthonormal tangent frame; Lambda(omega) = m.
inline Cplx lambda_classical(const GTForm& th, const RMat& g, const RMat& I) {
  const RMat V = detail::g_orthonormal_tangent_frame(g);
  Cplx s = 0.0;
  for (int i = 0; i < g.rows(); ++i)
    s += th.eval({V.col(i).cast<Cplx>(), (I * V.col(i)).cast<Cplx>()});
  return 0.5 * s;
}

// Hermitian form omega_{+-}(X, Y) = g(I_{+-} X, Y) as a 2-form over TM.
inline GTForm hermitian_form(const RMat& g, const RMat& I) {
  return GTForm::from_matrix(RMat(I.transpose() * g));
}

// epsilon = 0 if I_+ and I_- induce the same orientation, 1 otherwise
// (omega_+^m = (-1)^epsilon omega_-^m).
inline int epsilon_orientation(const RMat& g, const RMat& Ip, const RMat& Im) {
  const int n = static_cast<int>(g.rows()), m = n / 2;
  GTForm wp = hermitian_form(g, Ip), wm = hermitian_form(g, Im);
  GTForm tp = wp, tm = wm;
  for (int k = 1; k < m; ++k) {
    tp = wedge(tp, wp);
    tm = wedge(tm, wm);
  }
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  const Real a = tp.coeff(idx).real(), b = tm.coeff(idx).real();
  if (a == 0.0 || b == 0.0)
    throw std::invalid_argument("epsilon_orientation: degenerate Hermitian form");
  return a * b > 0.0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// Hermitian-Einstein equation, degrees, slope
// ---------------------------------------------------------------------------

// |i Lambda_{J-} F^{T,C} - 2c| at p (rank 1: scalar equation).
inline Real he_residual(const HoloLineBundle& V, const GenConnection& D, Real c,
                        const RVec& p) {
  const GTForm Fg = chern_curvature(V, D, p);
  const Cplx i(0.0, 1.0);
  const Cplx lam = lambda_jminus(Fg, V.F.metric(p), V.structure(p).J.cast<Cplx>());
  return std::abs(i * lam - Cplx(2.0 * c));
}

// Residual of the Hitchin wedge form
//   (i/2)(F_+ ^ omega_+^{m-1} + (-1)^eps F_- ^ omega_-^{m-1})
//     = c (m-1)! Id dvol,   dvol = omega_+^m / m!
// computed through the classical pipeline at p.
inline Real hitchin_form_residual(const HoloLineBundle& V, Real c, const RVec& p) {
  const GenMetric G = V.F.metric(p);
  const int n = G.n(), m = n / 2;
  const RMat Ip = V.H.Ip(p), Im = V.H.Im(p);
  const GTForm wp = hermitian_form(G.g, Ip), wm = hermitian_form(G.g, Im);
  const int eps = epsilon_orientation(G.g, Ip, Im);
  GTForm wpk = GTForm::scalar(n, 1.0), wmk = GTForm::scalar(n, 1.0);
  for (int k = 0; k < m - 1; ++k) {
    wpk = k == 0 ? wp : wedge(wpk, wp);
    wmk = k == 0 ? wm : wedge(wmk, wm);
  }
  const GTForm Fp = classical_chern_curvature(V, +1, p);
  const GTForm Fm = classical_chern_curvature(V, -1, p);
  const Cplx i(0.0, 1.0);
  GTForm lhs = wedge(Fp, wpk) + wedge(Fm, wmk) * Cplx(eps == 0 ? 1.0 : -1.0);
  lhs = lhs * (0.5 * i);
  GTForm dvol = wp;
  for (int k = 1; k < m; ++k) dvol = wedge(dvol, wp);
  Real fact = 1.0;
  for (int k = 2; k < m; ++k) fact *= k;  // (m-1)!
  Real mfact = 1.0;
  for (int k = 2; k <= m; ++k) mfact *= k;  // m!
  const GTForm rhs = dvol * Cplx(c * fact / mfact);
  return (lhs - rhs).norm_inf();
}

// deg_G = (i/4pi) Int tr Lambda_{J-}(F^{T,C}) dvol over the backend.
inline Real degree(const HoloLineBundle& V, const GenConnection& D) {
  const Cplx i(0.0, 1.0);
  return V.B->integrate([&](const RVec& p) {
           const GTForm Fg = chern_curvature(V, D, p);
           return (i * lambda_jminus(Fg, V.F.metric(p),
                                     V.structure(p).J.cast<Cplx>()))
               .real();
         }) /
         (4.0 * M_PI);
}

// Classical degrees deg_{+-} = (i/2pi) Int Lambda_{+-}(F_{+-}) dvol.
inline std::pair<Real, Real> classical_degrees(const HoloLineBundle& V) {
  const Cplx i(0.0, 1.0);
  auto one = [&](int sign) {
    return V.B->integrate([&](const RVec& p) {
             const GenMetric G = V.F.metric(p);
             const RMat I = sign > 0 ? V.H.Ip(p) : V.H.Im(p);
             return (i * lambda_classical(classical_chern_curvature(V, sign, p), G.g,
                                          I))
                 .real();
           }) /
           (2.0 * M_PI);
  };
  return {one(+1), one(-1)};
}

inline Real slope(const HoloLineBundle& V, const GenConnection& D) {
  return degree(V, D) / V.rank();
}

// Hermitian-Einstein constant on a Gauduchon background:
// c = 2 pi deg_G / (rank Vol).
inline Real he_constant(const HoloLineBundle& V, const GenConnection& D) {
  const Real vol = V.B->integrate([](const RVec&) { return 1.0; });
  return 2.0 * M_PI * degree(V, D) / (V.rank() * vol);
}

// ---------------------------------------------------------------------------
// Gauduchon condition and the operator P_J
// ---------------------------------------------------------------------------

// P_J(f) = -i Lambda_{J-}(del_J dbar_J f); second order elliptic in f.
// Assumes the generalized complex structure is constant on the chart.
inline Real pj_operator(const GenConnection& D, const BiHermitian& H,
                        const std::function<Cplx(const RVec&)>& f, const RVec& p) {
  const int n = D.backend().n();
  const GenComplexStructure Jc = H.at(D.fields(), p);
  const TFormField f0 = scalar_field(2 * n, f);
  const TFormField dbarf = projected_dT_field(D, Jc, f0, 0, 1);
  const GTForm ddbar = type_project(Jc, dT(D, dbarf, p), 1, 1);
  const Cplx i(0.0, 1.0);
  return (-i * lambda_jminus(ddbar, D.fields().metric(p), Jc.J.cast<Cplx>())).real();
}

// max over the test functions of |(1/2pi) Int P_J(f) dvol|: the obstruction
// to metric-independence of deg_G (zero iff G^b is J-Gauduchon against the
// span of the basis).
inline Real gauduchon_residual(const GenConnection& D, const BiHermitian& H,
                               const std::vector<std::function<Cplx(const RVec&)>>& fs) {
  Real r = 0.0;
  for (const auto& f : fs) {
    const Real v = D.backend().integrate(
        [&](const RVec& p) { return pj_operator(D, H, f, p); });
    r = std::max(r, std::abs(v) / (2.0 * M_PI));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Classical exterior calculus helpers (for the Gauduchon wedge form)
// ---------------------------------------------------------------------------

// Exterior derivative of a TM-form field by finite differences on a
// coordinate backend: d theta = sum_i dx^i ^ (d_i theta).
inline GTForm classical_d(const Backend& B,
                          const std::function<GTForm(const RVec&)>& th, const RVec& p) {
  const int n = B.n();
  const GTForm th0 = th(p);
  GTForm out(n, th0.degree() + 1);
  for (int i = 0; i < n; ++i) {
    auto flat = [&th](const RVec& q) { return th(q).raw(); };
    GTForm di(n, th0.degree());
    di.raw() = B.d_closure(flat, p, i);
    CVec ei = CVec::Zero(n);
    ei(i) = 1.0;
    out += wedge(GTForm::one_form(ei), di);
  }
  return out;
}

// (p,q)-type projection of a TM-form with respect to a classical almost
// complex structure I.
inline GTForm classical_type_project(const RMat& I, const GTForm& th, int p, int q) {
  const int n = th.dim(), k = th.degree();
  if (p < 0 || q < 0 || p + q != k)
    throw std::invalid_argument("classical_type_project: need p + q = degree");
  if (k == 0) return th;
  const Cplx i(0.0, 1.0);
  const CMat P10 = 0.5 * (CMat::Identity(n, n) - i * I.cast<Cplx>());
  const CMat P01 = P10.conjugate();
  GTForm out(n, k);
  std::vector<int> sel(k, 0);
  std::fill(sel.begin(), sel.begin() + p, 1);
  do {
    std::vector<CMat> Ms(k);
    for (int j = 0; j < k; ++j) Ms[j] = sel[j] ? P10 : P01;
    out += slot_compose(th, Ms);
  } while (std::prev_permutation(sel.begin(), sel.end()));
  return out;
}

// |del_+ dbar_+ (omega_+^{m-1}) + (-1)^eps del_- dbar_- (omega_-^{m-1})| at p:
// the classical form of the J-Gauduchon condition (m <= 3).
inline Real gauduchon_form_residual(const Backend& B, const FieldSet& F,
                                    const BiHermitian& H, const RVec& p) {
  const int n = B.n(), m = n / 2;
  if (m > 3)
    throw std::invalid_argument("gauduchon_form_residual: implemented for m <= 3");
  const RMat Ip0 = H.Ip(p), Im0 = H.Im(p);
  const int eps = epsilon_orientation(F.metric(p).g, Ip0, Im0);
  auto piece = [&](int sign) {
    auto Ifn = sign > 0 ? H.Ip : H.Im;
    auto wk = [&, sign](const RVec& q) {
      const GTForm w = hermitian_form(F.metric(q).g, Ifn(q));
      GTForm out = w;
      for (int k = 1; k < m - 1; ++k) out = wedge(out, w);
      if (m == 1) out = GTForm::scalar(n, 1.0);
      return out;
    };
    // dbar(omega^{m-1}) = (m-1, m)-projection of d(omega^{m-1}).
    auto dbar_wk = [&](const RVec& q) {
      return classical_type_project(Ifn(q), classical_d(B, wk, q), m - 1, m);
    };
    // del of that = (m, m)-projection of d.
    return classical_type_project(Ifn(p), classical_d(B, dbar_wk, p), m, m);
  };
  const GTForm total =
      piece(+1) + piece(-1) * Cplx(eps == 0 ? 1.0 : -1.0);
  return total.norm_inf();
}

}  // namespace gengeo
