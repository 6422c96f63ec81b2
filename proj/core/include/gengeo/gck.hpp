// Generalized (almost) complex and Hermitian structures: J operators built
// from bi-Hermitian data (g, b, I_+, I_-), integrability diagnostics
// (Nijenhuis tensors, the generalized Kahler condition), the (p,q)-type
// decomposition with the del/dbar split of dT, the dbar-diamond
// holomorphicity defect, and the J-Ricci form with its classical Bismut
// block assembly.
#pragma once

#include "gengeo/curvature.hpp"

#include <algorithm>
#include <map>
#include <utility>

namespace gengeo {

// ---------------------------------------------------------------------------
// Generalized complex structures
// ---------------------------------------------------------------------------

// max |I^T g I - g|: compatibility of an almost complex structure with g.
inline Real hermitian_residual(const RMat& g, const RMat& I) {
  return (I.transpose() * g * I - g).cwiseAbs().maxCoeff();
}

struct GenComplexStructure {
  RMat J;  // 2n x 2n, acting on standard fiber coordinates

  int d() const { return static_cast<int>(J.rows()); }
  int n() const { return d() / 2; }

  Real involution_residual() const {
    return (J * J + RMat::Identity(d(), d())).cwiseAbs().maxCoeff();
  }
  // <J x, J y> = <x, y>
  Real pairing_residual() const {
    const RMat P = pairing(n());
    return (J.transpose() * P * J - P).cwiseAbs().maxCoeff();
  }
  Real metric_commutator(const GenMetric& G) const {
    const RMat Gb = G.Gb();
    return (J * Gb - Gb * J).cwiseAbs().maxCoeff();
  }

  RMat j_minus(const GenMetric& G) const { return RMat(G.Gb() * J); }

  // Projector onto the +i eigenbundle T^{1,0} (and its conjugate T^{0,1}).
  CMat p10() const {
    const Cplx i(0.0, 1.0);
    return CMat(0.5 * (CMat::Identity(d(), d()) - i * J.cast<Cplx>()));
  }
  CMat p01() const { return CMat(p10().conjugate()); }
};

// Assemble J on TM + T*M from almost Hermitian pairs (g, I_+), (g, I_-) and
// the 2-form b: J acts as I_+ on C_{b,+} and as I_- on C_{b,-}.
inline GenComplexStructure from_bihermitian(const GenMetric& G, const RMat& Ip,
                                            const RMat& Im) {
  const int n = G.n();
  if (hermitian_residual(G.g, Ip) > 1e-8 || hermitian_residual(G.g, Im) > 1e-8)
    throw std::invalid_argument("from_bihermitian: g is not Hermitian for I_+/I_-");
  RMat J(2 * n, 2 * n);
  for (int a = 0; a < 2 * n; ++a) {
    const RVec u = RVec::Unit(2 * n, a);
    const auto parts = G.project_pm(u);
    J.col(a) =
        G.lift_pm(RVec(Ip * parts[0]), +1) + G.lift_pm(RVec(Im * parts[1]), -1);
  }
  return {J};
}

// Recover (I_+, I_-) as the tangent actions of J on the eigenbundle lifts.
inline std::pair<RMat, RMat> to_bihermitian(const GenComplexStructure& Jc,
                                            const GenMetric& G) {
  const int n = G.n();
  RMat Ip(n, n), Im(n, n);
  for (int i = 0; i < n; ++i) {
    const RVec e = RVec::Unit(n, i);
    Ip.col(i) = (Jc.J * G.lift_pm(e, +1)).head(n);
    Im.col(i) = (Jc.J * G.lift_pm(e, -1)).head(n);
  }
  return {Ip, Im};
}

// Point-dependent bi-Hermitian pair; together with a FieldSet it determines
// the generalized almost Hermitian data.
struct BiHermitian {
  std::function<RMat(const RVec&)> Ip, Im;

  static BiHermitian constant(const RMat& Ip, const RMat& Im) {
    BiHermitian H;
    H.Ip = [Ip](const RVec&) { return Ip; };
    H.Im = [Im](const RVec&) { return Im; };
    return H;
  }

  GenComplexStructure at(const FieldSet& F, const RVec& p) const {
    return from_bihermitian(F.metric(p), Ip(p), Im(p));
  }
};

// ---------------------------------------------------------------------------
// Nijenhuis tensors and the generalized Kahler condition
// ---------------------------------------------------------------------------

// Nijenhuis tensor of I from the 3-form phi (valid when nabla^{+-phi} I = 0):
//   g(N(X,Y), .) = phi(IX, IY, .) + phi(IX, Y, I.) + phi(X, IY, I.) - phi(X, Y, .)
inline RVec nijenhuis_via_phi(const GenMetric& G, const GTForm& phi, const RMat& I,
                              const RVec& X, const RVec& Y) {
  const RVec IX = I * X, IY = I * Y;
  auto cov = [&phi](const RVec& A, const RVec& B) {
    return RVec(phi.contract(A).contract(B).raw().real());
  };
  const RVec c = cov(IX, IY) + I.transpose() * cov(IX, Y) +
                 I.transpose() * cov(X, IY) - cov(X, Y);
  return G.g.llt().solve(c);
}

// N(X,Y) = [X,Y] + I[IX,Y] + I[X,IY] - [IX,IY] for constant frame coefficient
// fields X, Y, with the brackets differentiated through the backend.
inline CVec nijenhuis_fd(const Backend& B, const std::function<RMat(const RVec&)>& I,
                         const RVec& X, const RVec& Y, const RVec& p) {
  const int n = B.n();
  auto plain = [n](const RVec& v) {
    Section s;
    CVec c = CVec::Zero(2 * n);
    c.head(n) = v.cast<Cplx>();
    s.val = [c](const RVec&) { return c; };
    s.invariant = true;
    return s;
  };
  auto rotated = [n, &I](const RVec& v) {
    Section s;
    s.val = [n, I, v](const RVec& q) {
      CVec c = CVec::Zero(2 * n);
      c.head(n) = (I(q) * v).cast<Cplx>();
      return c;
    };
    s.invariant = false;
    return s;
  };
  const Section sX = plain(X), sY = plain(Y), sIX = rotated(X), sIY = rotated(Y);
  const CMat Ip = I(p).cast<Cplx>();
  return lie_bracket(B, sX, sY, p) + Ip * lie_bracket(B, sIX, sY, p) +
         Ip * lie_bracket(B, sX, sIY, p) - lie_bracket(B, sIX, sIY, p);
}

// max |phi(I_- e_a, e_b, e_c) + phi(e_a, I_+ e_b, e_c)|: membership in the
// model space of G^b-metric gamma-J-connection differences.
inline Real lemma_model_residual(const GTForm& phi, const RMat& Ip, const RMat& Im) {
  const int n = static_cast<int>(Ip.rows());
  Real r = 0.0;
  for (int a = 0; a < n; ++a) {
    const GTForm f1 = phi.contract(RVec(Im.col(a)));
    const GTForm f2 = phi.contract(RVec(RVec::Unit(n, a)));
    for (int b = 0; b < n; ++b) {
      const CVec w = f1.contract(RVec(RVec::Unit(n, b))).raw() +
                     f2.contract(RVec(Ip.col(b))).raw();
      r = std::max(r, w.cwiseAbs().maxCoeff());
    }
  }
  return r;
}

// max over +- and frame directions of |nabla^{+-phi}_{E_i} I_{+-}|: zero
// exactly on generalized Kahler data.
inline Real gk_condition_residual(const Backend& B, const FieldSet& F,
                                  const BiHermitian& H, const RVec& p) {
  const int n = B.n();
  const FramePoint fp = frame_point(B, F, p);
  Real r = 0.0;
  for (int s : {+1, -1}) {
    const auto& Ifn = s > 0 ? H.Ip : H.Im;
    const auto& gam = s > 0 ? fp.gam_p : fp.gam_m;
    const RMat I0 = Ifn(p);
    auto flat = [&Ifn, n](const RVec& q) {
      const RMat I = Ifn(q);
      CVec v(n * n);
      for (int a = 0; a < n; ++a)
        for (int c = 0; c < n; ++c) v(a * n + c) = I(a, c);
      return v;
    };
    for (int i = 0; i < n; ++i) {
      CMat nab = (gam[i] * I0 - I0 * gam[i]).cast<Cplx>();
      const CVec d = B.d_closure(flat, p, i);
      for (int a = 0; a < n; ++a)
        for (int c = 0; c < n; ++c) nab(a, c) += d(a * n + c);
      r = std::max(r, nab.cwiseAbs().maxCoeff());
    }
  }
  return r;
}

// max over frame directions of |D^{phi,B}_{e_a} J| for the Bismut lift:
// vanishes iff the gk condition does.
inline Real bismut_dJ_residual(const Backend& B, const FieldSet& F,
                               const BiHermitian& H, const RVec& p) {
  const int n = B.n(), d = 2 * n;
  GenConnection D(B, ConnKind::Bismut, F);
  const ExtPoint e = ext_point(D, p);
  auto Jfn = [&F, &H](const RVec& q) {
    return from_bihermitian(F.metric(q), H.Ip(q), H.Im(q)).J;
  };
  const CMat J0 = Jfn(p).cast<Cplx>();
  auto flat = [&Jfn, d](const RVec& q) {
    const RMat J = Jfn(q);
    CVec v(d * d);
    for (int a = 0; a < d; ++a)
      for (int c = 0; c < d; ++c) v(a * d + c) = J(a, c);
    return v;
  };
  Real r = 0.0;
  for (int a = 0; a < d; ++a) {
    CMat nab = e.Dm[a] * J0 - J0 * e.Dm[a];
    if (a < n) {
      const CVec dv = B.d_closure(flat, p, a);
      for (int i = 0; i < d; ++i)
        for (int c = 0; c < d; ++c) nab(i, c) += dv(i * d + c);
    }
    r = std::max(r, nab.cwiseAbs().maxCoeff());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Type decomposition and the del / dbar split
// ---------------------------------------------------------------------------

// theta composed with one matrix per slot: out(x_1,..,x_k) = theta(M_1 x_1, ...).
inline GTForm slot_compose(const GTForm& th, const std::vector<CMat>& Ms) {
  const int d = th.dim(), k = th.degree();
  GTForm cur = th;
  for (int slot = 0; slot < k; ++slot) {
    const CMat& M = Ms[slot];
    GTForm next(d, k);
    detail::for_each_index(d, k, [&](const std::vector<int>& idx) {
      Cplx s = 0;
      std::vector<int> jdx = idx;
      for (int c = 0; c < d; ++c) {
        if (M(c, idx[slot]) == Cplx(0)) continue;
        jdx[slot] = c;
        s += M(c, idx[slot]) * cur.coeff(jdx);
      }
      next.set_coeff(idx, s);
    });
    cur = next;
  }
  return cur;
}

// Component of theta in Omega^{p,q}_J: the part supported on p arguments from
// T^{1,0} and q arguments from T^{0,1}.
inline GTForm type_project(const GenComplexStructure& Jc, const GTForm& th, int p,
                           int q) {
  const int d = th.dim(), k = th.degree();
  if (p < 0 || q < 0 || p + q != k)
    throw std::invalid_argument("type_project: need p, q >= 0 with p + q = degree");
  if (k == 0) return th;
  const CMat P10 = Jc.p10(), P01 = Jc.p01();
  GTForm out(d, k);
  std::vector<int> sel(k, 0);
  std::fill(sel.begin(), sel.begin() + p, 1);
  do {
    std::vector<CMat> Ms(k);
    for (int j = 0; j < k; ++j) Ms[j] = sel[j] ? P10 : P01;
    out += slot_compose(th, Ms);
  } while (std::prev_permutation(sel.begin(), sel.end()));
  return out;
}

// Norms of all (p,q)-components; the values sum up to theta.
inline std::map<std::pair<int, int>, Real> type_component_norms(
    const GenComplexStructure& Jc, const GTForm& th) {
  std::map<std::pair<int, int>, Real> out;
  const int k = th.degree();
  for (int p = 0; p <= k; ++p)
    out[{p, k - p}] = type_project(Jc, th, p, k - p).norm_inf();
  return out;
}

// A degree-0 form field from a scalar closure.
inline TFormField scalar_field(int dim, std::function<Cplx(const RVec&)> f) {
  TFormField t;
  t.val = [dim, f](const RVec& q) { return GTForm::scalar(dim, f(q)); };
  t.invariant = false;
  return t;
}

struct DbarSplit {
  GTForm del;          // (p+1, q) component of dT theta
  GTForm dbar;         // (p, q+1) component of dT theta
  Real leakage = 0.0;  // mass outside the two predicted bidegrees
};

// Split dT theta for theta of declared type (p, q).
inline DbarSplit dbar_split(const GenConnection& D, const GenComplexStructure& Jc,
                            const TFormField& th, int p, int q, const RVec& pt) {
  const GTForm dth = dT(D, th, pt);
  DbarSplit out;
  out.del = type_project(Jc, dth, p + 1, q);
  out.dbar = type_project(Jc, dth, p, q + 1);
  out.leakage = (dth - out.del - out.dbar).norm_inf();
  return out;
}

// Form field q -> (p,q)-projection of dT theta at q, for iterated splits.
inline TFormField projected_dT_field(const GenConnection& D,
                                     const GenComplexStructure& Jc,
                                     const TFormField& th, int p, int q) {
  TFormField out;
  const GenConnection* Dp = &D;
  out.val = [Dp, Jc, th, p, q](const RVec& pt) {
    return type_project(Jc, dT(*Dp, th, pt), p, q);
  };
  out.invariant = false;
  return out;
}

// ---------------------------------------------------------------------------
// The dbar-diamond defect on T^{1,0}
// ---------------------------------------------------------------------------

// Leibniz defect x <> (y <> z) - y <> (x <> z) - (x <> y) <> z; equals the
// cyclic curvature sum R_{x,y} z + R_{y,z} x + R_{z,x} y.
inline CVec diamond_defect(const GenConnection& D, const Section& x, const Section& y,
                           const Section& z, const RVec& p) {
  return diamond(D, x, diamond_section(D, y, z), p) -
         diamond(D, y, diamond_section(D, x, z), p) -
         diamond(D, diamond_section(D, x, y), z, p);
}

// R_{x,y} z from the assembled curvature tensor, extended complex-linearly.
inline CVec tensor_curvature_action(const CurvatureTensor& T, const CVec& x,
                                    const CVec& y, const CVec& z) {
  const int d = T.d();
  const CMat FS = (T.frame.transpose() * T.sigma).cast<Cplx>();
  const CVec cx = FS * x, cy = FS * y, cz = FS * z;
  CVec out = CVec::Zero(d);
  for (int a = 0; a < d; ++a) {
    if (cx(a) == Cplx(0)) continue;
    for (int b = 0; b < d; ++b) {
      if (cy(b) == Cplx(0)) continue;
      for (int c = 0; c < d; ++c) {
        const Cplx w = cx(a) * cy(b) * cz(c);
        if (w == Cplx(0)) continue;
        out += w * T.op(a, b, c).cast<Cplx>();
      }
    }
  }
  return out;
}

// (dbar_diamond o dbar_diamond)_{xb, yb} z as the projected Leibniz defect.
inline CVec dbar_diamond_defect(const GenConnection& D, const GenComplexStructure& Jc,
                                const CVec& xb, const CVec& yb, const CVec& z,
                                const RVec& p) {
  return CVec(Jc.p10() * diamond_defect(D, Section::constant(xb),
                                        Section::constant(yb), Section::constant(z),
                                        p));
}

// The same obstruction assembled from the R^{+-phi} curvature blocks.
inline CVec dbar_diamond_blocks(const CurvatureTensor& T, const GenComplexStructure& Jc,
                                const CVec& xb, const CVec& yb, const CVec& z) {
  const CVec r = tensor_curvature_action(T, xb, yb, z) +
                 tensor_curvature_action(T, yb, z, xb) +
                 tensor_curvature_action(T, z, xb, yb);
  return CVec(Jc.p10() * r);
}

// max mismatch between the bracket route and the curvature-block route over a
// spanning family of T^{0,1} x T^{0,1} x T^{1,0} triples.
inline Real dbar_diamond_residual(const GenConnection& D, const GenComplexStructure& Jc,
                                  const RVec& p) {
  const int d = 2 * D.backend().n();
  const CurvatureTensor T = riemann_tensor(D, p, CurvRoute::Blocks);
  const CMat P10 = Jc.p10(), P01 = Jc.p01();
  const CMat F = D.frame(p).G.orthonormal_frame().cast<Cplx>();
  Real m = 0.0;
  for (int a = 0; a < d; ++a)
    for (int b = a + 1; b < d; ++b)
      for (int c = 0; c < d; ++c) {
        const CVec xb = P01 * F.col(a), yb = P01 * F.col(b), z = P10 * F.col(c);
        const CVec diff = dbar_diamond_defect(D, Jc, xb, yb, z, p) -
                          dbar_diamond_blocks(T, Jc, xb, yb, z);
        m = std::max(m, diff.cwiseAbs().maxCoeff());
      }
  return m;
}

// ---------------------------------------------------------------------------
// J-Ricci form and J-scalar curvature
// ---------------------------------------------------------------------------

// rho_J(x, y) = sum_a R(x, y, J f_a, f_a) over the G^b-orthonormal frame, as
// a 2-form over standard fiber coordinates.
inline GTForm rho_j(const CurvatureTensor& T, const GenComplexStructure& Jc) {
  const int d = T.d();
  const RMat FS = T.frame.transpose() * T.sigma;  // coordinates map
  const RMat W = FS * Jc.J * T.frame;             // J f_c in frame coordinates
  RMat rf = RMat::Zero(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      Real v = 0.0;
      for (int c = 0; c < d; ++c)
        for (int cp = 0; cp < d; ++cp) v += W(cp, c) * T.val(a, b, cp, c);
      rf(a, b) = v;
    }
  // Back to standard coordinates: rho(x, y) = rf(coords x, coords y).
  return GTForm::from_matrix(RMat(FS.transpose() * rf * FS));
}

// S_J = sum_a rho_J(J f_a, f_a).
inline Real s_j(const CurvatureTensor& T, const GenComplexStructure& Jc) {
  const GTForm rho = rho_j(T, Jc);
  const CMat M = rho.as_matrix();
  Cplx s = 0;
  for (int a = 0; a < T.d(); ++a) {
    const CVec jf = (Jc.J * T.frame.col(a)).cast<Cplx>();
    s += (jf.transpose() * M * T.frame.col(a).cast<Cplx>())(0);
  }
  return s.real();
}

namespace detail {

inline RMat g_orthonormal_tangent_frame(const RMat& g) {
  const RMat L = g.llt().matrixL();
  return RMat(L.transpose().inverse());
}

}  // namespace detail

// Classical Bismut-Ricci form rho_{+-}(E_j, E_k) = sum_i R^{+-phi}(E_j, E_k,
// I V_i, V_i) over a g-orthonormal tangent frame V.
inline RMat classical_bismut_ricci_form(const ClassicalCurvature& C, const RMat& I,
                                        int sign) {
  const auto& t4 = sign > 0 ? C.rp : C.rm;
  const int n = C.n;
  const RMat V = detail::g_orthonormal_tangent_frame(C.g);
  const RMat IV = I * V;
  RMat rho = RMat::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      Real v = 0.0;
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < n; ++c)
          for (int e = 0; e < n; ++e) v += IV(c, i) * V(e, i) * C.r(t4, j, k, c, e);
      rho(j, k) = v;
    }
  return rho;
}

// S_{+-} = sum_{ij} R^{+-phi}(I V_i, V_i, I' V_j, V_j) with (I, I') the
// matching pair: (I_+, I_+) / (I_-, I_-) for the pure scalars, (I_-, I_+)
// with sign +1 (or (I_+, I_-) with sign -1) for the mixed one.
inline Real classical_bismut_scalar(const ClassicalCurvature& C, const RMat& I,
                                    const RMat& Iprime, int sign) {
  const RMat rho = classical_bismut_ricci_form(C, Iprime, sign);
  const int n = C.n;
  const RMat V = detail::g_orthonormal_tangent_frame(C.g);
  const RMat IV = I * V;
  Real s = 0.0;
  for (int i = 0; i < n; ++i) s += (IV.col(i).transpose() * rho * V.col(i))(0);
  return s;
}

}  // namespace gengeo
