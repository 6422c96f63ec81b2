// Curvature operators and tensors: the generalized Riemann tensor with its
// eigendecomposition, the Jacobiator closed form, Ricci and scalar
// curvatures, the Bismut connection curvature, Bianchi residuals, line
// bundle curvature decompositions, Chern-Weil traces, and the Yang-Mills
// functional.
#pragma once

#include "gengeo/connections.hpp"

namespace gengeo {

// ---------------------------------------------------------------------------
// Classical curvature data of (g, phi) at a point, in frame components
// ---------------------------------------------------------------------------

struct ClassicalCurvature {
  int n = 0;
  RMat g, gi;
  // Lowered curvature tensors R(i, j, k, l) = g(R(E_i, E_j) E_k, E_l) for the
  // Levi-Civita connection and its +-phi modifications, flat length n^4.
  std::vector<Real> r0, rp, rm;
  // Covariant derivatives (nabla_{E_i} phi)_{jkl}, flat n^4, per connection.
  std::vector<Real> np0, npp, npm;
  RMat dstar_phi;  // (d* phi)(E_j, E_k)
  RMat phi2;       // phi^2(E_j, E_k) = sum phi(E_j, V_a, V_b) phi(E_k, V_a, V_b)
  RMat ric0, ric_p, ric_m;  // Rc(X, Y) = sum_a R(X, V_a, V_a, Y)
  Real scal = 0.0;          // classical scalar curvature of g
  Real phi_norm_sq = 0.0;   // sum_{a<b<c} phi(V_a, V_b, V_c)^2

  static long idx4(int n, int i, int j, int k, int l) {
    return ((static_cast<long>(i) * n + j) * n + k) * n + l;
  }
  Real r(const std::vector<Real>& t, int i, int j, int k, int l) const {
    return t[idx4(n, i, j, k, l)];
  }
};

inline ClassicalCurvature classical_curvature(const Backend& B, const FieldSet& F,
                                              const RVec& p) {
  ClassicalCurvature C;
  const int n = B.n();
  C.n = n;
  FramePoint fp = frame_point(B, F, p);
  C.g = fp.G.g;
  C.gi = fp.gi;

  // Frame derivatives of the three Christoffel families and of phi.
  // dgam[s][i][j] = d_i Gamma^{(s)}_j with s in {0 -> LC, 1 -> +phi, 2 -> -phi}.
  std::vector<std::vector<std::vector<RMat>>> dgam(
      3, std::vector<std::vector<RMat>>(n, std::vector<RMat>(n, RMat::Zero(n, n))));
  std::vector<GTForm> dphi(n, GTForm(n, 3));
  if (!F.invariant) {
    const long block = static_cast<long>(n) * n * n;
    auto flat = [&B, &F, n, block](const RVec& q) {
      FramePoint f = frame_point(B, F, q);
      CVec v(3 * block);
      for (int j = 0; j < n; ++j)
        for (int a = 0; a < n; ++a)
          for (int c = 0; c < n; ++c) {
            const long at = (static_cast<long>(j) * n + a) * n + c;
            v(at) = f.gam[j](a, c);
            v(block + at) = f.gam_p[j](a, c);
            v(2 * block + at) = f.gam_m[j](a, c);
          }
      return v;
    };
    for (int i = 0; i < n; ++i) {
      CVec d = B.d_closure(flat, p, i);
      for (int j = 0; j < n; ++j)
        for (int a = 0; a < n; ++a)
          for (int c = 0; c < n; ++c) {
            const long at = (static_cast<long>(j) * n + a) * n + c;
            dgam[0][i][j](a, c) = d(at).real();
            dgam[1][i][j](a, c) = d(block + at).real();
            dgam[2][i][j](a, c) = d(2 * block + at).real();
          }
      auto phicl = [&F](const RVec& q) { return F.phi(q).raw(); };
      dphi[i].raw() = B.d_closure(phicl, p, i);
    }
  }

  std::vector<std::vector<RVec>> Cb(n, std::vector<RVec>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) Cb[i][j] = B.frame_bracket(i, j);

  // R(E_i, E_j) E_k = (d_i G_j - d_j G_i + G_i G_j - G_j G_i - C^m_{ij} G_m) e_k
  auto build = [&](int s, const std::vector<RMat>& gam, std::vector<Real>& out) {
    out.assign(static_cast<long>(n) * n * n * n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        RMat op = dgam[s][i][j] - dgam[s][j][i] + gam[i] * gam[j] - gam[j] * gam[i];
        for (int m = 0; m < n; ++m) op -= Cb[i][j](m) * gam[m];
        RMat low = C.g * op;  // low(l, k) = g(R(E_i,E_j)E_k, E_l)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            out[ClassicalCurvature::idx4(n, i, j, k, l)] = low(l, k);
      }
  };
  build(0, fp.gam, C.r0);
  build(1, fp.gam_p, C.rp);
  build(2, fp.gam_m, C.rm);

  // (nabla^{(s)}_{E_i} phi)_{jkl}
  auto nphi = [&](const std::vector<RMat>& gam, std::vector<Real>& out) {
    out.assign(static_cast<long>(n) * n * n * n, 0.0);
    std::vector<int> id(3);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            id = {j, k, l};
            Real v = dphi[i].coeff(id).real();
            for (int m = 0; m < n; ++m) {
              id = {m, k, l};
              v -= gam[i](m, j) * fp.phi.coeff(id).real();
              id = {j, m, l};
              v -= gam[i](m, k) * fp.phi.coeff(id).real();
              id = {j, k, m};
              v -= gam[i](m, l) * fp.phi.coeff(id).real();
            }
            out[ClassicalCurvature::idx4(n, i, j, k, l)] = v;
          }
  };
  nphi(fp.gam, C.np0);
  nphi(fp.gam_p, C.npp);
  nphi(fp.gam_m, C.npm);

  // (d* phi)(E_j, E_k) = - g^{il} (nabla_{E_i} phi)(E_l, E_j, E_k)
  C.dstar_phi = RMat::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      Real v = 0.0;
      for (int i = 0; i < n; ++i)
        for (int l = 0; l < n; ++l) v -= C.gi(i, l) * C.np0[ClassicalCurvature::idx4(n, i, l, j, k)];
      C.dstar_phi(j, k) = v;
    }

  // phi^2 and |phi|^2 (g-raised index sums; both orders of the pair counted
  // in phi^2, strictly increasing triples in |phi|^2).
  C.phi2 = RMat::Zero(n, n);
  std::vector<int> id(3);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      Real v = 0.0;
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          for (int c = 0; c < n; ++c)
            for (int d = 0; d < n; ++d) {
              id = {j, a, b};
              const Real pj = fp.phi.coeff(id).real();
              id = {k, c, d};
              const Real pk = fp.phi.coeff(id).real();
              v += pj * pk * C.gi(a, c) * C.gi(b, d);
            }
      C.phi2(j, k) = v;
    }
  Real pn = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int ap = 0; ap < n; ++ap)
          for (int bp = 0; bp < n; ++bp)
            for (int cp = 0; cp < n; ++cp) {
              id = {a, b, c};
              const Real p1 = fp.phi.coeff(id).real();
              id = {ap, bp, cp};
              const Real p2 = fp.phi.coeff(id).real();
              pn += p1 * p2 * C.gi(a, ap) * C.gi(b, bp) * C.gi(c, cp);
            }
  C.phi_norm_sq = pn / 6.0;

  // Ricci tensors Rc(X, Y) = sum_a R(X, V_a, V_a, Y) = g^{il} R(E_j, E_i, E_l, E_k)
  auto ricci = [&](const std::vector<Real>& t) {
    RMat rc = RMat::Zero(n, n);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        Real v = 0.0;
        for (int i = 0; i < n; ++i)
          for (int l = 0; l < n; ++l) v += C.gi(i, l) * t[ClassicalCurvature::idx4(n, j, i, l, k)];
        rc(j, k) = v;
      }
    return rc;
  };
  C.ric0 = ricci(C.r0);
  C.ric_p = ricci(C.rp);
  C.ric_m = ricci(C.rm);
  C.scal = (C.gi * C.ric0).trace();
  return C;
}

// ---------------------------------------------------------------------------
// Generalized curvature tensor in a G^b-orthonormal frame
// ---------------------------------------------------------------------------

struct CurvatureTensor {
  int n = 0;
  RMat frame;  // columns f_a: lift_+(V_i) for a < n, lift_-(V_i) for a >= n
  RMat sigma;  // G^b(x, y) = x^T sigma y
  std::vector<Real> t;  // T(a,b,c,d) = R(f_a, f_b, f_c, f_d), flat (2n)^4

  int d() const { return 2 * n; }
  long at(int a, int b, int c, int e) const {
    const long m = d();
    return ((static_cast<long>(a) * m + b) * m + c) * m + e;
  }
  Real& ref(int a, int b, int c, int e) { return t[at(a, b, c, e)]; }
  Real val(int a, int b, int c, int e) const { return t[at(a, b, c, e)]; }

  // Multilinear evaluation on fiber vectors in standard coordinates.
  Real eval(const RVec& x, const RVec& y, const RVec& z, const RVec& w) const {
    const RVec cx = frame.transpose() * sigma * x, cy = frame.transpose() * sigma * y;
    const RVec cz = frame.transpose() * sigma * z, cw = frame.transpose() * sigma * w;
    Real s = 0.0;
    const int m = d();
    for (int a = 0; a < m; ++a) {
      if (cx(a) == 0.0) continue;
      for (int b = 0; b < m; ++b) {
        if (cy(b) == 0.0) continue;
        for (int c = 0; c < m; ++c) {
          if (cz(c) == 0.0) continue;
          for (int e = 0; e < m; ++e) s += cx(a) * cy(b) * cz(c) * cw(e) * val(a, b, c, e);
        }
      }
    }
    return s;
  }

  // R_{f_a, f_b} f_c as a fiber vector in standard coordinates.
  RVec op(int a, int b, int c) const {
    RVec v = RVec::Zero(d());
    for (int e = 0; e < d(); ++e) v += val(a, b, c, e) * frame.col(e);
    return v;
  }

  Real max_abs() const {
    Real m = 0.0;
    for (Real v : t) m = std::max(m, std::abs(v));
    return m;
  }

  // Ricci tensor components in the orthonormal frame:
  //   rc(a, b) = sum_alpha T(a, alpha, alpha, b)
  RMat ricci_frame() const {
    RMat rc = RMat::Zero(d(), d());
    for (int a = 0; a < d(); ++a)
      for (int b = 0; b < d(); ++b) {
        Real v = 0.0;
        for (int al = 0; al < d(); ++al) v += val(a, al, al, b);
        rc(a, b) = v;
      }
    return rc;
  }
};

enum class CurvRoute { Commutator, Blocks };

// R^T_{x,y} z by nested covariant derivatives (tensorial for TM-torsion free
// connections).
inline CVec curvature_op(const GenConnection& D, const Section& x, const Section& y,
                         const Section& z, const RVec& p) {
  const Section Dyz = D.apply_section(y, z);
  const Section Dxz = D.apply_section(x, z);
  const Section Dxy = D.apply_section(x, y);
  const Section Dyx = D.apply_section(y, x);
  return D.apply(x, Dyz, p) - D.apply(y, Dxz, p) - D.apply(Dxy, z, p) +
         D.apply(Dyx, z, p);
}

// Curvature of a connection whose derivative depends only on the tangent
// part of the direction (e.g. the Bismut connection): the bracket term is the
// Lie bracket of the anchors. For TM-torsion free connections this coincides
// with curvature_op.
inline CVec anchored_curvature_op(const GenConnection& D, const Section& x,
                                  const Section& y, const Section& z, const RVec& p) {
  const Backend& B = D.backend();
  const int n = B.n();
  const Section Dyz = D.apply_section(y, z);
  const Section Dxz = D.apply_section(x, z);
  CVec br = CVec::Zero(2 * n);
  br.head(n) = lie_bracket(B, x, y, p);
  return D.apply(x, Dyz, p) - D.apply(y, Dxz, p) -
         D.apply(Section::constant(br), z, p);
}

inline CurvatureTensor riemann_tensor(const GenConnection& D, const RVec& p,
                                      CurvRoute route) {
  const Backend& B = D.backend();
  const int n = B.n(), d = 2 * n;
  FramePoint fp = D.frame(p);
  CurvatureTensor T;
  T.n = n;
  T.frame = fp.G.orthonormal_frame();
  T.sigma = fp.G.Gb().transpose() * pairing(n);
  T.t.assign(static_cast<long>(d) * d * d * d, 0.0);

  if (route == CurvRoute::Commutator) {
    const bool anchored = D.kind() == ConnKind::Bismut;
    std::vector<Section> f(d);
    for (int a = 0; a < d; ++a) f[a] = Section::constant(RVec(T.frame.col(a)));
    const RMat SF = T.sigma * T.frame;  // column e: sigma * f_e
    for (int a = 0; a < d; ++a)
      for (int b = a + 1; b < d; ++b)
        for (int c = 0; c < d; ++c) {
          const CVec v = anchored ? anchored_curvature_op(D, f[a], f[b], f[c], p)
                                  : curvature_op(D, f[a], f[b], f[c], p);
          for (int e = 0; e < d; ++e) {
            const Real s = (v.transpose() * SF.col(e).cast<Cplx>())(0).real();
            T.ref(a, b, c, e) = s;
            T.ref(b, a, c, e) = -s;
          }
        }
    return T;
  }

  // Block assembly from the classical tensors, rotated into the g-orthonormal
  // tangent frame V (the tangent parts of the first n frame columns).
  ClassicalCurvature C = classical_curvature(B, D.fields(), p);
  const RMat V = T.frame.topLeftCorner(n, n);
  auto rot = [&](const std::vector<Real>& t4) {
    std::vector<Real> out(static_cast<long>(n) * n * n * n, 0.0);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          for (int e = 0; e < n; ++e) {
            Real s = 0.0;
            for (int i = 0; i < n; ++i)
              for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                  for (int l = 0; l < n; ++l)
                    s += t4[ClassicalCurvature::idx4(n, i, j, k, l)] * V(i, a) * V(j, b) *
                         V(k, c) * V(l, e);
            out[ClassicalCurvature::idx4(n, a, b, c, e)] = s;
          }
    return out;
  };
  auto rot3 = [&](const std::vector<Real>& t4) {
    // (nabla^{s}_{V_a} phi)(V_b, V_c, V_e)
    return rot(t4);
  };
  const std::vector<Real> R0 = rot(C.r0), Rp = rot(C.rp), Rm = rot(C.rm);
  const std::vector<Real> Np = rot3(C.npp), Nm = rot3(C.npm);
  auto g4 = [&](const std::vector<Real>& t4, int a, int b, int c, int e) {
    return t4[ClassicalCurvature::idx4(n, a, b, c, e)];
  };

  const bool bismut = D.kind() == ConnKind::Bismut;
  const bool lift = D.kind() == ConnKind::LiftLC;
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c)
        for (int e = 0; e < d; ++e) {
          const int sc = (c < n) ? +1 : -1, se = (e < n) ? +1 : -1;
          if (sc != se) continue;  // mixed last-pair chirality vanishes
          const int A = a % n, Bq = b % n, Cq = c % n, E = e % n;
          const int sa = (a < n) ? +1 : -1, sb = (b < n) ? +1 : -1;
          Real v = 0.0;
          if (lift) {
            v = g4(R0, A, Bq, Cq, E);
          } else if (bismut) {
            v = (sc > 0) ? g4(Rp, A, Bq, Cq, E) : g4(Rm, A, Bq, Cq, E);
          } else {
            // D^{phi,b}: Prop-4.1-type blocks.
            const std::vector<Real>& Rs = (sc > 0) ? Rp : Rm;
            const std::vector<Real>& Ns = (sc > 0) ? Np : Nm;
            if (sa == sc && sb == sc) {
              v = g4(R0, A, Bq, Cq, E);
            } else if (sa == -sc && sb == sc) {
              v = g4(Rs, A, Bq, Cq, E) - 0.5 * sc * g4(Ns, A, Bq, Cq, E);
            } else if (sa == sc && sb == -sc) {
              v = -(g4(Rs, Bq, A, Cq, E) - 0.5 * sc * g4(Ns, Bq, A, Cq, E));
            } else {  // both opposite
              v = g4(Rs, A, Bq, Cq, E);
            }
          }
          T.ref(a, b, c, e) = v;
        }
  return T;
}

// ---------------------------------------------------------------------------
// Ricci and scalar curvatures
// ---------------------------------------------------------------------------

struct RicciOperator {
  int n = 0;
  RMat frame;  // G^b-orthonormal frame used for the components
  RMat rc;     // rc(a, b) = Rc(f_a, f_b)
  RMat ric;    // operator on standard fiber coordinates: Rc(x,y) = G^b(ric x, y)

  Real symmetry_residual() const { return (rc - rc.transpose()).norm(); }
  Real trace() const { return rc.trace(); }
};

inline RicciOperator ricci_from_tensor(const CurvatureTensor& T, const GenMetric& G) {
  RicciOperator R;
  R.n = T.n;
  R.frame = T.frame;
  R.rc = T.ricci_frame();
  const RMat sigma = G.Gb().transpose() * pairing(T.n);
  R.ric = T.frame * R.rc * T.frame.transpose() * sigma;
  return R;
}

inline RicciOperator ricci_phib(const GenConnection& D, const RVec& p,
                                CurvRoute route = CurvRoute::Blocks) {
  return ricci_from_tensor(riemann_tensor(D, p, route), D.frame(p).G);
}

// (S^{phi,b}, S^{phi,B}) = (2S, 2S - 3 |phi|^2): traces of the Ricci tensors
// of D^{phi,b} and of the Bismut connection over the orthonormal frame.
inline std::pair<Real, Real> scalar_curvatures(const Backend& B, const FieldSet& F,
                                               const RVec& p) {
  GenConnection Dp(B, ConnKind::PhiB, F);
  GenConnection Db(B, ConnKind::Bismut, F);
  const Real s1 = ricci_phib(Dp, p).trace();
  const Real s2 = ricci_phib(Db, p).trace();
  return {s1, s2};
}

inline CurvatureTensor bismut_curvature(const Backend& B, const FieldSet& F,
                                        const RVec& p,
                                        CurvRoute route = CurvRoute::Blocks) {
  GenConnection D(B, ConnKind::Bismut, F);
  return riemann_tensor(D, p, route);
}

inline RicciOperator bismut_ricci(const Backend& B, const FieldSet& F, const RVec& p,
                                  CurvRoute route = CurvRoute::Blocks) {
  GenConnection D(B, ConnKind::Bismut, F);
  return ricci_phib(D, p, route);
}

// ---------------------------------------------------------------------------
// Jacobiator and Bianchi identities
// ---------------------------------------------------------------------------

inline Section diamond_section(const GenConnection& D, const Section& x,
                               const Section& y) {
  Section r;
  const GenConnection* self = &D;
  r.val = [self, x, y](const RVec& q) { return diamond(*self, x, y, q); };
  r.invariant = x.invariant && y.invariant && D.fields().invariant;
  return r;
}

// [x <> y <> z] = (x <> y) <> z + c.p., by brute force.
inline CVec jacobiator_brute(const GenConnection& D, const Section& x, const Section& y,
                             const Section& z, const RVec& p) {
  return diamond(D, diamond_section(D, x, y), z, p) +
         diamond(D, diamond_section(D, y, z), x, p) +
         diamond(D, diamond_section(D, z, x), y, p);
}

// Closed form for D^{phi,b}: [x^{b+-} <> y^{b+-} <> z^{b-+}] = +-2 g(R^{-+phi}_{X,Y} Z),
// extended multilinearly over the chirality decomposition; all other patterns
// vanish.  Returns a fiber vector (pure covector).
inline CVec jacobiator_closed(const GenConnection& D, const Section& x, const Section& y,
                              const Section& z, const RVec& p) {
  const Backend& B = D.backend();
  const int n = B.n();
  FramePoint fp = D.frame(p);
  ClassicalCurvature C = classical_curvature(B, D.fields(), p);
  const CMat g = fp.G.g.cast<Cplx>(), b = fp.G.b.cast<Cplx>(), gi = fp.gi.cast<Cplx>();

  auto project = [&](const CVec& c, int s) {
    const CVec X = c.head(n), xi = c.tail(n);
    return CVec(0.5 * (X + Real(s) * gi * (xi - b * X)));
  };
  // Operator R^{s phi}_{A, B} applied to Cq, from the lowered tensor.
  auto rop = [&](const std::vector<Real>& t4, const CVec& A, const CVec& Bv,
                 const CVec& Cv) {
    CVec low = CVec::Zero(n);  // g(R_{A,B} C, E_l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            low(l) += A(i) * Bv(j) * Cv(k) * t4[ClassicalCurvature::idx4(n, i, j, k, l)];
    return CVec(gi * low);  // raised: R_{A,B} C
  };

  const CVec cx = x.val(p), cy = y.val(p), cz = z.val(p);
  CVec cov = CVec::Zero(n);
  for (int s : {+1, -1}) {
    const std::vector<Real>& Rms = (s > 0) ? C.rm : C.rp;  // R^{-s phi}
    const CVec Xs = project(cx, s), Ys = project(cy, s), Zs = project(cz, s);
    const CVec Xo = project(cx, -s), Yo = project(cy, -s), Zo = project(cz, -s);
    // (s, s, -s): + s * 2 g(R^{-s}_{Xs, Ys} Zo)
    cov += Real(s) * 2.0 * (g * rop(Rms, Xs, Ys, Zo));
    // (s, -s, s): - s * 2 g(R^{-s}_{Xs, Zs} Yo)
    cov -= Real(s) * 2.0 * (g * rop(Rms, Xs, Zs, Yo));
    // (-s, s, s): + s * 2 g(R^{-s}_{Ys, Zs} Xo)
    cov += Real(s) * 2.0 * (g * rop(Rms, Ys, Zs, Xo));
  }
  CVec out = CVec::Zero(2 * n);
  out.tail(n) = cov;
  return out;
}

struct BianchiResiduals {
  Real algebraic = 0.0;     // first Bianchi against the closed form
  Real differential = 0.0;  // second Bianchi for the Bismut lift
};

inline BianchiResiduals bianchi_residuals(const Backend& B, const FieldSet& F,
                                          const RVec& p) {
  BianchiResiduals out;
  const int n = B.n(), d = 2 * n;
  GenConnection D(B, ConnKind::PhiB, F);
  CurvatureTensor T = riemann_tensor(D, p, CurvRoute::Blocks);
  ClassicalCurvature C = classical_curvature(B, F, p);
  const RMat V = T.frame.topLeftCorner(n, n);
  FramePoint fp = D.frame(p);

  auto rop = [&](const std::vector<Real>& t4, const RVec& A, const RVec& Bv,
                 const RVec& Cv) {
    RVec low = RVec::Zero(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            low(l) += A(i) * Bv(j) * Cv(k) * t4[ClassicalCurvature::idx4(n, i, j, k, l)];
    return RVec(fp.gi * low);
  };

  for (int a = 0; a < d; ++a)
    for (int b = a + 1; b < d; ++b)
      for (int c = b + 1; c < d; ++c) {
        const RVec lhs = T.op(a, b, c) + T.op(b, c, a) + T.op(c, a, b);
        // Closed form: non-zero only when exactly two entries share chirality.
        RVec rhs = RVec::Zero(d);
        const int sa = (a < n) ? 1 : -1, sb = (b < n) ? 1 : -1, sc = (c < n) ? 1 : -1;
        if (!(sa == sb && sb == sc)) {
          // Identify the two same-chirality entries (u, v) and the odd one w;
          // track the sign of the permutation (the cyclic sum is totally
          // antisymmetric).
          int u, v, w;
          Real sign;
          if (sa == sb) {
            u = a; v = b; w = c; sign = 1.0;
          } else if (sa == sc) {
            u = a; v = c; w = b; sign = -1.0;
          } else {
            u = b; v = c; w = a; sign = 1.0;
          }
          const int s = (u < n) ? 1 : -1;  // chirality of the pair
          const RVec U = V.col(u % n), W = V.col(v % n), Z = V.col(w % n);
          // [x^{b s}, y^{b s}, z^{b -s}] = s * 2 g(R^{-s phi}_{X,Y} Z)
          const std::vector<Real>& Rms = (s > 0) ? C.rm : C.rp;
          RVec cov = Real(s) * 2.0 * sign * (fp.G.g * rop(Rms, U, W, Z));
          // The right side of the first Bianchi identity equals minus the
          // Jacobiator; compare with -[x<>y<>z].
          rhs.tail(n) = -cov;
        }
        out.algebraic = std::max(out.algebraic, (lhs - rhs).norm());
      }

  // Differential Bianchi for the Bismut lift: d^{phi,b}_D R^{phi,B} = 0.
  GenConnection DB(B, ConnKind::Bismut, F);
  std::vector<Section> f(d);
  for (int a = 0; a < d; ++a) f[a] = Section::constant(RVec(T.frame.col(a)));
  auto curv_section = [&](const Section& y, const Section& z, const Section& w) {
    Section r;
    r.val = [&DB, y, z, w](const RVec& q) {
      return anchored_curvature_op(DB, y, z, w, q);
    };
    r.invariant = F.invariant;
    return r;
  };
  for (int a = 0; a < d; ++a)
    for (int b = a + 1; b < d; ++b)
      for (int c = b + 1; c < d; ++c) {
        // Only a few test vectors keep the cost reasonable.
        for (int e = 0; e < d; e += (d > 2 ? 3 : 1)) {
          CVec acc = CVec::Zero(d);
          const int tri[3][3] = {{a, b, c}, {b, c, a}, {c, a, b}};
          for (const auto& t3 : tri) {
            const Section &x = f[t3[0]], &y = f[t3[1]], &z = f[t3[2]];
            // D_x (F_{y,z} w) - F_{D^T_x y, z} w - F_{y, D^T_x z} w - F_{y,z} (D_x w)
            acc += DB.apply(x, curv_section(y, z, f[e]), p);
            acc -= anchored_curvature_op(DB, D.apply_section(x, y), z, f[e], p);
            acc -= anchored_curvature_op(DB, y, D.apply_section(x, z), f[e], p);
            acc -= anchored_curvature_op(DB, y, z, DB.apply_section(x, f[e]), p);
          }
          out.differential = std::max(out.differential, acc.norm());
        }
      }
  return out;
}

// max |R^{+phi}(X,Y,Z,W) - R^{-phi}(Z,W,X,Y)| over frame indices (requires
// d phi = 0).
inline Real double_switch(const Backend& B, const FieldSet& F, const RVec& p) {
  ClassicalCurvature C = classical_curvature(B, F, p);
  const int n = C.n;
  Real m = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          m = std::max(m, std::abs(C.r(C.rp, i, j, k, l) - C.r(C.rm, k, l, i, j)));
  return m;
}

// ---------------------------------------------------------------------------
// Line bundle curvature decompositions, Chern-Weil traces, Yang-Mills
// ---------------------------------------------------------------------------

// Classical data of a unitary line bundle connection at a point.
struct LineBundlePoint {
  CVec nu_plus, nu_minus, nu0, psi, Z;  // frame components
};

inline LineBundlePoint line_bundle_point(const Backend& B, const LineBundleConnection& L,
                                         const RVec& p) {
  auto e = L.eigendecompose(B, p);
  return {e.nu_plus, e.nu_minus, e.nu0, e.psi, e.Z};
}

namespace detail {

// d nu(X, Y) for constant frame vectors: X(nu(Y)) - Y(nu(X)) - nu([X, Y]).
inline Cplx dnu(const Backend& B, const std::function<CVec(const RVec&)>& nu,
                bool invariant, const CVec& X, const CVec& Y, const RVec& p) {
  const int n = B.n();
  Cplx v = 0;
  if (!invariant) {
    auto nuYt = [&nu, Y](const RVec& q) {
      CVec r(1);
      r(0) = (nu(q).transpose() * Y)(0);
      return r;
    };
    auto nuXt = [&nu, X](const RVec& q) {
      CVec r(1);
      r(0) = (nu(q).transpose() * X)(0);
      return r;
    };
    for (int i = 0; i < n; ++i) {
      v += X(i) * B.d_closure(nuYt, p, i)(0);
      v -= Y(i) * B.d_closure(nuXt, p, i)(0);
    }
  }
  const CVec nup = nu(p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const RVec Cb = B.frame_bracket(i, j);
      for (int m = 0; m < n; ++m) v -= X(i) * Y(j) * Cb(m) * nup(m);
    }
  return v;
}

}  // namespace detail

// i F^{b}_{+-; X, Y} by the commutator definition, applied to the unit section
// (X, Y constant frame vectors).
inline Cplx mixed_curvature_def(const Backend& B, const FieldSet& F,
                                const LineBundleConnection& L, const CVec& X,
                                const CVec& Y, const RVec& p) {
  const int n = B.n();
  FramePoint fp = frame_point(B, F, p);
  const Cplx I(0.0, 1.0);
  auto nup = [&B, &L](const RVec& q) { return L.eigendecompose(B, q).nu_plus; };
  auto num = [&B, &L](const RVec& q) { return L.eigendecompose(B, q).nu_minus; };
  const bool inv = F.invariant && L.u.invariant;

  // a(q) = nabla_{-,Y} 1 = -i nu_-(Y); nabla_{+,X} a = X(a) - i nu_+(X) a.
  auto aY = [&num, Y, I](const RVec& q) {
    CVec r(1);
    r(0) = -I * (num(q).transpose() * Y)(0);
    return r;
  };
  auto bX = [&nup, X, I](const RVec& q) {
    CVec r(1);
    r(0) = -I * (nup(q).transpose() * X)(0);
    return r;
  };
  Cplx t1 = 0, t2 = 0;
  if (!inv)
    for (int i = 0; i < n; ++i) {
      t1 += X(i) * B.d_closure(aY, p, i)(0);
      t2 += Y(i) * B.d_closure(bX, p, i)(0);
    }
  t1 += -I * (nup(p).transpose() * X)(0) * aY(p)(0);
  t2 += -I * (num(p).transpose() * Y)(0) * bX(p)(0);
  // - nabla_{-, nabla^{-phi}_X Y} 1 and + nabla_{+, nabla^{+phi}_Y X} 1
  const CVec W1 = fp.gamma_along(X, -1) * Y;
  const CVec W2 = fp.gamma_along(Y, +1) * X;
  const Cplx t3 = -(-I * (num(p).transpose() * W1)(0));
  const Cplx t4 = +(-I * (nup(p).transpose() * W2)(0));
  return I * (t1 + t3 - t2 + t4);
}

// i F_{+-} = d nu_+(X,Y) - 2 [X(psi(Y)) - psi(nabla^{+phi}_X Y)] - 2 phi(Z, X, Y)
inline Cplx mixed_curvature_decompose(const Backend& B, const FieldSet& F,
                                      const LineBundleConnection& L, const CVec& X,
                                      const CVec& Y, const RVec& p) {
  const int n = B.n();
  FramePoint fp = frame_point(B, F, p);
  const bool inv = F.invariant && L.u.invariant;
  auto nup = [&B, &L](const RVec& q) { return L.eigendecompose(B, q).nu_plus; };
  auto psi = [&B, &L](const RVec& q) { return L.eigendecompose(B, q).psi; };
  Cplx v = detail::dnu(B, nup, inv, X, Y, p);
  Cplx xpsiY = 0;
  if (!inv) {
    auto psiY = [&psi, Y](const RVec& q) {
      CVec r(1);
      r(0) = (psi(q).transpose() * Y)(0);
      return r;
    };
    for (int i = 0; i < n; ++i) xpsiY += X(i) * B.d_closure(psiY, p, i)(0);
  }
  const CVec W = fp.gamma_along(X, +1) * Y;
  v -= 2.0 * (xpsiY - (psi(p).transpose() * W)(0));
  const CVec Z = L.eigendecompose(B, p).Z;
  v -= 2.0 * fp.phi.contract(Z).contract(X).contract(Y).raw()(0);
  return v;
}

// i F_{+-} = d nu_0(X,Y) - phi(Z,X,Y) - [(nabla_X psi)(Y) + (nabla_Y psi)(X)]
inline Cplx mixed_curvature_alternative(const Backend& B, const FieldSet& F,
                                        const LineBundleConnection& L, const CVec& X,
                                        const CVec& Y, const RVec& p) {
  const int n = B.n();
  FramePoint fp = frame_point(B, F, p);
  const bool inv = F.invariant && L.u.invariant;
  auto nu0 = [&B, &L](const RVec& q) { return L.eigendecompose(B, q).nu0; };
  auto psi = [&B, &L](const RVec& q) { return L.eigendecompose(B, q).psi; };
  Cplx v = detail::dnu(B, nu0, inv, X, Y, p);
  const CVec Z = L.eigendecompose(B, p).Z;
  v -= fp.phi.contract(Z).contract(X).contract(Y).raw()(0);
  auto covpsi = [&](const CVec& A, const CVec& Bv) {
    Cplx s = 0;
    if (!inv) {
      auto psiB = [&psi, Bv](const RVec& q) {
        CVec r(1);
        r(0) = (psi(q).transpose() * Bv)(0);
        return r;
      };
      for (int i = 0; i < n; ++i) s += A(i) * B.d_closure(psiB, p, i)(0);
    }
    s -= (psi(p).transpose() * (fp.gamma_along(A, 0) * Bv))(0);
    return s;
  };
  v -= covpsi(X, Y) + covpsi(Y, X);
  return v;
}

// Yang-Mills functional of the line bundle connection, via the G^b-norm of
// the curvature 2-form.
inline Real yang_mills(const GenConnection& D, const LineBundleConnection& L) {
  const Backend& B = D.backend();
  return B.integrate([&](const RVec& p) {
    GTForm iF = line_bundle_curvature(D, L, p);
    return form_norm_sq(iF, D.frame(p).G);
  });
}

// The split YM(nabla_+) + YM(nabla_-) + 2 int |F_{+-}|^2, with the classical
// norms |A|^2 = 1/2 sum_{ab} |A(V_a, V_b)|^2 over a g-orthonormal frame.
inline Real yang_mills_split(const GenConnection& D, const LineBundleConnection& L) {
  const Backend& B = D.backend();
  const int n = B.n();
  const FieldSet& F = D.fields();
  return B.integrate([&](const RVec& p) {
    FramePoint fp = frame_point(B, F, p);
    const RMat V = fp.G.orthonormal_frame().topLeftCorner(n, n);
    const bool inv = F.invariant && L.u.invariant;
    auto nup = [&B, &L](const RVec& q) { return L.eigendecompose(B, q).nu_plus; };
    auto num = [&B, &L](const RVec& q) { return L.eigendecompose(B, q).nu_minus; };
    Real s = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        const CVec Va = V.col(a).cast<Cplx>(), Vb = V.col(b).cast<Cplx>();
        const Cplx fp_ = detail::dnu(B, nup, inv, Va, Vb, p);
        const Cplx fm_ = detail::dnu(B, num, inv, Va, Vb, p);
        const Cplx fx = mixed_curvature_def(B, F, L, Va, Vb, p);
        s += 0.5 * std::norm(fp_) + 0.5 * std::norm(fm_) + std::norm(fx);
      }
    return s;
  });
}

// tr (i F^T)^k as a TM-form (rank-1 bundle: the k-th wedge power).
inline GTForm chern_trace(const GenConnection& D, const LineBundleConnection& L, int k,
                          const RVec& p) {
  GTForm iF = line_bundle_curvature(D, L, p);
  GTForm out = iF;
  for (int i = 1; i < k; ++i) out = wedge(out, iF);
  return out;
}

// First Chern number on a 2-dimensional backend: (1/2pi) int iF(e_1^{b+}, e_2^{b+}).
inline Real chern_number(const GenConnection& D, const LineBundleConnection& L) {
  const Backend& B = D.backend();
  if (B.n() != 2) throw std::invalid_argument("chern_number requires n = 2");
  return B.integrate([&](const RVec& p) {
           GTForm iF = line_bundle_curvature(D, L, p);
           GenMetric G = D.fields().metric(p);
           RVec e1 = RVec::Zero(2), e2 = RVec::Zero(2);
           e1(0) = 1.0;
           e2(1) = 1.0;
           const Cplx v = iF.eval(
               {G.lift_pm(e1, +1).cast<Cplx>(), G.lift_pm(e2, +1).cast<Cplx>()});
           return v.real() / std::sqrt(G.g.determinant());
         }) /
         (2.0 * M_PI);
}

}  // namespace gengeo
