#pragma once

// Bochner and Hodge Laplacians, the Weitzenbock identity, the invariant
// reduced complex and its cohomology, pseudo-cohomology kernels, parallel
// 1-forms, and Chevalley-Eilenberg cohomology for compact group backends.

#include <gengeo/curvature.hpp>

#include <Eigen/SVD>

#include <algorithm>
#include <map>
#include <vector>

namespace gengeo {

// ---------------------------------------------------------------------------
// Small linear-algebra helpers (SVD rank / kernel with relative threshold)
// ---------------------------------------------------------------------------

inline int rank_of(const RMat& A, Real tol = 1e-8) {
  if (A.rows() == 0 || A.cols() == 0) return 0;
  Eigen::ColPivHouseholderQR<RMat> qr(A);
  qr.setThreshold(tol);
  return static_cast<int>(qr.rank());
}

namespace detail {

inline int svd_rank(const Eigen::JacobiSVD<RMat>& svd, Real tol) {
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > tol * s(0)) ++r;
  return r;
}

}  // namespace detail

// Orthonormal basis (columns) of the null space of A.
inline RMat null_space(const RMat& A, Real tol = 1e-8) {
  if (A.rows() == 0) return RMat::Identity(A.cols(), A.cols());
  Eigen::JacobiSVD<RMat> svd(A, Eigen::ComputeFullV);
  const int r = detail::svd_rank(svd, tol);
  return svd.matrixV().rightCols(A.cols() - r);
}

// Orthonormal basis (columns) of the column space of A.
inline RMat column_space(const RMat& A, Real tol = 1e-8) {
  Eigen::JacobiSVD<RMat> svd(A, Eigen::ComputeFullU);
  const int r = detail::svd_rank(svd, tol);
  if (r == 0) return RMat::Zero(A.rows(), 0);
  return svd.matrixU().leftCols(r);
}

// Orthonormal basis of the orthogonal complement of the column space of A.
inline RMat complement_space(const RMat& A, Real tol = 1e-8) {
  if (A.cols() == 0) return RMat::Identity(A.rows(), A.rows());
  Eigen::JacobiSVD<RMat> svd(A, Eigen::ComputeFullU);
  const int r = detail::svd_rank(svd, tol);
  return svd.matrixU().rightCols(A.rows() - r);
}

// ---------------------------------------------------------------------------
// Bases of invariant forms
// ---------------------------------------------------------------------------

inline std::vector<std::vector<int>> index_combinations(int d, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> idx(k);
  std::function<void(int, int)> rec = [&](int start, int pos) {
    if (pos == k) {
      out.push_back(idx);
      return;
    }
    for (int i = start; i < d; ++i) {
      idx[pos] = i;
      rec(i + 1, pos + 1);
    }
  };
  rec(0, 0);
  return out;
}

// Unit antisymmetric basis form theta_I with theta(e_{i1},..,e_{ik}) = 1.
inline GTForm basis_form(int d, const std::vector<int>& idx) {
  const int k = static_cast<int>(idx.size());
  GTForm f(d, k);
  if (k == 0) {
    f.raw()(0) = 1.0;
    return f;
  }
  std::vector<int> perm(k);
  detail::for_each_permutation(k, [&](const std::vector<int>& p, int sign) {
    for (int j = 0; j < k; ++j) perm[j] = idx[p[j]];
    f.set_coeff(perm, Real(sign));
  });
  return f;
}

// Independent components of an antisymmetric form against a combination basis.
inline RVec flatten_form(const GTForm& f, const std::vector<std::vector<int>>& basis) {
  RVec v(basis.size());
  for (size_t i = 0; i < basis.size(); ++i) v(i) = f.coeff(basis[i]).real();
  return v;
}

// ---------------------------------------------------------------------------
// The invariant complex: matrices of dT, dT*, the Jacobiator map J, and the
// form inner product per degree, for a translation/left-invariant backend.
// ---------------------------------------------------------------------------

struct InvariantComplex {
  int n = 0, d = 0;
  std::vector<std::vector<std::vector<int>>> bases;  // degree k = 0..d
  std::vector<RMat> dmat;   // dmat[k]: dim_k -> dim_{k+1} (k = 0..d-1)
  std::vector<RMat> dstar;  // dstar[k]: dim_k -> dim_{k-1} (k = 1..d)
  std::vector<RMat> jmat;   // jmat[k]: dim_k -> dim_{k+2}, brute-force Jacobiator
  std::vector<RMat> gram;   // form inner product per degree

  int dim(int k) const { return static_cast<int>(bases[k].size()); }

  // Hodge Laplacian matrix at degree k.
  RMat hodge(int k) const {
    RMat H = RMat::Zero(dim(k), dim(k));
    if (k < d) H += dstar[k + 1] * dmat[k];
    if (k > 0) H += dmat[k - 1] * dstar[k];
    return H;
  }
};

inline InvariantComplex invariant_complex(const GenConnection& D, const RVec& p) {
  const Backend& B = D.backend();
  const int n = B.n(), d = 2 * n;
  InvariantComplex C;
  C.n = n;
  C.d = d;
  C.bases.resize(d + 1);
  for (int k = 0; k <= d; ++k) C.bases[k] = index_combinations(d, k);

  const ExtPoint ep = ext_point(D, p);
  const CMat onf = ep.fp.G.orthonormal_frame().cast<Cplx>();

  // Jacobiator values on standard fiber basis triples.
  std::vector<Section> e(d);
  for (int a = 0; a < d; ++a) {
    RVec v = RVec::Zero(d);
    v(a) = 1.0;
    e[a] = Section::constant(v);
  }
  std::vector<std::vector<std::vector<CVec>>> jac(
      d, std::vector<std::vector<CVec>>(d, std::vector<CVec>(d)));
  for (int a = 0; a < d; ++a)
    for (int b = a + 1; b < d; ++b)
      for (int c = b + 1; c < d; ++c) {
        const CVec j = jacobiator_brute(D, e[a], e[b], e[c], p);
        // totally antisymmetric in (a, b, c)
        jac[a][b][c] = j;
        jac[b][c][a] = j;
        jac[c][a][b] = j;
        jac[b][a][c] = -j;
        jac[a][c][b] = -j;
        jac[c][b][a] = -j;
      }

  C.dmat.resize(d + 1);
  C.dstar.resize(d + 1);
  C.jmat.resize(d + 1);
  C.gram.resize(d + 1);
  for (int k = 0; k <= d; ++k) {
    const int mk = C.dim(k);
    const int mup = (k < d) ? C.dim(k + 1) : 0;
    const int mdown = (k > 0) ? C.dim(k - 1) : 0;
    const int mjj = (k + 2 <= d) ? C.dim(k + 2) : 0;
    RMat Dk = RMat::Zero(mup, mk), Sk = RMat::Zero(mdown, mk), Jk = RMat::Zero(mjj, mk);
    RMat Gk = RMat::Zero(mk, mk);
    std::vector<GTForm> onf_forms(mk, GTForm(d, k));
    for (int col = 0; col < mk; ++col) {
      const GTForm th = basis_form(d, C.bases[k][col]);
      TFormField f = TFormField::constant(th);
      if (k < d) Dk.col(col) = flatten_form(dT(D, f, p, &ep), C.bases[k + 1]);
      if (k > 0) Sk.col(col) = flatten_form(dT_star(D, f, p, &ep), C.bases[k - 1]);
      onf_forms[col] = th.change_basis(onf);
      // Brute-force Jacobiator map (eq of the curvature map): for a (k+2)-tuple
      // (J theta)(x_0..x_{k+1}) = sum_{i<j<l} (-1)^{i+j+l+1}
      //                           theta([x_i <> x_j <> x_l], rest).
      if (mjj > 0) {
        for (int row = 0; row < mjj; ++row) {
          const std::vector<int>& t = C.bases[k + 2][row];
          Cplx s = 0;
          for (int i = 0; i < k + 2; ++i)
            for (int j = i + 1; j < k + 2; ++j)
              for (int l = j + 1; l < k + 2; ++l) {
                std::vector<CVec> args;
                args.reserve(k + 1);
                args.push_back(jac[t[i]][t[j]][t[l]]);
                for (int r = 0; r < k + 2; ++r) {
                  if (r == i || r == j || r == l) continue;
                  CVec u = CVec::Zero(d);
                  u(t[r]) = 1.0;
                  args.push_back(u);
                }
                const Real sgn = ((i + j + l + 1) % 2) ? -1.0 : 1.0;
                s += sgn * th.eval(args);
              }
          Jk(row, col) = s.real();
        }
      }
    }
    const Real kfac = std::tgamma(k + 1.0);
    for (int a = 0; a < mk; ++a)
      for (int b = 0; b <= a; ++b) {
        const Real g =
            (onf_forms[a].raw().conjugate().transpose() * onf_forms[b].raw())(0).real() /
            kfac;
        Gk(a, b) = Gk(b, a) = g;
      }
    if (k < d) C.dmat[k] = Dk;
    if (k > 0) C.dstar[k] = Sk;
    C.jmat[k] = Jk;
    C.gram[k] = Gk;
  }
  return C;
}

// ---------------------------------------------------------------------------
// Reduced complex and its cohomology
// ---------------------------------------------------------------------------

struct ReducedCohomology {
  std::vector<int> dims;       // dim H~^k, k = 0..2n
  std::vector<RMat> quotient;  // orthonormal complement of img J per degree
  std::vector<RMat> dtilde;    // induced differential on the quotient model
  Real chain_residual = 0.0;   // max |dtilde o dtilde|
};

inline ReducedCohomology reduced_cohomology(const InvariantComplex& C, Real tol = 1e-8) {
  const int d = C.d;
  ReducedCohomology R;
  R.quotient.resize(d + 1);
  R.dtilde.resize(d + 1);
  // Noise floor relative to the overall scale of the complex, so that a map
  // whose entries are pure round-off does not get promoted to full rank by
  // the per-matrix relative threshold.
  Real scale = 0.0;
  for (int k = 0; k <= d; ++k) {
    if (C.dmat[k].size()) scale = std::max(scale, C.dmat[k].cwiseAbs().maxCoeff());
    if (C.jmat[k].size()) scale = std::max(scale, C.jmat[k].cwiseAbs().maxCoeff());
  }
  const Real floor = tol * std::max(scale, Real(1.0));
  auto cleaned = [&](const RMat& M) {
    return (M.size() && M.cwiseAbs().maxCoeff() < floor) ? RMat(RMat::Zero(M.rows(), M.cols()))
                                                         : M;
  };
  // Quotient model: orthogonal complement of img J_{k-2} inside degree k.
  for (int k = 0; k <= d; ++k) {
    if (k < 2 || C.jmat[k - 2].cols() == 0)
      R.quotient[k] = RMat::Identity(C.dim(k), C.dim(k));
    else
      R.quotient[k] = complement_space(cleaned(C.jmat[k - 2]), tol);
  }
  for (int k = 0; k < d; ++k)
    R.dtilde[k] = cleaned(RMat(R.quotient[k + 1].transpose() * C.dmat[k] * R.quotient[k]));
  for (int k = 0; k + 1 < d; ++k) {
    const RMat sq = R.dtilde[k + 1] * R.dtilde[k];
    if (sq.size()) R.chain_residual = std::max(R.chain_residual, sq.cwiseAbs().maxCoeff());
  }
  R.dims.resize(d + 1);
  for (int k = 0; k <= d; ++k) {
    const int mk = static_cast<int>(R.quotient[k].cols());
    const int rk = (k < d) ? rank_of(R.dtilde[k], tol) : 0;
    const int rkm = (k > 0) ? rank_of(R.dtilde[k - 1], tol) : 0;
    R.dims[k] = (mk - rk) - rkm;
  }
  return R;
}

// ---------------------------------------------------------------------------
// Pointwise Laplacians and the Weitzenbock identity
// ---------------------------------------------------------------------------

namespace detail {

// D_x theta at p along a constant fiber direction x.
inline GTForm cov_form_along(const GenConnection& D, const TFormField& th, const CVec& x,
                             const RVec& p, const ExtPoint& ep) {
  const Backend& B = D.backend();
  const int d = B.dim(), n = B.n();
  const GTForm thp = th.val(p);
  const int k = thp.degree();
  GTForm out(d, k);
  for (int i = 0; i < n; ++i)
    if (x(i) != Cplx(0)) out += x(i) * detail::d_tform(B, th, p, i, d, k);
  if (k == 0) return out;
  CMat Dme = CMat::Zero(d, d);
  for (int a = 0; a < d; ++a)
    if (x(a) != Cplx(0)) Dme += x(a) * ep.Dm[a];
  detail::for_each_index(d, k, [&](const std::vector<int>& idx) {
    Cplx s = out.coeff(idx);
    std::vector<int> jdx = idx;
    for (int j = 0; j < k; ++j) {
      const int bj = idx[j];
      for (int c = 0; c < d; ++c) {
        if (Dme(c, bj) == Cplx(0)) continue;
        jdx[j] = c;
        s -= Dme(c, bj) * thp.coeff(jdx);
      }
      jdx[j] = bj;
    }
    const_cast<GTForm&>(out).set_coeff(idx, s);
  });
  return out;
}

// The G^b-orthonormal frame column a as a section of TM (+) T*M.
inline Section onf_section(const Backend& B, const FieldSet& F, int a) {
  Section s;
  s.val = [&B, &F, a](const RVec& q) {
    const GenMetric G = F.metric(q);
    return CVec(G.orthonormal_frame().col(a).cast<Cplx>());
  };
  s.invariant = F.invariant;
  return s;
}

}  // namespace detail

// Bochner Laplacian of a TM-form field:
//   Delta_D theta = - sum_alpha [ D_{e_alpha}(D_{e_alpha} theta)
//                                 - D_{D_{e_alpha} e_alpha} theta ]
// over the G^b-orthonormal frame (both chiralities).
inline GTForm bochner_laplacian(const GenConnection& D, const TFormField& th,
                                const RVec& p) {
  const Backend& B = D.backend();
  const FieldSet& F = D.fields();
  const int d = B.dim();
  const ExtPoint ep = ext_point(D, p);
  const GTForm thp = th.val(p);
  GTForm out(d, thp.degree());
  for (int a = 0; a < d; ++a) {
    const Section ea = detail::onf_section(B, F, a);
    TFormField inner;
    inner.invariant = th.invariant && F.invariant;
    inner.val = [&D, &th, ea](const RVec& q) {
      return detail::cov_form_along(D, th, ea.val(q), q, ext_point(D, q));
    };
    out -= detail::cov_form_along(D, inner, ea.val(p), p, ep);
    const CVec w = D.apply_section(ea, ea).val(p);
    out += detail::cov_form_along(D, th, w, p, ep);
  }
  return out;
}

// Hodge Laplacian dT dT* + dT* dT of a TM-form field.
inline GTForm hodge_laplacian(const GenConnection& D, const TFormField& th,
                              const RVec& p) {
  const Backend& B = D.backend();
  const FieldSet& F = D.fields();
  const ExtPoint ep = ext_point(D, p);
  const GTForm thp = th.val(p);
  TFormField up, down;
  up.invariant = down.invariant = th.invariant && F.invariant;
  up.val = [&D, &th](const RVec& q) { return dT(D, th, q); };
  down.val = [&D, &th](const RVec& q) { return dT_star(D, th, q); };
  GTForm out = dT_star(D, up, p, &ep);
  if (thp.degree() > 0) out += dT(D, down, p, &ep);
  return out;
}

// Slot-wise action on forms of an endomorphism A of the fiber, transported
// through the 2<,> duality: (A theta)(x_1..x_k) = sum_j theta(.., B x_j, ..)
// with B = 4 P A^T P, so that for 1-forms (A theta) is (A u)-as-form.
inline GTForm endo_form_action(const RMat& A, const GTForm& th) {
  const int d = th.dim(), k = th.degree();
  GTForm out(d, k);
  if (k == 0) return out;
  const RMat Bm = 4.0 * pairing(d / 2) * A.transpose() * pairing(d / 2);
  detail::for_each_index(d, k, [&](const std::vector<int>& idx) {
    Cplx s = 0;
    std::vector<int> jdx = idx;
    for (int j = 0; j < k; ++j) {
      const int bj = idx[j];
      for (int c = 0; c < d; ++c) {
        if (Bm(c, bj) == 0.0) continue;
        jdx[j] = c;
        s += Bm(c, bj) * th.coeff(jdx);
      }
      jdx[j] = bj;
    }
    const_cast<GTForm&>(out).set_coeff(idx, s);
  });
  return out;
}

// Plain slot-wise action of a fiber endomorphism E on a form:
//   (E . theta)(x_1..x_k) = sum_j theta(x_1, .., E x_j, .., x_k)
inline GTForm plain_slot_action(const RMat& E, const GTForm& th) {
  const int d = th.dim(), k = th.degree();
  GTForm out(d, k);
  if (k == 0) return out;
  detail::for_each_index(d, k, [&](const std::vector<int>& idx) {
    Cplx s = 0;
    std::vector<int> jdx = idx;
    for (int j = 0; j < k; ++j) {
      const int bj = idx[j];
      for (int c = 0; c < d; ++c) {
        if (E(c, bj) == 0.0) continue;
        jdx[j] = c;
        s += E(c, bj) * th.coeff(jdx);
      }
      jdx[j] = bj;
    }
    const_cast<GTForm&>(out).set_coeff(idx, s);
  });
  return out;
}

// Curvature correction of the Weitzenbock identity,
//   W(theta) = -1/2 sum_{alpha,beta} G^b(e_alpha) ^ iota_{e_beta}
//              (R^{phi,b}_{e_alpha,e_beta} theta)
// over the G^b-orthonormal frame. On 1-forms this equals the slot-wise action
// of G^b ric^{phi,b} G^b; on higher degrees it is the curvature term the
// identity actually requires.
inline GTForm weitzenbock_correction(const CurvatureTensor& T, const GTForm& th) {
  const int d = th.dim();
  GTForm out(d, th.degree());
  if (th.degree() == 0) return out;
  const RMat finv = T.frame.transpose() * T.sigma;  // F^{-1} since F^T Sigma F = I
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      if (a == b) continue;
      RMat Eonf(d, d);
      for (int c = 0; c < d; ++c) Eonf.col(c) = T.op(a, b, c);
      const RMat E = Eonf * finv;  // endomorphism in the standard fiber basis
      // Curvature acts on forms through its slots with a minus sign.
      const GTForm rth = -1.0 * plain_slot_action(E, th);
      const GTForm iota = rth.contract(CVec(T.frame.col(b).cast<Cplx>()));
      // G^b(e_a) as a 1-form via the pairing duality u -> 2<u, .>.
      const GTForm one =
          GTForm::one_form(CVec((2.0 * T.sigma * T.frame.col(a)).cast<Cplx>()));
      out += wedge(one, iota);
    }
  return -0.5 * out;
}

// Residual of the Weitzenbock identity Delta^{phi,b} = Delta_D + W on forms.
inline Real weitzenbock_residual(const GenConnection& D, const TFormField& th,
                                 const RVec& p, CurvRoute route = CurvRoute::Blocks) {
  const GTForm hodge = hodge_laplacian(D, th, p);
  const GTForm bochner = bochner_laplacian(D, th, p);
  const CurvatureTensor T = riemann_tensor(D, p, route);
  const GTForm corr = weitzenbock_correction(T, th.val(p));
  return (hodge - bochner - corr).norm_inf();
}

// ---------------------------------------------------------------------------
// Parallel 1-forms and the first reduced cohomology (invariant model)
// ---------------------------------------------------------------------------

// P^1_phi = { xi : nabla xi = 0 and iota_{g^{-1} xi} phi = 0 }, solved as the
// kernel of a stacked linear system on invariant 1-forms.
inline RMat parallel_forms_p1(const Backend& B, const FieldSet& F, const RVec& p,
                              Real tol = 1e-8) {
  const int n = B.n();
  const FramePoint fp = frame_point(B, F, p);
  // nabla rows: (nabla_{E_i} xi)_k = -(Gamma_i^T xi)_k per direction i.
  RMat A(n * n + n * n, n);
  for (int i = 0; i < n; ++i) {
    RVec Xi = RVec::Zero(n);
    Xi(i) = 1.0;
    const RMat Gi = fp.gamma_along(Xi, 0);
    A.block(i * n, 0, n, n) = -Gi.transpose();
  }
  // contraction rows: (iota_{g^{-1} xi} phi)(E_j, E_k) = sum_m M(jk, m) xi_m.
  const RMat gi = fp.G.g.inverse();
  int row = n * n;
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      for (int m = 0; m < n; ++m) {
        Real s = 0.0;
        for (int a = 0; a < n; ++a)
          s += gi(a, m) * fp.phi.coeff({a, j, k}).real();
        A(row, m) = s;
      }
      ++row;
    }
  return null_space(A.topRows(row), tol);
}

struct H1Result {
  int dim_h1_classical = 0;  // invariant-model classical H^1
  RMat p1_basis;             // basis of P^1_phi (columns)
  int dim = 0;               // dim H~^1 = dim H^1 + dim P^1_phi
};

inline H1Result h1_phib(const Backend& B, const FieldSet& F, const RVec& p,
                        Real tol = 1e-8) {
  const int n = B.n();
  // Invariant classical H^1: ker of (d xi)(E_i, E_j) = -xi([E_i, E_j]).
  RMat Dc(n * n, n);
  int row = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const RVec c = B.frame_bracket(i, j);
      for (int m = 0; m < n; ++m) Dc(row, m) = -c(m);
      ++row;
    }
  H1Result r;
  r.dim_h1_classical = static_cast<int>(null_space(Dc, tol).cols());
  r.p1_basis = parallel_forms_p1(B, F, p, tol);
  r.dim = r.dim_h1_classical + static_cast<int>(r.p1_basis.cols());
  return r;
}

// ---------------------------------------------------------------------------
// Pseudo-cohomology kernels on the invariant complex
// ---------------------------------------------------------------------------

struct PseudoCohomology {
  int check_dim = 0;          // dim (ker d  intersect  ker d*) at the degree
  int hat_dim = 0;            // dim ker Delta at the degree
  Real inclusion_residual = 0.0;  // max |Delta v| over the check-kernel basis
};

inline PseudoCohomology pseudo_cohomology_check(const InvariantComplex& C, int k,
                                                Real tol = 1e-8) {
  PseudoCohomology out;
  const int mk = C.dim(k);
  RMat stacked(((k < C.d) ? C.dmat[k].rows() : 0) + ((k > 0) ? C.dstar[k].rows() : 0),
               mk);
  if (k < C.d) stacked.topRows(C.dmat[k].rows()) = C.dmat[k];
  if (k > 0) stacked.bottomRows(C.dstar[k].rows()) = C.dstar[k];
  const RMat check = null_space(stacked, tol);
  out.check_dim = static_cast<int>(check.cols());
  const RMat H = C.hodge(k);
  out.hat_dim = mk - rank_of(H, tol);
  if (check.cols() > 0) {
    const RMat res = H * check;
    out.inclusion_residual = res.cwiseAbs().maxCoeff();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Chevalley-Eilenberg cohomology
// ---------------------------------------------------------------------------

struct LieAlgebra {
  int n = 0;
  // bracket[i][j] = [E_i, E_j] in components.
  std::vector<std::vector<RVec>> bracket;

  static LieAlgebra abelian(int n) {
    LieAlgebra g;
    g.n = n;
    g.bracket.assign(n, std::vector<RVec>(n, RVec::Zero(n)));
    return g;
  }

  // su(2) in the basis with [E_i, E_j] = eps_{ijk} E_k.
  static LieAlgebra su2() {
    LieAlgebra g = abelian(3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const int k = 3 - i - j;
        if (i == j) continue;
        const Real eps = ((j - i + 3) % 3 == 1) ? 1.0 : -1.0;
        g.bracket[i][j](k) = eps;
      }
    return g;
  }

  static LieAlgebra direct_sum(const LieAlgebra& a, const LieAlgebra& b) {
    LieAlgebra g = abelian(a.n + b.n);
    for (int i = 0; i < a.n; ++i)
      for (int j = 0; j < a.n; ++j) g.bracket[i][j].head(a.n) = a.bracket[i][j];
    for (int i = 0; i < b.n; ++i)
      for (int j = 0; j < b.n; ++j)
        g.bracket[a.n + i][a.n + j].tail(b.n) = b.bracket[i][j];
    return g;
  }

  // max |[[x,y],z] + c.p.| over basis triples.
  Real jacobi_residual() const {
    Real m = 0.0;
    auto br = [&](const RVec& x, const RVec& y) {
      RVec out = RVec::Zero(n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out += x(i) * y(j) * bracket[i][j];
      return out;
    };
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) {
          RVec ea = RVec::Zero(n), eb = RVec::Zero(n), ec = RVec::Zero(n);
          ea(a) = eb(b) = ec(c) = 1.0;
          const RVec r =
              br(br(ea, eb), ec) + br(br(eb, ec), ea) + br(br(ec, ea), eb);
          m = std::max(m, r.cwiseAbs().maxCoeff());
        }
    return m;
  }
};

namespace detail {

// Sign of the permutation that sorts v; 0 if v has a repeated entry.
inline int sort_sign(std::vector<int>& v) {
  int sign = 1;
  for (size_t i = 0; i < v.size(); ++i)
    for (size_t j = i + 1; j < v.size(); ++j) {
      if (v[i] == v[j]) return 0;
      if (v[i] > v[j]) {
        std::swap(v[i], v[j]);
        sign = -sign;
      }
    }
  return sign;
}

}  // namespace detail

// Betti numbers of the Chevalley-Eilenberg complex of g (trivial module),
// assembled combinatorially on the increasing-combination bases.
inline std::vector<int> ce_betti(const LieAlgebra& g, Real tol = 1e-8) {
  const int n = g.n;
  std::vector<std::vector<std::vector<int>>> bases(n + 1);
  std::vector<std::map<std::vector<int>, int>> pos(n + 1);
  for (int k = 0; k <= n; ++k) {
    bases[k] = index_combinations(n, k);
    for (size_t i = 0; i < bases[k].size(); ++i) pos[k][bases[k][i]] = int(i);
  }
  std::vector<RMat> delta(n);  // degree k -> k+1
  for (int k = 0; k < n; ++k) {
    RMat Dk = RMat::Zero(bases[k + 1].size(), bases[k].size());
    // (delta f)(x_0..x_k) = sum_{i<j} (-1)^{i+j} f([x_i,x_j], rest): for each
    // row combination t, insert [E_{t_i}, E_{t_j}] component-wise and locate
    // the resulting column combination with its sorting sign.
    for (size_t row = 0; row < bases[k + 1].size(); ++row) {
      const std::vector<int>& t = bases[k + 1][row];
      for (int i = 0; i <= k; ++i)
        for (int j = i + 1; j <= k; ++j) {
          const RVec& br = g.bracket[t[i]][t[j]];
          for (int m = 0; m < n; ++m) {
            if (br(m) == 0.0) continue;
            std::vector<int> seq;
            seq.reserve(k);
            seq.push_back(m);
            for (int r = 0; r <= k; ++r)
              if (r != i && r != j) seq.push_back(t[r]);
            const int sgn = detail::sort_sign(seq);
            if (sgn == 0) continue;
            const Real coef = (((i + j) % 2) ? -1.0 : 1.0) * Real(sgn) * br(m);
            Dk(row, pos[k].at(seq)) += coef;
          }
        }
    }
    delta[k] = Dk;
  }
  std::vector<int> betti(n + 1);
  for (int k = 0; k <= n; ++k) {
    const int mk = static_cast<int>(bases[k].size());
    const int rk = (k < n) ? rank_of(delta[k], tol) : 0;
    const int rkm = (k > 0) ? rank_of(delta[k - 1], tol) : 0;
    betti[k] = (mk - rk) - rkm;
  }
  return betti;
}

// Betti numbers of g (+) g — the algebraic model for the reduced cohomology
// of the corresponding group backend.
inline std::vector<int> ce_cohomology(const LieAlgebra& g, Real tol = 1e-8) {
  return ce_betti(LieAlgebra::direct_sum(g, g), tol);
}

// Kunneth convolution of two Betti sequences.
inline std::vector<int> kunneth(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out(a.size() + b.size() - 1, 0);
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

}  // namespace gengeo
