// Pointwise linear algebra on the generalized tangent fiber R^n + (R^n)^*.
//
// Conventions used throughout the library:
//  * fiber vectors are stored as [vector part | covector part], size 2n;
//  * the canonical pairing is <x,y> = (eta(X) + xi(Y)) / 2, i.e. the matrix
//    P = 1/2 [[0, I], [I, 0]];
//  * a 2-form B acts on a vector X as iota_X B = B * X (column convention),
//    so the B-transform is e^B = [[I, 0], [B, I]];
//  * GTForm stores fully antisymmetric covariant components in the standard
//    fiber basis; a fiber vector u is converted to a 1-form via 2 P u, which
//    makes iota_x(u-as-form) = 2 <x, u>.
#pragma once

#include <Eigen/Dense>
#include <array>
#include <cassert>
#include <complex>
#include <functional>
#include <vector>

namespace gengeo {

using Real = double;
using Cplx = std::complex<double>;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

// ---------------------------------------------------------------------------
// Pairing and basic block helpers
// ---------------------------------------------------------------------------

// Matrix of the canonical pairing: <x,y> = x^T P y.
inline RMat pairing(int n) {
  RMat P = RMat::Zero(2 * n, 2 * n);
  P.topRightCorner(n, n) = 0.5 * RMat::Identity(n, n);
  P.bottomLeftCorner(n, n) = 0.5 * RMat::Identity(n, n);
  return P;
}

inline Real pair(const RVec& x, const RVec& y) {
  const int n = static_cast<int>(x.size()) / 2;
  return 0.5 * (x.head(n).dot(y.tail(n)) + x.tail(n).dot(y.head(n)));
}

inline Cplx pair(const CVec& x, const CVec& y) {
  const int n = static_cast<int>(x.size()) / 2;
  // Bilinear (not sesquilinear) extension of the pairing.
  return 0.5 * (x.head(n).transpose() * y.tail(n) +
                x.tail(n).transpose() * y.head(n))(0);
}

// B-transform e^B = [[I,0],[B,I]] for an antisymmetric n x n matrix B.
inline RMat b_transform(const RMat& B) {
  const int n = static_cast<int>(B.rows());
  RMat E = RMat::Identity(2 * n, 2 * n);
  E.bottomLeftCorner(n, n) = B;
  return E;
}

// ---------------------------------------------------------------------------
// Generalized metric
// ---------------------------------------------------------------------------

// A generalized metric determined by a Riemannian metric g and 2-form b.
struct GenMetric {
  RMat g;  // n x n symmetric positive definite
  RMat b;  // n x n antisymmetric

  GenMetric() = default;
  GenMetric(RMat g_, RMat b_) : g(std::move(g_)), b(std::move(b_)) {}

  int n() const { return static_cast<int>(g.rows()); }

  // Lifts of a tangent vector into the +/- eigenbundles C_{b,+-}.
  RVec lift_pm(const RVec& X, int sign) const {
    RVec x(2 * n());
    x.head(n()) = X;
    x.tail(n()) = (b + sign * g) * X;
    return x;
  }

  // Endomorphism G^b = e^b G_0 e^{-b}, G_0 = [[0, g^{-1}], [g, 0]].
  RMat Gb() const {
    const int m = n();
    RMat G0 = RMat::Zero(2 * m, 2 * m);
    RMat gi = g.inverse();
    G0.topRightCorner(m, m) = gi;
    G0.bottomLeftCorner(m, m) = g;
    RMat E = b_transform(b);
    return E * G0 * E.inverse();
  }

  // G^b as a positive definite bilinear form: G^b(x,y) = <Gb x, y>.
  Real metric(const RVec& x, const RVec& y) const { return pair(RVec(Gb() * x), y); }

  // Recover (g, b) from the endomorphism G^b.
  static GenMetric from_Gb(const RMat& G) {
    const int m = static_cast<int>(G.rows()) / 2;
    RMat gi = G.topRightCorner(m, m);
    RMat g = gi.inverse();
    RMat b = -g * G.topLeftCorner(m, m);
    // Symmetrize against roundoff.
    g = 0.5 * (g + g.transpose()).eval();
    b = 0.5 * (b - b.transpose()).eval();
    return GenMetric(g, b);
  }

  // Split x = x_+ + x_- with x_+- in C_{b,+-}; returns the tangent parts.
  std::array<RVec, 2> project_pm(const RVec& x) const {
    const int m = n();
    RVec X = x.head(m), xi = x.tail(m);
    RVec w = g.llt().solve(xi - b * X);
    return {0.5 * (X + w), 0.5 * (X - w)};
  }

  // Columns: a G^b-orthonormal frame e_i^{b+}, e_i^{b-} built from a
  // g-orthonormal tangent frame (Cholesky of g^{-1}).
  RMat orthonormal_frame() const {
    const int m = n();
    // Columns of L^{-T} are g-orthonormal where g = L L^T.
    RMat L = g.llt().matrixL();
    RMat Xs = L.transpose().inverse();
    RMat F(2 * m, 2 * m);
    for (int i = 0; i < m; ++i) {
      F.col(i) = lift_pm(Xs.col(i), +1);
      F.col(m + i) = lift_pm(Xs.col(i), -1);
    }
    return F;
  }
};

// Apply the generalized metric endomorphism to a fiber vector.
inline RVec gmetric_apply(const GenMetric& G, const RVec& x) { return G.Gb() * x; }

// ---------------------------------------------------------------------------
// Multi-index utilities
// ---------------------------------------------------------------------------

namespace detail {

inline long ipow(long b, int e) {
  long r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

// Iterate over all multi-indices (i_1..i_k) in {0..d-1}^k.
template <typename F>
void for_each_index(int d, int k, F&& f) {
  std::vector<int> idx(k, 0);
  const long total = ipow(d, k);
  for (long c = 0; c < total; ++c) {
    f(idx);
    for (int j = k - 1; j >= 0; --j) {
      if (++idx[j] < d) break;
      idx[j] = 0;
    }
  }
  if (k == 0) return;
}

inline long flatten(const std::vector<int>& idx, int d) {
  long f = 0;
  for (int i : idx) f = f * d + i;
  return f;
}

// Sign of the permutation sorting idx; 0 if there are repeats.
inline int perm_sign(std::vector<int> idx) {
  int sign = 1;
  const int k = static_cast<int>(idx.size());
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      if (idx[i] == idx[j]) return 0;
      if (idx[i] > idx[j]) {
        std::swap(idx[i], idx[j]);
        sign = -sign;
      }
    }
  return sign;
}

template <typename F>
void for_each_permutation(int k, F&& f) {
  std::vector<int> p(k);
  for (int i = 0; i < k; ++i) p[i] = i;
  int sign = 1;
  // Heap's algorithm with explicit sign tracking via perm_sign.
  std::vector<int> c(k, 0);
  f(p, 1);
  int i = 0;
  (void)sign;
  while (i < k) {
    if (c[i] < i) {
      if (i % 2 == 0)
        std::swap(p[0], p[i]);
      else
        std::swap(p[c[i]], p[i]);
      f(p, perm_sign(p));
      ++c[i];
      i = 0;
    } else {
      c[i] = 0;
      ++i;
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Fully antisymmetric forms on the generalized fiber
// ---------------------------------------------------------------------------

// Dense antisymmetric covariant k-tensor over a fiber of dimension d = 2n.
class GTForm {
 public:
  GTForm() : d_(0), k_(0) {}
  GTForm(int d, int k) : d_(d), k_(k), a_(CVec::Zero(detail::ipow(d, k))) {}

  static GTForm scalar(int d, Cplx v) {
    GTForm f(d, 0);
    f.a_(0) = v;
    return f;
  }

  // Degree-1 form from raw covariant components.
  static GTForm one_form(const CVec& comps) {
    GTForm f(static_cast<int>(comps.size()), 1);
    f.a_ = comps;
    return f;
  }

  // Degree-1 form associated to a fiber vector u via the pairing: x -> 2<x,u>.
  static GTForm from_vector(const CVec& u) {
    const int n = static_cast<int>(u.size()) / 2;
    CVec c(2 * n);
    c.head(n) = u.tail(n);
    c.tail(n) = u.head(n);
    return one_form(c);
  }
  static GTForm from_vector(const RVec& u) { return from_vector(CVec(u.cast<Cplx>())); }

  // Degree-2 form from an antisymmetric matrix of components theta(e_i,e_j).
  static GTForm from_matrix(const CMat& m) {
    const int d = static_cast<int>(m.rows());
    GTForm f(d, 2);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) f.a_(i * d + j) = m(i, j);
    return f;
  }
  static GTForm from_matrix(const RMat& m) { return from_matrix(CMat(m.cast<Cplx>())); }

  int dim() const { return d_; }
  int degree() const { return k_; }
  const CVec& raw() const { return a_; }
  CVec& raw() { return a_; }

  Cplx coeff(const std::vector<int>& idx) const { return a_(detail::flatten(idx, d_)); }
  void set_coeff(const std::vector<int>& idx, Cplx v) { a_(detail::flatten(idx, d_)) = v; }

  CMat as_matrix() const {
    assert(k_ == 2);
    CMat m(d_, d_);
    for (int i = 0; i < d_; ++i)
      for (int j = 0; j < d_; ++j) m(i, j) = a_(i * d_ + j);
    return m;
  }

  // Project arbitrary components onto their fully antisymmetric part.
  GTForm antisymmetrized() const {
    GTForm out(d_, k_);
    if (k_ == 0) {
      out.a_ = a_;
      return out;
    }
    const Real inv = 1.0 / std::tgamma(k_ + 1.0);
    detail::for_each_index(d_, k_, [&](const std::vector<int>& idx) {
      Cplx s = 0;
      std::vector<int> perm(k_);
      detail::for_each_permutation(k_, [&](const std::vector<int>& p, int sign) {
        for (int j = 0; j < k_; ++j) perm[j] = idx[p[j]];
        s += Real(sign) * a_(detail::flatten(perm, d_));
      });
      out.a_(detail::flatten(idx, d_)) = s * inv;
    });
    return out;
  }

  // Contraction with a fiber vector in the first slot (plain slot insertion).
  GTForm contract(const CVec& x) const {
    assert(k_ >= 1);
    GTForm out(d_, k_ - 1);
    const long stride = detail::ipow(d_, k_ - 1);
    for (int i = 0; i < d_; ++i) out.a_ += x(i) * a_.segment(i * stride, stride);
    return out;
  }
  GTForm contract(const RVec& x) const { return contract(CVec(x.cast<Cplx>())); }

  // Full evaluation theta(x_1, ..., x_k).
  Cplx eval(const std::vector<CVec>& xs) const {
    assert(static_cast<int>(xs.size()) == k_);
    GTForm cur = *this;
    for (const auto& x : xs) cur = cur.contract(x);
    return cur.a_(0);
  }

  // Pull components through a change of basis: out(f_{a1}..f_{ak}) where the
  // f_a are the columns of U.
  GTForm change_basis(const CMat& U) const {
    GTForm out(static_cast<int>(U.cols()), k_);
    if (k_ == 0) {
      out.a_ = a_;
      return out;
    }
    // Contract one slot at a time.
    GTForm cur = *this;
    const int dc = static_cast<int>(U.cols());
    for (int slot = 0; slot < k_; ++slot) {
      // After contracting slot 0 repeatedly we cycle indices; do it naively:
      // build tensor with first index in new basis, then rotate to the back.
      GTForm next(dc, k_);
      // next_{a, i2..ik} over mixed dims is awkward with flat storage of equal
      // dims; since dc == d_ in all uses, keep it simple:
      assert(dc == d_);
      const long stride = detail::ipow(d_, k_ - 1);
      for (int a = 0; a < dc; ++a) {
        CVec seg = CVec::Zero(stride);
        for (int i = 0; i < d_; ++i) seg += U(i, a) * cur.a_.segment(i * stride, stride);
        // Place contracted slot at the *end* so slots rotate consistently.
        for (long r = 0; r < stride; ++r) next.a_(r * d_ + a) = seg(r);
      }
      cur = next;
    }
    return cur;
  }

  Real norm_inf() const { return a_.size() ? a_.cwiseAbs().maxCoeff() : 0.0; }

  GTForm operator+(const GTForm& o) const {
    GTForm r = *this;
    r.a_ += o.a_;
    return r;
  }
  GTForm operator-(const GTForm& o) const {
    GTForm r = *this;
    r.a_ -= o.a_;
    return r;
  }
  GTForm operator*(Cplx s) const {
    GTForm r = *this;
    r.a_ *= s;
    return r;
  }
  GTForm& operator+=(const GTForm& o) {
    a_ += o.a_;
    return *this;
  }
  GTForm& operator-=(const GTForm& o) {
    a_ -= o.a_;
    return *this;
  }

 private:
  int d_, k_;
  CVec a_;
};

inline GTForm operator*(Cplx s, const GTForm& f) { return f * s; }
inline GTForm operator*(Real s, const GTForm& f) { return f * Cplx(s); }

// Wedge product with the determinant convention:
//   (a ^ b)(x_1..x_{p+q}) = sum_{shuffles} sgn * a(..) b(..)
// implemented as 1/(p! q!) sum over all permutations.
inline GTForm wedge(const GTForm& a, const GTForm& b) {
  const int d = a.dim(), p = a.degree(), q = b.degree();
  assert(b.dim() == d);
  GTForm out(d, p + q);
  if (p + q == 0) {
    out.raw()(0) = a.raw()(0) * b.raw()(0);
    return out;
  }
  // Fast path for a 1-form factor: the shuffle sum collapses to an
  // alternating sum over the slot carrying the 1-form argument.
  if (p == 1 || q == 1) {
    const bool left = (p == 1);
    const GTForm& one = left ? a : b;
    const GTForm& rest = left ? b : a;
    const int k = p + q;
    std::vector<int> ir(k - 1);
    detail::for_each_index(d, k, [&](const std::vector<int>& idx) {
      Cplx s = 0;
      for (int j = 0; j < k; ++j) {
        for (int m = 0, t = 0; m < k; ++m)
          if (m != j) ir[t++] = idx[m];
        const int shift = left ? j : (k - 1 - j);
        const Real sgn = (shift % 2 == 0) ? 1.0 : -1.0;
        s += sgn * one.coeff({idx[j]}) * rest.coeff(ir);
      }
      out.set_coeff(idx, s);
    });
    return out;
  }
  const Real inv = 1.0 / (std::tgamma(p + 1.0) * std::tgamma(q + 1.0));
  std::vector<int> ia(p), ib(q), perm(p + q);
  detail::for_each_index(d, p + q, [&](const std::vector<int>& idx) {
    Cplx s = 0;
    detail::for_each_permutation(p + q, [&](const std::vector<int>& pm, int sign) {
      if (sign == 0) return;
      for (int j = 0; j < p; ++j) ia[j] = idx[pm[j]];
      for (int j = 0; j < q; ++j) ib[j] = idx[pm[p + j]];
      s += Real(sign) * a.coeff(ia) * b.coeff(ib);
    });
    const_cast<GTForm&>(out).set_coeff(idx, s * inv);
  });
  return out;
}

// Squared norm of a form with respect to the inner product induced by G^b
// (components taken in a G^b-orthonormal frame).
inline Real form_norm_sq(const GTForm& f, const GenMetric& G) {
  if (f.degree() == 0) return std::norm(f.raw()(0));
  GTForm c = f.change_basis(G.orthonormal_frame().cast<Cplx>());
  Real s = c.raw().squaredNorm();
  return s / std::tgamma(f.degree() + 1.0);
}

// Metric contraction of a degree-2 form against the 2-form of (G^b, J):
//   Lambda_{J-}(theta) = 1/2 sum_{a,b} theta(f_a, f_b) G^b(J f_a, f_b)
// over a G^b-orthonormal frame {f_a}.  On a decomposable theta with pure
// chirality blocks F_+ and F_- this reduces to the classical contractions
// Lambda_+ F_+ + Lambda_- F_- against omega_+- = g(I_+- ., .).
inline Cplx lambda_jminus(const GTForm& theta, const GenMetric& G, const CMat& J) {
  assert(theta.degree() == 2);
  const int d = theta.dim();
  const CMat F = G.orthonormal_frame().cast<Cplx>();
  const CMat Sigma = (G.Gb().transpose() * pairing(d / 2)).cast<Cplx>();
  const CMat Th = F.transpose() * theta.as_matrix() * F;  // theta(f_a, f_b)
  const CMat W = F.transpose() * J.transpose() * Sigma * F;  // G^b(J f_a, f_b)
  return 0.5 * Th.cwiseProduct(W).sum();
}

}  // namespace gengeo
