// Desk-scale computation backends.
//
// A backend provides: the manifold dimension n, a distinguished global frame
// {E_1..E_n} of TM (coordinate frame on charts / tori, a left-invariant frame
// on Lie groups), the fields (g, b, phi) expressed in that frame, the frame
// structure constants [E_i, E_j] = C^k_{ij} E_k, directional derivatives of
// coefficient closures along frame directions, and quadrature.
//
// Sections of TM + T*M are coefficient closures in the frame/coframe basis
// together with an (optional) derivative closure.  Invariant sections carry
// constant coefficients and zero derivative.
#pragma once

#include "gengeo/gt_linalg.hpp"

#include <functional>
#include <memory>
#include <random>
#include <stdexcept>

namespace gengeo {

// A section of the generalized tangent bundle (or its complexification),
// expressed through coefficients in the backend frame [E_i | E^i].
struct Section {
  std::function<CVec(const RVec&)> val;
  // Derivative of the coefficients along frame direction i; when absent the
  // backend differentiates the value closure numerically.
  std::function<CVec(const RVec&, int)> dval;
  bool invariant = false;

  static Section constant(const CVec& c) {
    Section s;
    s.val = [c](const RVec&) { return c; };
    s.invariant = true;
    return s;
  }
  static Section constant(const RVec& c) { return constant(CVec(c.cast<Cplx>())); }
};

class Backend {
 public:
  virtual ~Backend() = default;

  virtual int n() const = 0;
  int dim() const { return 2 * n(); }

  // Fields at a point, in frame components.
  virtual GenMetric metric(const RVec& p) const = 0;
  virtual GTForm phi(const RVec& p) const = 0;  // 3-form over tangent indices

  // True when the frame components of (g, b, phi) are point-independent.
  virtual bool invariant_fields() const { return false; }

  // Frame structure constants: coefficients of [E_i, E_j].
  virtual RVec frame_bracket(int i, int j) const = 0;

  // Derivative of a coefficient closure along frame direction i at p.
  virtual CVec d_closure(const std::function<CVec(const RVec&)>& f, const RVec& p,
                         int i) const = 0;

  // Integral of a scalar over the manifold (density of g included).
  virtual Real integrate(const std::function<Real(const RVec&)>& f) const = 0;

  virtual RVec sample_point(std::mt19937_64& rng) const = 0;

  // Derivative of a section's coefficients along frame direction i.
  CVec d_section(const Section& s, const RVec& p, int i) const {
    if (s.dval) return s.dval(p, i);
    if (s.invariant) return CVec::Zero(dim());
    return d_closure(s.val, p, i);
  }

  Cplx d_scalar(const std::function<Cplx(const RVec&)>& f, const RVec& p, int i) const {
    auto wrap = [&f](const RVec& q) {
      CVec v(1);
      v(0) = f(q);
      return v;
    };
    return d_closure(wrap, p, i)(0);
  }
};

namespace detail {

// Fourth-order central difference of a closure along a curve c(t), c(0) = p.
inline CVec fd4(const std::function<CVec(const RVec&)>& f,
                const std::function<RVec(Real)>& curve, Real h) {
  return (-f(curve(2 * h)) + 8.0 * f(curve(h)) - 8.0 * f(curve(-h)) + f(curve(-2 * h))) /
         (12.0 * h);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Flat torus with invariant fields
// ---------------------------------------------------------------------------

// T^n = R^n / Z^n with constant (g, b, phi) in the coordinate frame.
class InvariantTorusBackend : public Backend {
 public:
  InvariantTorusBackend(GenMetric G, GTForm phi3) : G_(std::move(G)), phi_(std::move(phi3)) {
    if (phi_.dim() != G_.n() || phi_.degree() != 3)
      throw std::invalid_argument("phi must be a 3-form over the tangent fiber");
  }

  static InvariantTorusBackend flat(int n, Real phi_scale = 0.0) {
    GenMetric G(RMat::Identity(n, n), RMat::Zero(n, n));
    GTForm p3(n, 3);
    if (n >= 3 && phi_scale != 0.0) {
      // phi = scale * dx^1 ^ dx^2 ^ dx^3
      std::vector<int> idx = {0, 1, 2};
      p3.set_coeff(idx, phi_scale);
      p3 = p3.antisymmetrized() * Cplx(6.0);  // fill all index orders
    }
    return InvariantTorusBackend(G, p3);
  }

  int n() const override { return G_.n(); }
  GenMetric metric(const RVec&) const override { return G_; }
  GTForm phi(const RVec&) const override { return phi_; }
  RVec frame_bracket(int, int) const override { return RVec::Zero(n()); }

  CVec d_closure(const std::function<CVec(const RVec&)>& f, const RVec& p,
                 int i) const override {
    RVec e = RVec::Zero(n());
    e(i) = 1.0;
    return detail::fd4(f, [&](Real t) { return RVec(p + t * e); }, fd_step_);
  }

  bool invariant_fields() const override { return true; }

  Real integrate(const std::function<Real(const RVec&)>& f) const override {
    // Invariant integrands only: f * vol(T^n), vol = sqrt(det g).
    return f(RVec::Zero(n())) * std::sqrt(G_.g.determinant());
  }

  RVec sample_point(std::mt19937_64& rng) const override {
    std::uniform_real_distribution<Real> u(0.0, 1.0);
    RVec p(n());
    for (int i = 0; i < n(); ++i) p(i) = u(rng);
    return p;
  }

 private:
  GenMetric G_;
  GTForm phi_;
  Real fd_step_ = 1e-3;
};

// ---------------------------------------------------------------------------
// Compact Lie group (SU(2) via unit quaternions) with invariant fields
// ---------------------------------------------------------------------------

namespace quat {

inline RVec mul(const RVec& a, const RVec& b) {
  RVec r(4);
  r(0) = a(0) * b(0) - a(1) * b(1) - a(2) * b(2) - a(3) * b(3);
  r(1) = a(0) * b(1) + a(1) * b(0) + a(2) * b(3) - a(3) * b(2);
  r(2) = a(0) * b(2) - a(1) * b(3) + a(2) * b(0) + a(3) * b(1);
  r(3) = a(0) * b(3) + a(1) * b(2) - a(2) * b(1) + a(3) * b(0);
  return r;
}

inline RVec conj(const RVec& a) {
  RVec r(4);
  r << a(0), -a(1), -a(2), -a(3);
  return r;
}

inline RVec exp_pure(const RVec& v3) {
  const Real t = v3.norm();
  RVec r(4);
  if (t < 1e-300) {
    r << 1, 0, 0, 0;
    return r;
  }
  r(0) = std::cos(t);
  r.tail(3) = std::sin(t) / t * v3;
  return r;
}

// Adjoint action of q on the imaginary part: Ad_q(v) = q v q^{-1}.
inline RVec ad(const RVec& q, const RVec& v3) {
  RVec pv(4);
  pv << 0, v3(0), v3(1), v3(2);
  return mul(mul(q, pv), conj(q)).tail(3);
}

}  // namespace quat

// SU(2) as unit quaternions.  Left-invariant frame E_i corresponding to the
// pure quaternions q_i / 2, so that [E_i, E_j] = eps_{ijk} E_k.  The invariant
// metric g and 3-form phi are given by constant frame components.
class SU2Backend : public Backend {
 public:
  SU2Backend(GenMetric G, GTForm phi3) : G_(std::move(G)), phi_(std::move(phi3)) {
    if (G_.n() != 3) throw std::invalid_argument("SU(2) backend requires n = 3");
  }

  // Bi-invariant calibration: g = -Killing form = 2 * kappa * Id, and
  // gamma(u, v, w) = g([u, v], w).
  static SU2Backend biinvariant(Real kappa = 1.0) {
    GenMetric G(2.0 * kappa * RMat::Identity(3, 3), RMat::Zero(3, 3));
    GTForm p3(3, 3);
    // gamma(E_i, E_j, E_k) = g([E_i,E_j], E_k) = 2 kappa eps_{ijk}
    std::vector<int> idx(3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) {
          idx = {i, j, k};
          Real eps = 0.5 * (i - j) * (j - k) * (k - i);
          p3.set_coeff(idx, 2.0 * kappa * eps);
        }
    return SU2Backend(G, p3);
  }

  int n() const override { return 3; }
  GenMetric metric(const RVec&) const override { return G_; }
  GTForm phi(const RVec&) const override { return phi_; }

  RVec frame_bracket(int i, int j) const override {
    RVec c = RVec::Zero(3);
    for (int k = 0; k < 3; ++k) c(k) = 0.5 * (i - j) * (j - k) * (k - i);  // eps_{ijk}
    return c;
  }

  CVec d_closure(const std::function<CVec(const RVec&)>& f, const RVec& p,
                 int i) const override {
    RVec e = RVec::Zero(3);
    e(i) = 0.5;  // E_i = q_i / 2
    return detail::fd4(f, [&](Real t) { return quat::mul(p, quat::exp_pure(t * e)); },
                       fd_step_);
  }

  bool invariant_fields() const override { return true; }

  Real integrate(const std::function<Real(const RVec&)>& f) const override {
    // Invariant integrands only: f * vol.  The metric in which the frame
    // E_i = q_i / 2 is orthonormal is the round 3-sphere of radius 2, with
    // volume 16 pi^2; sqrt(det g) rescales relative to that frame.
    RVec e(4);
    e << 1, 0, 0, 0;
    return f(e) * 16.0 * M_PI * M_PI * std::sqrt(G_.g.determinant());
  }

  RVec sample_point(std::mt19937_64& rng) const override {
    std::normal_distribution<Real> gauss(0.0, 1.0);
    RVec q(4);
    for (int i = 0; i < 4; ++i) q(i) = gauss(rng);
    return q / q.norm();
  }

  // Left-invariant vector field with Lie algebra value u (frame coefficients
  // constant) and the corresponding right-invariant field X_u^r, whose frame
  // coefficients are Ad_{p^{-1}} u.
  Section left_invariant_field(const RVec& u) const {
    CVec c = CVec::Zero(6);
    c.head(3) = u.cast<Cplx>();
    return Section::constant(c);
  }

  Section right_invariant_field(const RVec& u) const {
    Section s;
    s.val = [u](const RVec& p) {
      CVec c = CVec::Zero(6);
      c.head(3) = quat::ad(quat::conj(p), u).cast<Cplx>();
      return c;
    };
    // d/dt Ad_{(p exp(tE_i))^{-1}} u |_0 = -[E_i, Ad_{p^{-1}} u]
    s.dval = [this, u](const RVec& p, int i) {
      RVec c = quat::ad(quat::conj(p), u);
      RVec br = RVec::Zero(3);
      for (int j = 0; j < 3; ++j) br += c(j) * frame_bracket(i, j);
      CVec r = CVec::Zero(6);
      r.head(3) = (-br).cast<Cplx>();
      return r;
    };
    return s;
  }

  // Covector fields g(X_u) for the invariant fields above.
  Section left_invariant_covector(const RVec& u) const {
    CVec c = CVec::Zero(6);
    c.tail(3) = (G_.g * u).cast<Cplx>();
    return Section::constant(c);
  }

  Section right_invariant_covector(const RVec& u) const {
    Section s = right_invariant_field(u);
    RMat g = G_.g;
    Section r;
    r.val = [s, g](const RVec& p) {
      CVec c = CVec::Zero(6);
      c.tail(3) = g.cast<Cplx>() * s.val(p).head(3);
      return c;
    };
    r.dval = [s, g](const RVec& p, int i) {
      CVec c = CVec::Zero(6);
      c.tail(3) = g.cast<Cplx>() * s.dval(p, i).head(3);
      return c;
    };
    return r;
  }

 private:
  GenMetric G_;
  GTForm phi_;
  Real fd_step_ = 1e-3;
};

// ---------------------------------------------------------------------------
// Coordinate chart with field closures and finite differences
// ---------------------------------------------------------------------------

class ChartBackend : public Backend {
 public:
  using MetricFn = std::function<GenMetric(const RVec&)>;
  using PhiFn = std::function<GTForm(const RVec&)>;

  ChartBackend(int n, MetricFn g, PhiFn phi, RVec lo, RVec hi, bool periodic = false)
      : n_(n),
        metric_(std::move(g)),
        phi_(std::move(phi)),
        lo_(std::move(lo)),
        hi_(std::move(hi)),
        periodic_(periodic) {
    fd_step_ = 1e-3 * (hi_ - lo_).maxCoeff();
  }

  int n() const override { return n_; }
  GenMetric metric(const RVec& p) const override { return metric_(p); }
  GTForm phi(const RVec& p) const override { return phi_(p); }
  RVec frame_bracket(int, int) const override { return RVec::Zero(n_); }

  CVec d_closure(const std::function<CVec(const RVec&)>& f, const RVec& p,
                 int i) const override {
    RVec e = RVec::Zero(n_);
    e(i) = 1.0;
    return detail::fd4(f, [&](Real t) { return RVec(p + t * e); }, fd_step_);
  }

  // Tensor-product rectangle rule; spectrally accurate for periodic data.
  Real integrate(const std::function<Real(const RVec&)>& f) const override {
    const int m = quad_points_;
    std::vector<int> idx(n_, 0);
    const long total = detail::ipow(m, n_);
    Real cell = 1.0;
    for (int i = 0; i < n_; ++i) cell *= (hi_(i) - lo_(i)) / m;
    Real sum = 0.0;
    RVec p(n_);
    for (long c = 0; c < total; ++c) {
      for (int i = 0; i < n_; ++i)
        p(i) = lo_(i) + (hi_(i) - lo_(i)) * (idx[i] + 0.5) / m;
      sum += f(p) * std::sqrt(metric_(p).g.determinant());
      for (int j = n_ - 1; j >= 0; --j) {
        if (++idx[j] < m) break;
        idx[j] = 0;
      }
    }
    return sum * cell;
  }

  RVec sample_point(std::mt19937_64& rng) const override {
    // Keep FD stencils inside the box on non-periodic charts.
    std::uniform_real_distribution<Real> u(0.05, 0.95);
    RVec p(n_);
    for (int i = 0; i < n_; ++i) p(i) = lo_(i) + (hi_(i) - lo_(i)) * u(rng);
    return p;
  }

  Real fd_step() const { return fd_step_; }
  void set_fd_step(Real h) { fd_step_ = h; }
  void set_quad_points(int m) { quad_points_ = m; }

 private:
  int n_;
  MetricFn metric_;
  PhiFn phi_;
  RVec lo_, hi_;
  bool periodic_;
  Real fd_step_;
  int quad_points_ = 16;
};

// ---------------------------------------------------------------------------
// Random draws used by verification harnesses
// ---------------------------------------------------------------------------

inline CVec random_fiber_vector(int dim, std::mt19937_64& rng, bool complex_parts = false) {
  std::normal_distribution<Real> gauss(0.0, 1.0);
  CVec v(dim);
  for (int i = 0; i < dim; ++i)
    v(i) = Cplx(gauss(rng), complex_parts ? gauss(rng) : 0.0);
  return v;
}

inline GTForm random_invariant_form(int dim, int degree, std::mt19937_64& rng) {
  std::normal_distribution<Real> gauss(0.0, 1.0);
  GTForm f(dim, degree);
  for (long i = 0; i < f.raw().size(); ++i) f.raw()(i) = gauss(rng);
  return f.antisymmetrized();
}

}  // namespace gengeo
