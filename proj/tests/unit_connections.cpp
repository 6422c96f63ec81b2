// Unit tests for generalized connections, brackets, and exterior calculus.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <gengeo/connections.hpp>

#include <random>

using namespace gengeo;

namespace {

std::mt19937_64 rng(0x47454F);

RMat random_spd(int n) {
  std::normal_distribution<Real> g(0.0, 1.0);
  RMat A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = g(rng);
  return A * A.transpose() + RMat::Identity(n, n);
}

RMat random_antisym(int n) {
  std::normal_distribution<Real> g(0.0, 1.0);
  RMat A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = g(rng);
  return 0.5 * (A - A.transpose());
}

RVec random_vec(int n) {
  std::normal_distribution<Real> g(0.0, 1.0);
  RVec v(n);
  for (int i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

Section combine(const Section& a, const Section& b) {
  Section s;
  s.val = [a, b](const RVec& p) { return CVec(a.val(p) + b.val(p)); };
  if (a.dval && b.dval)
    s.dval = [a, b](const RVec& p, int i) { return CVec(a.dval(p, i) + b.dval(p, i)); };
  s.invariant = a.invariant && b.invariant;
  return s;
}

Section scale(const Section& a, Cplx c) {
  Section s;
  s.val = [a, c](const RVec& p) { return CVec(c * a.val(p)); };
  if (a.dval) s.dval = [a, c](const RVec& p, int i) { return CVec(c * a.dval(p, i)); };
  s.invariant = a.invariant;
  return s;
}

// A smooth chart fixture on [0,1]^3 with varying g, b and phi.
ChartBackend chart3() {
  auto gfun = [](const RVec& p) {
    RMat g = RMat::Identity(3, 3);
    g(0, 0) += 0.3 * std::sin(p(1));
    g(0, 1) = g(1, 0) = 0.2 * std::cos(p(2));
    g(2, 2) += 0.25 * std::sin(p(0) + p(1));
    RMat b = RMat::Zero(3, 3);
    b(0, 1) = 0.3 * std::sin(p(2));
    b(1, 0) = -b(0, 1);
    b(1, 2) = 0.1 * p(0);
    b(2, 1) = -b(1, 2);
    return GenMetric(g, b);
  };
  auto pfun = [](const RVec& p) {
    GTForm f(3, 3);
    std::vector<int> idx = {0, 1, 2};
    f.set_coeff(idx, 0.4 + 0.2 * std::cos(p(0)));
    return f.antisymmetrized() * Cplx(6.0);
  };
  return ChartBackend(3, gfun, pfun, RVec::Zero(3), RVec::Ones(3));
}

Section random_chart_section() {
  RVec a = random_vec(6), c = random_vec(6);
  Section s;
  s.val = [a, c](const RVec& p) {
    CVec v(6);
    for (int i = 0; i < 6; ++i)
      v(i) = a(i) + c(i) * std::sin(p((i + 1) % 3) + 0.3 * i);
    return v;
  };
  return s;
}

}  // namespace

TEST_CASE("flat torus with volume torsion: basic covariant derivatives") {
  auto B = InvariantTorusBackend::flat(3, 1.0);
  GenConnection D(B, ConnKind::PhiB);
  RVec p = RVec::Zero(3);
  Section e1 = Section::constant(RVec(Eigen::VectorXd::Unit(6, 0)));
  Section e2 = Section::constant(RVec(Eigen::VectorXd::Unit(6, 1)));
  CVec r = D.apply(e1, e2, p);
  CVec expected = CVec::Zero(6);
  expected(5) = 0.25;  // D_{e1} e2 = 1/4 dx^3
  CHECK((r - expected).norm() < 1e-13);
  // D annihilates the pairing: <D_x y, z> + <y, D_x z> = X<y,z> = 0 here.
  Section z = Section::constant(random_vec(6));
  Section y = Section::constant(random_vec(6));
  Section x = Section::constant(random_vec(6));
  Cplx s = pair(D.apply(x, y, p), z.val(p)) + pair(y.val(p), D.apply(x, z, p));
  CHECK(std::abs(s) < 1e-13);
}

TEST_CASE("the two constructions of the (phi,b)-connection agree") {
  SUBCASE("invariant torus") {
    GenMetric G(random_spd(3), random_antisym(3));
    GTForm phi(3, 3);
    std::vector<int> idx = {0, 1, 2};
    phi.set_coeff(idx, 0.7);
    phi = phi.antisymmetrized() * Cplx(6.0);
    InvariantTorusBackend B(G, phi);
    GenConnection Da(B, ConnKind::PhiB);
    GenConnection Db(B, ConnKind::PhiBStandard);
    RVec p = RVec::Zero(3);
    for (int t = 0; t < 100; ++t) {
      Section x = Section::constant(random_vec(6));
      Section y = Section::constant(random_vec(6));
      CHECK((Da.apply(x, y, p) - Db.apply(x, y, p)).norm() < 1e-10);
    }
  }
  SUBCASE("chart with varying fields") {
    auto B = chart3();
    GenConnection Da(B, ConnKind::PhiB);
    GenConnection Db(B, ConnKind::PhiBStandard);
    for (int t = 0; t < 100; ++t) {
      RVec p = B.sample_point(rng);
      Section x = random_chart_section();
      Section y = random_chart_section();
      CHECK((Da.apply(x, y, p) - Db.apply(x, y, p)).norm() < 5e-5);
    }
  }
  SUBCASE("SU(2) frame") {
    auto B = SU2Backend::biinvariant(1.0);
    GenConnection Da(B, ConnKind::PhiB);
    GenConnection Db(B, ConnKind::PhiBStandard);
    for (int t = 0; t < 20; ++t) {
      RVec p = B.sample_point(rng);
      Section x = Section::constant(random_vec(6));
      Section y = Section::constant(random_vec(6));
      CHECK((Da.apply(x, y, p) - Db.apply(x, y, p)).norm() < 1e-10);
    }
  }
}

TEST_CASE("metric and pairing compatibility on a chart") {
  auto B = chart3();
  GenConnection D(B, ConnKind::PhiB);
  for (int t = 0; t < 20; ++t) {
    RVec p = B.sample_point(rng);
    Section x = random_chart_section();
    Section y = random_chart_section();
    Section z = random_chart_section();
    const CVec cx = x.val(p);
    // Pairing: pi(x)<y,z> = <D_x y, z> + <y, D_x z>
    auto f = [&](const RVec& q) { return pair(y.val(q), z.val(q)); };
    Cplx lhs = 0;
    for (int i = 0; i < 3; ++i) lhs += cx(i) * B.d_scalar(f, p, i);
    Cplx rhs = pair(D.apply(x, y, p), z.val(p)) + pair(y.val(p), D.apply(x, z, p));
    CHECK(std::abs(lhs - rhs) < 5e-5);
    // Metric: pi(x) G^b(y,z) = G^b(D_x y, z) + G^b(y, D_x z)
    auto h = [&](const RVec& q) {
      const CMat S = (B.metric(q).Gb().transpose() * pairing(3)).cast<Cplx>();
      return Cplx((y.val(q).transpose() * S * z.val(q))(0));
    };
    const CMat S = (B.metric(p).Gb().transpose() * pairing(3)).cast<Cplx>();
    Cplx lhs2 = 0;
    for (int i = 0; i < 3; ++i) lhs2 += cx(i) * B.d_scalar(h, p, i);
    Cplx rhs2 = (D.apply(x, y, p).transpose() * S * z.val(p))(0) +
                (y.val(p).transpose() * S * D.apply(x, z, p))(0);
    CHECK(std::abs(lhs2 - rhs2) < 5e-5);
  }
}

TEST_CASE("SU(2): bracket identities and the invariant table") {
  auto B = SU2Backend::biinvariant(1.0);
  GenConnection D(B, ConnKind::PhiB);
  GenConnection LC(B, ConnKind::LiftLC);
  for (int t = 0; t < 5; ++t) {
    RVec p = B.sample_point(rng);
    RVec u = random_vec(3), v = random_vec(3);
    RVec uv(3);
    uv << u(1) * v(2) - u(2) * v(1), u(2) * v(0) - u(0) * v(2), u(0) * v(1) - u(1) * v(0);

    Section xur = B.right_invariant_field(u);
    Section xvr = B.right_invariant_field(v);
    Section xul = B.left_invariant_field(u);
    Section xvl = B.left_invariant_field(v);

    // [X_u^l, X_v^l] = X_{[u,v]}^l ; [X_u^r, X_v^r] = -X_{[u,v]}^r ; mixed 0.
    CHECK((lie_bracket(B, xul, xvl, p) - uv.cast<Cplx>()).norm() < 1e-9);
    CHECK((lie_bracket(B, xur, xvr, p) +
           B.right_invariant_field(uv).val(p).head(3))
              .norm() < 1e-9);
    CHECK(lie_bracket(B, xur, xvl, p).norm() < 1e-9);

    // Bi-invariant Levi-Civita: nabla_{X^r_u} X^r_v = -1/2 X^r_{[u,v]}.
    CVec lc = LC.apply(xur, xvr, p).head(3);
    CHECK((lc + 0.5 * B.right_invariant_field(uv).val(p).head(3)).norm() < 1e-9);

    // x_u^+ = X_u^r + theta_u^r and x_v^- = X_v^l - theta_v^l.
    Section xp_u = combine(xur, B.right_invariant_covector(u));
    Section xp_v = combine(xvr, B.right_invariant_covector(v));
    Section xm_u = combine(xul, scale(B.left_invariant_covector(u), -1.0));
    Section xm_v = combine(xvl, scale(B.left_invariant_covector(v), -1.0));
    Section xp_uv = combine(B.right_invariant_field(uv), B.right_invariant_covector(uv));
    Section xm_uv =
        combine(B.left_invariant_field(uv), scale(B.left_invariant_covector(uv), -1.0));

    // D_{x_u^+} x_v^+ = -1/2 x_{[u,v]}^+ ; D_{x_u^-} x_v^- = +1/2 x_{[u,v]}^- ;
    // mixed derivatives vanish.
    CHECK((D.apply(xp_u, xp_v, p) + 0.5 * xp_uv.val(p)).norm() < 1e-9);
    CHECK((D.apply(xm_u, xm_v, p) - 0.5 * xm_uv.val(p)).norm() < 1e-9);
    CHECK(D.apply(xp_u, xm_v, p).norm() < 1e-9);
    CHECK(D.apply(xm_u, xp_v, p).norm() < 1e-9);
  }
}

TEST_CASE("diamond against the Dorfman bracket on mixed chirality") {
  GenMetric G(random_spd(3), random_antisym(3));
  GTForm phi(3, 3);
  std::vector<int> idx = {0, 1, 2};
  phi.set_coeff(idx, 0.9);
  phi = phi.antisymmetrized() * Cplx(6.0);
  InvariantTorusBackend B(G, phi);
  GenConnection D(B, ConnKind::PhiB);
  RVec p = RVec::Zero(3);
  // gamma = phi - db = phi (b constant).
  for (int t = 0; t < 20; ++t) {
    Section xp = Section::constant(G.lift_pm(random_vec(3), +1));
    Section ym = Section::constant(G.lift_pm(random_vec(3), -1));
    CVec lhs = D.apply(xp, ym, p) - D.apply(ym, xp, p);
    CVec rhs = dorfman(B, phi, xp, ym, p);
    CHECK((lhs - rhs).norm() < 1e-10);
  }
  // tau_T vanishes for the (phi,b)-connection on mixed chirality sections.
  Section xp = Section::constant(G.lift_pm(random_vec(3), +1));
  Section ym = Section::constant(G.lift_pm(random_vec(3), -1));
  CHECK(tm_torsion(D, xp, ym, p).norm() < 1e-10);
}

TEST_CASE("dT on functions is the anchor differential") {
  auto B = chart3();
  GenConnection D(B, ConnKind::PhiB);
  TFormField f;
  f.val = [](const RVec& p) {
    return GTForm::scalar(6, std::sin(p(0)) * std::cos(p(1)) + p(2));
  };
  RVec p = B.sample_point(rng);
  GTForm df = dT(D, f, p);
  CHECK(df.degree() == 1);
  std::vector<int> i0 = {0}, i1 = {1}, i2 = {2}, i3 = {3};
  CHECK(std::abs(df.coeff(i0) - Cplx(std::cos(p(0)) * std::cos(p(1)))) < 1e-8);
  CHECK(std::abs(df.coeff(i1) + Cplx(std::sin(p(0)) * std::sin(p(1)))) < 1e-8);
  CHECK(std::abs(df.coeff(i2) - Cplx(1.0)) < 1e-8);
  CHECK(std::abs(df.coeff(i3)) < 1e-12);  // no covector-direction derivative
}

TEST_CASE("dT squares to zero without torsion") {
  GenMetric G(random_spd(3), random_antisym(3));
  InvariantTorusBackend B(G, GTForm(3, 3));
  GenConnection D(B, ConnKind::PhiB);
  RVec p = RVec::Zero(3);
  for (int k = 0; k <= 2; ++k) {
    GTForm th = random_invariant_form(6, k, rng);
    GTForm d1 = dT(D, TFormField::constant(th), p);
    GTForm d2 = dT(D, TFormField::constant(d1), p);
    CHECK(d2.norm_inf() < 1e-11);
  }
}

TEST_CASE("dT_star is the adjoint on the invariant complex") {
  GenMetric G(random_spd(3), random_antisym(3));
  GTForm phi(3, 3);
  std::vector<int> idx = {0, 1, 2};
  phi.set_coeff(idx, 0.6);
  phi = phi.antisymmetrized() * Cplx(6.0);
  InvariantTorusBackend B(G, phi);
  GenConnection D(B, ConnKind::PhiB);
  RVec p = RVec::Zero(3);
  auto inner = [&](const GTForm& a, const GTForm& b) {
    GTForm s = a + b, d = a - b;
    return 0.25 * (form_norm_sq(s, G) - form_norm_sq(d, G));
  };
  for (int k = 0; k <= 2; ++k) {
    for (int t = 0; t < 10; ++t) {
      GTForm a = random_invariant_form(6, k, rng);
      GTForm b = random_invariant_form(6, k + 1, rng);
      Real lhs = inner(dT(D, TFormField::constant(a), p), b);
      Real rhs = inner(a, dT_star(D, TFormField::constant(b), p));
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
    }
  }
}

TEST_CASE("Cartan relation [L_x, iota_y] = iota_{x diamond y}") {
  GenMetric G(random_spd(3), random_antisym(3));
  GTForm phi(3, 3);
  std::vector<int> idx = {0, 1, 2};
  phi.set_coeff(idx, 1.1);
  phi = phi.antisymmetrized() * Cplx(6.0);
  InvariantTorusBackend B(G, phi);
  GenConnection D(B, ConnKind::PhiB);
  RVec p = RVec::Zero(3);
  for (int t = 0; t < 10; ++t) {
    Section x = Section::constant(random_vec(6));
    Section y = Section::constant(random_vec(6));
    GTForm th = random_invariant_form(6, 2, rng);
    TFormField thf = TFormField::constant(th);
    // L_x (iota_y th)
    TFormField iy = TFormField::constant(th.contract(y.val(p)));
    GTForm a = lie_T(D, x, iy, p);
    // iota_y (L_x th)
    GTForm b = lie_T(D, x, thf, p).contract(y.val(p));
    GTForm lhs = a - b;
    GTForm rhs = th.contract(diamond(D, x, y, p));
    CHECK((lhs - rhs).norm_inf() < 1e-10);
  }
}

TEST_CASE("line bundle eigendecomposition round trip") {
  GenMetric G(random_spd(3), random_antisym(3));
  InvariantTorusBackend B(G, GTForm(3, 3));
  LineBundleConnection L;
  L.u = Section::constant(random_vec(6));
  RVec p = RVec::Zero(3);
  auto e = L.eigendecompose(B, p);
  // u = 1/2 [ (g^{-1}nu_+ + b g^{-1}nu_+ + nu_+) - (g^{-1}nu_- + b g^{-1}nu_- - nu_-) ]
  const CMat gi = G.g.inverse().cast<Cplx>();
  const CMat b = G.b.cast<Cplx>();
  CVec rec(6);
  rec.head(3) = 0.5 * (gi * e.nu_plus - gi * e.nu_minus);
  rec.tail(3) = 0.5 * ((b * gi * e.nu_plus + e.nu_plus) - (b * gi * e.nu_minus - e.nu_minus));
  CHECK((rec - L.u.val(p)).norm() < 1e-12);
}
