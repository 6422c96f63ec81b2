// Unit tests for holomorphic Hermitian line bundles: Chern connection and
// curvature, type and flatness residuals, Hermitian-Einstein and Hitchin-form
// residuals, degrees and slope, and the Gauduchon condition.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <gengeo/bundles.hpp>

#include <random>

using namespace gengeo;

namespace {

std::mt19937_64 rng(0x47454F);

RMat std_i(int n) {
  RMat J0 = RMat::Zero(n, n);
  for (int k = 0; k + 1 < n; k += 2) {
    J0(k, k + 1) = -1.0;
    J0(k + 1, k) = 1.0;
  }
  return J0;
}

// Flat torus [0,1]^n with b = 0, phi = 0 as a quadrature-capable chart.
ChartBackend flat_torus(int n, int quad) {
  auto gfun = [n](const RVec&) {
    return GenMetric(RMat::Identity(n, n), RMat::Zero(n, n));
  };
  auto pfun = [n](const RVec&) { return GTForm(n, 3); };
  ChartBackend B(n, gfun, pfun, RVec::Zero(n), RVec::Ones(n), true);
  B.set_quad_points(quad);
  return B;
}

// alpha = mu z dzbar on the coordinate plane (2j, 2j+1); with mu = pi k / 2
// the Chern curvature of the pair (alpha, conj) is -2 pi i k dq^{2j}^dq^{2j+1}.
CVec alpha_twist(int n, int plane, Real mu, const RVec& q) {
  CVec a = CVec::Zero(n);
  const Cplx i(0.0, 1.0);
  const Cplx z(q(2 * plane), q(2 * plane + 1));
  a(2 * plane) += mu * z;
  a(2 * plane + 1) += -i * mu * z;
  return a;
}

constexpr Real k1 = 2.0, k2 = -1.0;

std::function<CVec(const RVec&)> t4_alpha() {
  return [](const RVec& q) {
    return CVec(alpha_twist(4, 0, 0.5 * M_PI * k1, q) +
                alpha_twist(4, 1, 0.5 * M_PI * k2, q));
  };
}

Real trig_scale(const RVec& q) {
  return 0.3 * std::sin(2.0 * M_PI * q(0)) +
         0.2 * std::cos(2.0 * M_PI * (q(2) + q(3)));
}

}  // namespace

TEST_CASE("T^4 constant-curvature bundle: blocks, HE, degrees, Hitchin form") {
  ChartBackend B = flat_torus(4, 4);
  const FieldSet F = FieldSet::of_backend(B);
  const GenConnection D(B, ConnKind::PhiB, F);
  const RMat I = std_i(4);
  const BiHermitian H = BiHermitian::constant(I, I);
  const RVec p = B.sample_point(rng);
  const GenMetric G = F.metric(p);
  const int n = 4;

  auto alpha = t4_alpha();
  const HoloLineBundle V = HoloLineBundle::make(B, F, H, alpha, alpha);

  SUBCASE("classical curvature hits the (k1, k2) target") {
    const GTForm Fp = classical_chern_curvature(V, +1, p);
    const Cplx i(0.0, 1.0);
    CHECK(std::abs(Fp.eval({CVec(CVec::Unit(4, 0)), CVec(CVec::Unit(4, 1))}) -
                   (-2.0 * M_PI * i * k1)) < 1e-9);
    CHECK(std::abs(Fp.eval({CVec(CVec::Unit(4, 2)), CVec(CVec::Unit(4, 3))}) -
                   (-2.0 * M_PI * i * k2)) < 1e-9);
    CHECK(std::abs(Fp.eval({CVec(CVec::Unit(4, 0)), CVec(CVec::Unit(4, 2))})) < 1e-9);
  }

  SUBCASE("dbar flatness and the (1,1)-type of the Chern curvature") {
    CHECK(jholo_residual(V, D, p) < 1e-10);
    CHECK(chern_type_residual(V, D, p) < 1e-10);
  }

  SUBCASE("generalized curvature blocks reproduce the classical pipeline") {
    const GTForm Fg = chern_curvature(V, D, p);
    Real worst = 0.0;
    for (int s : {+1, -1}) {
      const GTForm Fc = classical_chern_curvature(V, s, p);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          const CVec x = G.lift_pm(RVec::Unit(n, a), s).cast<Cplx>();
          const CVec y = G.lift_pm(RVec::Unit(n, b), s).cast<Cplx>();
          worst = std::max(
              worst, std::abs(Fg.eval({x, y}) - Fc.eval({CVec(CVec::Unit(n, a)),
                                                         CVec(CVec::Unit(n, b))})));
        }
    }
    CHECK(worst < 1e-10);

    // Mixed block: F(x_+, y_-) = (d_X nu_-)(Y) - (d_Y nu_+)(X) on flat data.
    Real worst_mixed = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        const CVec x = G.lift_pm(RVec::Unit(n, a), +1).cast<Cplx>();
        const CVec y = G.lift_pm(RVec::Unit(n, b), -1).cast<Cplx>();
        auto num = [&V](int sgn) {
          return [&V, sgn](const RVec& q) { return classical_nu(V, sgn, q); };
        };
        const Cplx rhs = B.d_closure(num(-1), p, a)(b) - B.d_closure(num(+1), p, b)(a);
        worst_mixed = std::max(worst_mixed, std::abs(Fg.eval({x, y}) - rhs));
      }
    CHECK(worst_mixed < 1e-10);
  }

  SUBCASE("Lambda_{J-} contraction splits into the classical contractions") {
    const GTForm Fg = chern_curvature(V, D, p);
    const Cplx lam = lambda_jminus(Fg, G, V.structure(p).J.cast<Cplx>());
    const Cplx lamcl = lambda_classical(classical_chern_curvature(V, +1, p), G.g, I) +
                       lambda_classical(classical_chern_curvature(V, -1, p), G.g, I);
    CHECK(std::abs(lam - lamcl) < 1e-10);
  }

  SUBCASE("Hermitian-Einstein residual and the constant c") {
    const Real c = 2.0 * M_PI * (k1 + k2);
    CHECK(he_residual(V, D, c, p) < 1e-10);
    // An off constant reports exactly the gap |2 (c - c')|.
    CHECK(std::abs(he_residual(V, D, c + 0.5, p) - 1.0) < 1e-10);
    CHECK(std::abs(he_constant(V, D) - c) < 1e-8);
  }

  SUBCASE("degrees: two pipelines, halving identity, slope") {
    const Real dG = degree(V, D);
    const auto [dp, dm] = classical_degrees(V);
    CHECK(std::abs(dG - (k1 + k2)) < 1e-8);
    CHECK(std::abs(dp - (k1 + k2)) < 1e-8);
    CHECK(std::abs(dm - (k1 + k2)) < 1e-8);
    CHECK(std::abs(dG - 0.5 * (dp + dm)) < 1e-8);
    CHECK(slope(V, D) == dG);
  }

  SUBCASE("Hitchin wedge form co-vanishes with the HE equation") {
    const Real c = 2.0 * M_PI * (k1 + k2);
    CHECK(hitchin_form_residual(V, c, p) < 1e-10);
    CHECK(hitchin_form_residual(V, c + 0.5, p) > 0.4);
    CHECK(epsilon_orientation(G.g, I, I) == 0);
    // In complex dimension 2, -I induces the same orientation.
    CHECK(epsilon_orientation(G.g, I, RMat(-I)) == 0);
  }

  SUBCASE("metric change h -> e^{2f} h shifts F by -2 del_J dbar_J f") {
    const HoloLineBundle Vf = HoloLineBundle::make(B, F, H, alpha, alpha, trig_scale);
    const GTForm Fg = chern_curvature(V, D, p);
    const GTForm Ff = chern_curvature(Vf, D, p);
    const GenComplexStructure Jc = V.structure(p);
    const TFormField f0 =
        scalar_field(2 * n, [](const RVec& q) { return Cplx(trig_scale(q)); });
    const TFormField dbarf = projected_dT_field(D, Jc, f0, 0, 1);
    const GTForm shift = type_project(Jc, dT(D, dbarf, p), 1, 1) * Cplx(-2.0);
    CHECK((Ff - Fg).norm_inf() > 1.0);
    CHECK((Ff - Fg - shift).norm_inf() < 1e-9);
    CHECK(jholo_residual(Vf, D, p) < 1e-9);
    CHECK(chern_type_residual(Vf, D, p) < 1e-9);
    // deg_G is h-independent on the (Gauduchon) flat fixture.
    CHECK(std::abs(degree(Vf, D) - degree(V, D)) < 1e-7);
  }
}

TEST_CASE("trivial bundle: zero curvature, degree and residuals") {
  ChartBackend B = flat_torus(4, 4);
  const FieldSet F = FieldSet::of_backend(B);
  const GenConnection D(B, ConnKind::PhiB, F);
  const RMat I = std_i(4);
  const RVec p = B.sample_point(rng);

  const HoloLineBundle V0 =
      HoloLineBundle::trivial(B, F, BiHermitian::constant(I, I));
  CHECK(chern_curvature(V0, D, p).norm_inf() < 1e-12);
  CHECK(degree(V0, D) == 0.0);
  CHECK(he_residual(V0, D, 0.0, p) < 1e-12);
  CHECK(hitchin_form_residual(V0, 0.0, p) < 1e-12);

  // Rescaled trivial bundle on the I_- = -I_+ fixture: still J-holomorphic,
  // (1,1), and of degree zero.
  const BiHermitian Hm = BiHermitian::constant(I, RMat(-I));
  const HoloLineBundle Vt = HoloLineBundle::trivial(B, F, Hm, trig_scale);
  CHECK(jholo_residual(Vt, D, p) < 1e-9);
  CHECK(chern_type_residual(Vt, D, p) < 1e-9);
  CHECK(chern_curvature(Vt, D, p).norm_inf() > 1.0);
  CHECK(std::abs(degree(Vt, D)) < 1e-8);
}

TEST_CASE("Gauduchon condition and the operator P_J") {
  ChartBackend B = flat_torus(4, 4);
  const FieldSet F = FieldSet::of_backend(B);
  const GenConnection D(B, ConnKind::PhiB, F);
  const BiHermitian H = BiHermitian::constant(std_i(4), std_i(4));
  const RVec p = B.sample_point(rng);

  auto f1 = [](const RVec& q) { return Cplx(std::sin(2.0 * M_PI * q(0))); };
  auto f2 = [](const RVec& q) { return Cplx(std::cos(2.0 * M_PI * (q(1) + q(3)))); };

  SUBCASE("P_J reduces to the flat Laplacian") {
    const Real lap1 = -4.0 * M_PI * M_PI * std::sin(2.0 * M_PI * p(0));
    CHECK(std::abs(pj_operator(D, H, f1, p) - (-lap1)) < 1e-5);
    const Real lap2 = -8.0 * M_PI * M_PI * std::cos(2.0 * M_PI * (p(1) + p(3)));
    CHECK(std::abs(pj_operator(D, H, f2, p) - (-lap2)) < 1e-5);
  }

  SUBCASE("flat torus is J-Gauduchon") {
    CHECK(gauduchon_residual(D, H, {f1, f2}) < 1e-8);
    // Constant f: the integrand vanishes identically.
    CHECK(std::abs(pj_operator(D, H, [](const RVec&) { return Cplx(1.0); }, p)) <
          1e-12);
    // The classical wedge form of the condition (m = 2) also vanishes.
    CHECK(gauduchon_form_residual(B, F, H, p) < 1e-10);
    const BiHermitian Hm = BiHermitian::constant(std_i(4), RMat(-std_i(4)));
    CHECK(gauduchon_form_residual(B, F, Hm, p) < 1e-10);
  }
}

TEST_CASE("T^2 Chern number integrality") {
  ChartBackend B = flat_torus(2, 8);
  const FieldSet F = FieldSet::of_backend(B);
  const GenConnection D(B, ConnKind::PhiB, F);
  const RMat I = std_i(2);
  const BiHermitian H = BiHermitian::constant(I, I);
  const Real k = 3.0;
  auto a2 = [k](const RVec& q) { return alpha_twist(2, 0, 0.5 * M_PI * k, q); };
  const HoloLineBundle V = HoloLineBundle::make(B, F, H, a2, a2);

  const Cplx i(0.0, 1.0);
  const Real cherncl =
      B.integrate([&](const RVec& q) {
        return (i * classical_chern_curvature(V, +1, q)
                        .eval({CVec(CVec::Unit(2, 0)), CVec(CVec::Unit(2, 1))}))
            .real();
      }) /
      (2.0 * M_PI);
  CHECK(std::abs(cherncl - k) < 1e-8);

  const GenMetric G = F.metric(RVec::Zero(2));
  const Real cherngen =
      B.integrate([&](const RVec& q) {
        const GTForm Fq = chern_curvature(V, D, q);
        return (i * Fq.eval({G.lift_pm(RVec::Unit(2, 0), +1).cast<Cplx>(),
                             G.lift_pm(RVec::Unit(2, 1), +1).cast<Cplx>()}))
            .real();
      }) /
      (2.0 * M_PI);
  CHECK(std::abs(cherngen - k) < 1e-8);
  CHECK(std::abs(degree(V, D) - k) < 1e-8);
}

TEST_CASE("non-flat dbar datum is detected and rejected") {
  ChartBackend B = flat_torus(4, 4);
  const FieldSet F = FieldSet::of_backend(B);
  const GenConnection D(B, ConnKind::PhiB, F);
  const BiHermitian H = BiHermitian::constant(std_i(4), std_i(4));
  const RVec p = B.sample_point(rng);

  const Cplx i(0.0, 1.0);
  auto bad = [i](const RVec& q) {
    CVec a = CVec::Zero(4);
    const Cplx zb1(q(0), -q(1));
    a(2) = zb1;  // ~ conj(z_1) dconj(z_2): not dbar-closed
    a(3) = -i * zb1;
    return a;
  };
  const HoloLineBundle Vb = HoloLineBundle::make(B, F, H, bad, bad);
  CHECK(jholo_residual(Vb, D, p) > 0.5);
  CHECK_THROWS_AS(chern_curvature(Vb, D, p, true), std::invalid_argument);
}
