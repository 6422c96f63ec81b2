// Unit tests for the computation backends.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <gengeo/backends.hpp>

using namespace gengeo;

TEST_CASE("torus finite differences and quadrature") {
  auto B = InvariantTorusBackend::flat(3, 1.0);
  CHECK(B.n() == 3);
  CHECK(B.invariant_fields());
  // phi = dx1 ^ dx2 ^ dx3
  std::vector<int> idx = {0, 1, 2};
  CHECK(std::abs(B.phi(RVec::Zero(3)).coeff(idx) - Cplx(1.0)) < 1e-14);
  idx = {1, 0, 2};
  CHECK(std::abs(B.phi(RVec::Zero(3)).coeff(idx) + Cplx(1.0)) < 1e-14);

  auto f = [](const RVec& p) {
    CVec v(1);
    v(0) = std::sin(2 * M_PI * p(0)) * std::cos(2 * M_PI * p(1));
    return v;
  };
  RVec p(3);
  p << 0.3, 0.7, 0.1;
  Cplx d0 = B.d_closure(f, p, 0)(0);
  Real exact = 2 * M_PI * std::cos(2 * M_PI * 0.3) * std::cos(2 * M_PI * 0.7);
  CHECK(std::abs(d0 - Cplx(exact)) < 1e-9);

  CHECK(B.integrate([](const RVec&) { return 2.0; }) == doctest::Approx(2.0));
}

TEST_CASE("quaternion model of SU(2)") {
  RVec e(4), qi(4), qj(4), qk(4);
  e << 1, 0, 0, 0;
  qi << 0, 1, 0, 0;
  qj << 0, 0, 1, 0;
  qk << 0, 0, 0, 1;
  CHECK((quat::mul(qi, qj) - qk).norm() < 1e-15);
  CHECK((quat::mul(qj, qi) + qk).norm() < 1e-15);
  CHECK((quat::mul(qi, qi) + e).norm() < 1e-15);

  auto B = SU2Backend::biinvariant(1.0);
  CHECK(B.n() == 3);
  // eps structure constants: [E_0, E_1] = E_2 etc.
  CHECK((B.frame_bracket(0, 1) - RVec(Eigen::Vector3d(0, 0, 1))).norm() < 1e-15);
  CHECK((B.frame_bracket(1, 0) + RVec(Eigen::Vector3d(0, 0, 1))).norm() < 1e-15);
  CHECK(B.frame_bracket(1, 1).norm() < 1e-15);
  // g = 2 Id, gamma(E_i,E_j,E_k) = 2 eps_{ijk}
  CHECK((B.metric(e).g - 2.0 * RMat::Identity(3, 3)).norm() < 1e-14);
  std::vector<int> idx = {0, 1, 2};
  CHECK(std::abs(B.phi(e).coeff(idx) - Cplx(2.0)) < 1e-14);
}

TEST_CASE("invariant fields on SU(2): analytic vs numerical derivatives") {
  auto B = SU2Backend::biinvariant(1.0);
  std::mt19937_64 rng(0x47454F);
  for (int trial = 0; trial < 5; ++trial) {
    RVec p = B.sample_point(rng);
    RVec u(3);
    std::normal_distribution<Real> gauss(0.0, 1.0);
    for (int i = 0; i < 3; ++i) u(i) = gauss(rng);

    // Left-invariant: constant coefficients.
    Section xl = B.left_invariant_field(u);
    for (int i = 0; i < 3; ++i) CHECK(B.d_section(xl, p, i).norm() < 1e-15);

    // Right-invariant: FD of the value closure must reproduce the analytic
    // derivative rule d_i c = -[E_i, c].
    Section xr = B.right_invariant_field(u);
    for (int i = 0; i < 3; ++i) {
      CVec analytic = xr.dval(p, i);
      CVec numeric = B.d_closure(xr.val, p, i);
      CHECK((analytic - numeric).norm() < 1e-9);
    }
    // Coefficients of X_u^r at the identity are u itself.
    RVec e(4);
    e << 1, 0, 0, 0;
    CHECK((xr.val(e).head(3) - u.cast<Cplx>()).norm() < 1e-14);

    // Covector variants are g * (vector coefficients).
    Section tr = B.right_invariant_covector(u);
    CHECK((tr.val(p).tail(3) - CVec(2.0 * xr.val(p).head(3))).norm() < 1e-13);
  }
}

TEST_CASE("chart backend differentiates field closures") {
  const int n = 2;
  auto gfun = [](const RVec&) {
    return GenMetric(RMat::Identity(2, 2), RMat::Zero(2, 2));
  };
  auto pfun = [](const RVec&) { return GTForm(2, 3); };
  RVec lo = RVec::Zero(n), hi = RVec::Ones(n);
  ChartBackend B(n, gfun, pfun, lo, hi);
  CHECK_FALSE(B.invariant_fields());
  RVec p(2);
  p << 0.5, 0.5;
  auto cl = [](const RVec& q) {
    CVec v(1);
    v(0) = 1.0 + 0.5 * std::sin(q(1));
    return v;
  };
  Cplx d1 = B.d_closure(cl, p, 1)(0);
  CHECK(std::abs(d1 - Cplx(0.5 * std::cos(0.5))) < 1e-10);

  // Quadrature integrates smooth periodic data on the unit square.
  auto f = [](const RVec& q) { return 1.0 + std::sin(2 * M_PI * q(0)); };
  CHECK(B.integrate(f) == doctest::Approx(1.0).epsilon(1e-6));
}
