// Geometric Lax flows: generic Lax-pair integration, the 2-tensor Lax flow
// and its (g, b) system, generalized-diffeomorphism and line-bundle curvature
// flows, the Ricci Lax flow with its generalized-Ricci-flow equivalence,
// conformal forms, soliton residuals, the Bismut-Ricci Lax flow and the
// Kahler-Ricci reduction.
//
// All flows are desk-scale ODE systems: the fields are invariant (constant
// frame coefficients), the state is the pair of matrices (g_t, b_t), and the
// integrator is fixed-step classical RK4.
#pragma once

#include "gengeo/curvature.hpp"

#include <utility>

namespace gengeo {

// ---------------------------------------------------------------------------
// Flow state and trajectories
// ---------------------------------------------------------------------------

enum class FlowStatus {
  Ok,
  NonFinite,        // RHS or state stopped being finite
  LostPositivity,   // min eigenvalue of g below threshold
  Blowup,           // a state norm exceeded the cap
};

struct FlowState {
  Real t = 0.0;
  GenMetric G;
};

struct FlowTrajectory {
  std::vector<FlowState> states;
  FlowStatus status = FlowStatus::Ok;
  // max over accepted steps of |Gb^2 - Id|_inf (operator-route reconstruction
  // / structure invariant).
  Real max_gb_residual = 0.0;
  // max over accepted steps of the Lax-compatibility residual of the operator
  // (operator routes only).
  Real max_lax_residual = 0.0;

  const FlowState& front() const { return states.front(); }
  const FlowState& back() const { return states.back(); }
};

namespace detail {

constexpr Real kMinEig = 1e-8;   // positivity abort threshold for g
constexpr Real kNormCap = 1e8;   // blow-up abort threshold

inline Real min_eig_sym(const RMat& g) {
  Eigen::SelfAdjointEigenSolver<RMat> es(0.5 * (g + g.transpose()));
  return es.eigenvalues().minCoeff();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Generic matrix Lax integration: dP/dt = [L(t, P), P]
// ---------------------------------------------------------------------------

using MatrixLax = std::function<RMat(Real, const RMat&)>;

struct MatrixTrajectory {
  std::vector<Real> times;
  std::vector<RMat> ps;
  FlowStatus status = FlowStatus::Ok;

  const RMat& back() const { return ps.back(); }
};

inline MatrixTrajectory lax_integrate(const MatrixLax& L, const RMat& P0, Real t_end,
                                      Real dt = 1e-3) {
  if (dt <= 0.0) throw std::invalid_argument("lax_integrate requires dt > 0");
  MatrixTrajectory out;
  out.times.push_back(0.0);
  out.ps.push_back(P0);
  auto rhs = [&L](Real t, const RMat& P) {
    const RMat Lt = L(t, P);
    return RMat(Lt * P - P * Lt);
  };
  Real t = 0.0;
  RMat P = P0;
  const long steps = static_cast<long>(std::llround(t_end / dt));
  for (long s = 0; s < steps; ++s) {
    const RMat k1 = rhs(t, P);
    const RMat k2 = rhs(t + 0.5 * dt, RMat(P + 0.5 * dt * k1));
    const RMat k3 = rhs(t + 0.5 * dt, RMat(P + 0.5 * dt * k2));
    const RMat k4 = rhs(t + dt, RMat(P + dt * k3));
    RMat Pn = P + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!Pn.allFinite()) {
      out.status = FlowStatus::NonFinite;
      return out;
    }
    if (Pn.norm() > detail::kNormCap) {
      out.status = FlowStatus::Blowup;
      return out;
    }
    P = std::move(Pn);
    t += dt;
    out.times.push_back(t);
    out.ps.push_back(P);
  }
  return out;
}

// ---------------------------------------------------------------------------
// TM-form <-> operator conversions and structural residuals
// ---------------------------------------------------------------------------

// Endomorphism of a degree-2 TM-form through 2<op x, y> = theta(x, y).
inline RMat form_operator(const GTForm& th) {
  assert(th.degree() == 2);
  const int n = th.dim() / 2;
  const RMat Theta = th.as_matrix().real();
  return RMat(-2.0 * pairing(n) * Theta);
}

// theta(x, y) recovered from an operator: theta = -1/2 P^{-1} op = -2 P op.
inline RMat operator_form(const RMat& op) {
  const int n = static_cast<int>(op.rows()) / 2;
  RMat Theta = -0.5 * (pairing(n).inverse()) * op;
  return RMat(0.5 * (Theta - Theta.transpose()));
}

// Operator of the TM-form with mixed components theta(x^{b-}, y^{b+}) =
// P(X, Y) and vanishing same-chirality components (P given in the backend
// frame).
inline RMat two_tensor_theta(const GenMetric& G, const RMat& P) {
  const int n = G.n();
  const RMat F = G.orthonormal_frame();
  const RMat V = F.topLeftCorner(n, n);  // g-orthonormal tangent frame
  const RMat Pv = V.transpose() * P * V;
  RMat Th_frame = RMat::Zero(2 * n, 2 * n);
  Th_frame.bottomLeftCorner(n, n) = Pv;    // theta(f_i^-, f_j^+) = P(V_i, V_j)
  Th_frame.topRightCorner(n, n) = -Pv.transpose();
  const RMat Fi = F.inverse();
  const RMat Theta = Fi.transpose() * Th_frame * Fi;
  return RMat(-2.0 * pairing(n) * Theta);
}

// G^b-conformal form operator with weights (r, s): theta(x^{b-}, y^{b+}) =
// r g(X, Y) + s b(X, Y).
inline RMat conformal_form_operator(const GenMetric& G, Real r, Real s) {
  return two_tensor_theta(G, RMat(r * G.g + s * G.b));
}

// Mixed 2-tensor of a TM-form: P(i, j) = theta(lift_-(e_i), lift_+(e_j)).
inline RMat theta_mixed_tensor(const GTForm& th, const GenMetric& G) {
  assert(th.degree() == 2);
  const int n = G.n();
  RMat P(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      RVec ei = RVec::Zero(n), ej = RVec::Zero(n);
      ei(i) = 1.0;
      ej(j) = 1.0;
      P(i, j) =
          th.eval({G.lift_pm(ei, -1).cast<Cplx>(), G.lift_pm(ej, +1).cast<Cplx>()})
              .real();
    }
  return P;
}

// Residual of the Lax-compatibility (mixed-chirality) condition
// <L x^{b+}, y^{b-}> + <x^{b+}, L y^{b-}> = 0, maximal over frame lifts.
inline Real lax_compatibility_residual(const RMat& L, const GenMetric& G) {
  const int n = G.n();
  const RMat F = G.orthonormal_frame();
  const RMat S = L.transpose() * pairing(n) + pairing(n) * L;
  const RMat Sf = F.transpose() * S * F;
  return std::max(Sf.topRightCorner(n, n).cwiseAbs().maxCoeff(),
                  Sf.bottomLeftCorner(n, n).cwiseAbs().maxCoeff());
}

// |Gb^2 - Id|_inf.
inline Real gb_square_residual(const GenMetric& G) {
  const RMat Gb = G.Gb();
  return (Gb * Gb - RMat::Identity(Gb.rows(), Gb.cols())).cwiseAbs().maxCoeff();
}

// Sorted-eigenvalue deviation of Gb from {-1 (x n), +1 (x n)}.
inline Real gb_spectrum_residual(const GenMetric& G) {
  const int n = G.n();
  Eigen::EigenSolver<RMat> es(G.Gb());
  std::vector<Real> ev(2 * n);
  Real imag = 0.0;
  for (int i = 0; i < 2 * n; ++i) {
    ev[i] = es.eigenvalues()(i).real();
    imag = std::max(imag, std::abs(es.eigenvalues()(i).imag()));
  }
  std::sort(ev.begin(), ev.end());
  Real r = imag;
  for (int i = 0; i < 2 * n; ++i)
    r = std::max(r, std::abs(ev[i] - (i < n ? -1.0 : 1.0)));
  return r;
}

// ---------------------------------------------------------------------------
// (g, b) route and operator route integrators
// ---------------------------------------------------------------------------

// RHS returning (dg/dt, db/dt).
using GBRhs = std::function<std::pair<RMat, RMat>(Real, const GenMetric&)>;

inline FlowTrajectory integrate_gb(const GBRhs& rhs, const GenMetric& G0, Real t_end,
                                   Real dt = 1e-3) {
  if (dt <= 0.0) throw std::invalid_argument("integrate_gb requires dt > 0");
  FlowTrajectory out;
  out.states.push_back({0.0, G0});
  const int n = G0.n();
  GenMetric G = G0;
  Real t = 0.0;
  const long steps = static_cast<long>(std::llround(t_end / dt));
  for (long s = 0; s < steps; ++s) {
    auto f = [&rhs](Real tt, const RMat& g, const RMat& b) {
      return rhs(tt, GenMetric(g, b));
    };
    const auto k1 = f(t, G.g, G.b);
    const auto k2 = f(t + 0.5 * dt, RMat(G.g + 0.5 * dt * k1.first),
                      RMat(G.b + 0.5 * dt * k1.second));
    const auto k3 = f(t + 0.5 * dt, RMat(G.g + 0.5 * dt * k2.first),
                      RMat(G.b + 0.5 * dt * k2.second));
    const auto k4 =
        f(t + dt, RMat(G.g + dt * k3.first), RMat(G.b + dt * k3.second));
    RMat gn = G.g + (dt / 6.0) * (k1.first + 2.0 * k2.first + 2.0 * k3.first + k4.first);
    RMat bn =
        G.b + (dt / 6.0) * (k1.second + 2.0 * k2.second + 2.0 * k3.second + k4.second);
    if (!gn.allFinite() || !bn.allFinite()) {
      out.status = FlowStatus::NonFinite;
      return out;
    }
    if (gn.norm() > detail::kNormCap || bn.norm() > detail::kNormCap) {
      out.status = FlowStatus::Blowup;
      return out;
    }
    if (detail::min_eig_sym(gn) < detail::kMinEig) {
      out.status = FlowStatus::LostPositivity;
      return out;
    }
    G = GenMetric(RMat(0.5 * (gn + gn.transpose())), RMat(0.5 * (bn - bn.transpose())));
    t += dt;
    out.states.push_back({t, G});
    out.max_gb_residual = std::max(out.max_gb_residual, gb_square_residual(G));
  }
  (void)n;
  return out;
}

// Lax operator rule evaluated on the reconstructed generalized metric.
using OperatorRule = std::function<RMat(Real, const GenMetric&)>;

inline FlowTrajectory integrate_operator(const OperatorRule& L, const GenMetric& G0,
                                         Real t_end, Real dt = 1e-3) {
  if (dt <= 0.0) throw std::invalid_argument("integrate_operator requires dt > 0");
  FlowTrajectory out;
  out.states.push_back({0.0, G0});
  const int d = 2 * G0.n();
  RMat M = G0.Gb();
  Real t = 0.0;
  auto rhs = [&L](Real tt, const RMat& Mm) {
    const GenMetric Gr = GenMetric::from_Gb(Mm);
    const RMat Lt = L(tt, Gr);
    return RMat(Lt * Mm - Mm * Lt);
  };
  const long steps = static_cast<long>(std::llround(t_end / dt));
  for (long s = 0; s < steps; ++s) {
    const RMat k1 = rhs(t, M);
    const RMat k2 = rhs(t + 0.5 * dt, RMat(M + 0.5 * dt * k1));
    const RMat k3 = rhs(t + 0.5 * dt, RMat(M + 0.5 * dt * k2));
    const RMat k4 = rhs(t + dt, RMat(M + dt * k3));
    RMat Mn = M + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!Mn.allFinite()) {
      out.status = FlowStatus::NonFinite;
      return out;
    }
    if (Mn.norm() > detail::kNormCap) {
      out.status = FlowStatus::Blowup;
      return out;
    }
    GenMetric Gr = GenMetric::from_Gb(Mn);
    if (detail::min_eig_sym(Gr.g) < detail::kMinEig) {
      out.status = FlowStatus::LostPositivity;
      return out;
    }
    const Real rec = (Mn * Mn - RMat::Identity(d, d)).cwiseAbs().maxCoeff();
    out.max_gb_residual = std::max(out.max_gb_residual, rec);
    out.max_lax_residual =
        std::max(out.max_lax_residual, lax_compatibility_residual(L(t, Gr), Gr));
    M = std::move(Mn);
    t += dt;
    out.states.push_back({t, Gr});
  }
  return out;
}

// ---------------------------------------------------------------------------
// 2-tensor Lax flow
// ---------------------------------------------------------------------------

// A family of 2-tensors P_t depending on the current generalized metric,
// as an n x n matrix in the backend frame.
using TwoTensorFamily = std::function<RMat(Real, const GenMetric&)>;

// Operator route: dGb/dt = [theta_t, Gb] with theta_t the mixed-block form
// operator of P_t.
inline FlowTrajectory two_tensor_lax(const TwoTensorFamily& P, const GenMetric& G0,
                                     Real t_end, Real dt = 1e-3) {
  OperatorRule L = [&P](Real t, const GenMetric& G) {
    return two_tensor_theta(G, P(t, G));
  };
  return integrate_operator(L, G0, t_end, dt);
}

// (g, b) route: dg/dt = -P^s, db/dt = -P^a.  The antisymmetric sign follows
// the orientation of the b matrix used by GenMetric, which pairs as
// <dG^b x^-, y^+> = (dg + db)(X, Y).
inline FlowTrajectory two_tensor_gb(const TwoTensorFamily& P, const GenMetric& G0,
                                    Real t_end, Real dt = 1e-3) {
  GBRhs rhs = [&P](Real t, const GenMetric& G) {
    const RMat Pm = P(t, G);
    return std::make_pair(RMat(-0.5 * (Pm + Pm.transpose())),
                          RMat(-0.5 * (Pm - Pm.transpose())));
  };
  return integrate_gb(rhs, G0, t_end, dt);
}

// ---------------------------------------------------------------------------
// Invariant exterior algebra helpers (constant frame coefficients)
// ---------------------------------------------------------------------------

// d of a constant-coefficient 2-form in the backend frame:
// db(E_i, E_j, E_k) = -b([E_i,E_j], E_k) + b([E_i,E_k], E_j) - b([E_j,E_k], E_i).
inline GTForm invariant_db(const Backend& B, const RMat& b) {
  const int n = B.n();
  GTForm out(n, 3);
  auto bval = [&b](const RVec& X, int j) { return (X.transpose() * b.col(j))(0); };
  std::vector<int> idx(3);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const RVec cij = B.frame_bracket(i, j);
        const RVec cik = B.frame_bracket(i, k);
        const RVec cjk = B.frame_bracket(j, k);
        idx = {i, j, k};
        out.set_coeff(idx, -bval(cij, k) + bval(cik, j) - bval(cjk, i));
      }
  return out;
}

// d of a constant-coefficient 1-form: deta(E_i, E_j) = -eta([E_i, E_j]).
inline RMat invariant_d_oneform(const Backend& B, const RVec& eta) {
  const int n = B.n();
  RMat out = RMat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = -eta.dot(B.frame_bracket(i, j));
  return out;
}

// Lie derivative of a constant-coefficient symmetric 2-tensor along a
// constant-coefficient field Z: (L_Z g)(E_i, E_j) = -g([Z,E_i], E_j) -
// g(E_i, [Z,E_j]).
inline RMat invariant_lie_tensor(const Backend& B, const RVec& Z, const RMat& g) {
  const int n = B.n();
  RMat out = RMat::Zero(n, n);
  std::vector<RVec> brk(n, RVec::Zero(n));  // [Z, E_i]
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) brk[i] += Z(k) * B.frame_bracket(k, i);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out(i, j) = -(brk[i].transpose() * g.col(j))(0) - (g.row(i) * brk[j])(0);
  return out;
}

// The twisted 3-form phi = gamma + db for the current slice.
inline GTForm flow_phi(const Backend& B, const GTForm& gamma, const RMat& b) {
  return gamma + invariant_db(B, b);
}

// ---------------------------------------------------------------------------
// Generalized-diffeomorphism and line-bundle curvature flows
// ---------------------------------------------------------------------------

// Closed-form 2-tensor of the flow generated by a constant section
// u = Z + zeta:  P = L_Z g + d(zeta - iota_Z b) - iota_Z phi, so that
// dg/dt = -L_Z g and db/dt = -L_Z b + d zeta - iota_Z gamma.
inline RMat gen_diffeo_two_tensor(const Backend& B, const GTForm& gamma, const RVec& u,
                                  const GenMetric& G) {
  const int n = B.n();
  const RVec Z = u.head(n), zeta = u.tail(n);
  const GTForm phi = flow_phi(B, gamma, G.b);
  const RVec nu0 = zeta - G.b * Z;
  RMat P = invariant_lie_tensor(B, Z, G.g) + invariant_d_oneform(B, nu0);
  P -= phi.contract(Z).as_matrix().real();
  return P;
}

// The same 2-tensor through the curvature route: theta = dT(u as a TM-form)
// for the phi-b connection of the slice, restricted to its mixed components.
inline RMat curvature_two_tensor(const Backend& B, const GTForm& gamma, const RVec& u,
                                 const GenMetric& G, const RVec& p) {
  FieldSet F = FieldSet::constant(G, flow_phi(B, gamma, G.b));
  GenConnection D(B, ConnKind::PhiB, F);
  TFormField uform = TFormField::constant(GTForm::from_vector(u));
  const GTForm th = dT(D, uform, p);
  return theta_mixed_tensor(th, G);
}

// The classical decomposition of the line-bundle route (Thm-7.4-type
// identities): returns (iF_0, psi-transport) = (d nu_0, L_{g^{-1}psi} g) so
// that dg/dt = -L_{g^{-1}psi} g and db/dt = iF_0 - iota_{g^{-1}psi} phi.
struct LineBundleFlowPieces {
  RMat f0;      // i F_0 = d(zeta - iota_Z b)
  RMat lie_g;   // L_Z g with Z = g^{-1} psi
  RVec Z;       // tangent part of u
};

inline LineBundleFlowPieces line_bundle_flow_pieces(const Backend& B, const RVec& u,
                                                    const GenMetric& G) {
  const int n = B.n();
  LineBundleFlowPieces out;
  out.Z = u.head(n);
  const RVec nu0 = RVec(u.tail(n)) - G.b * out.Z;
  out.f0 = invariant_d_oneform(B, nu0);
  out.lie_g = invariant_lie_tensor(B, out.Z, G.g);
  return out;
}

// (g, b) flow of the push-forward by the generalized diffeomorphisms
// generated by a constant section u (gamma fixed and closed).
inline FlowTrajectory gen_diffeo_flow(const Backend& B, const GTForm& gamma,
                                      const RVec& u, const GenMetric& G0, Real t_end,
                                      Real dt = 1e-3) {
  TwoTensorFamily P = [&B, &gamma, u](Real, const GenMetric& G) {
    return gen_diffeo_two_tensor(B, gamma, u, G);
  };
  return two_tensor_gb(P, G0, t_end, dt);
}

// Lax (operator) route of the same flow, through the curvature form.
inline FlowTrajectory line_bundle_curvature_flow(const Backend& B, const GTForm& gamma,
                                                 const RVec& u, const GenMetric& G0,
                                                 const RVec& p, Real t_end,
                                                 Real dt = 1e-3) {
  TwoTensorFamily P = [&B, &gamma, u, p](Real, const GenMetric& G) {
    return curvature_two_tensor(B, gamma, u, G, p);
  };
  return two_tensor_lax(P, G0, t_end, dt);
}

// ---------------------------------------------------------------------------
// Ricci Lax flow and the generalized Ricci flow
// ---------------------------------------------------------------------------

// d/dt (g -+ b) = -2 Rc^{+-phi} split into the (g, b) system.
inline GBRhs grf_rhs(const Backend& B, const GTForm& gamma, const RVec& p) {
  return [&B, gamma, p](Real, const GenMetric& G) {
    FieldSet F = FieldSet::constant(G, flow_phi(B, gamma, G.b));
    ClassicalCurvature C = classical_curvature(B, F, p);
    const RMat dg = -(C.ric_p + C.ric_p.transpose());
    const RMat db = -(C.ric_p - C.ric_p.transpose());
    return std::make_pair(dg, db);
  };
}

// The textbook form of the same system: dg/dt = -2 Rc + 1/2 phi^2.  In the
// b-matrix orientation used here the torsion term enters as db/dt = +d* phi
// (equal to -(ric_p - ric_p^T) via ric_p = ric0 - phi^2/4 - d*phi/2).
inline GBRhs grf_rhs_classical(const Backend& B, const GTForm& gamma, const RVec& p) {
  return [&B, gamma, p](Real, const GenMetric& G) {
    FieldSet F = FieldSet::constant(G, flow_phi(B, gamma, G.b));
    ClassicalCurvature C = classical_curvature(B, F, p);
    const RMat dg = -2.0 * C.ric0 + 0.5 * C.phi2;
    const RMat db = C.dstar_phi;
    return std::make_pair(dg, db);
  };
}

inline FlowTrajectory grf_flow(const Backend& B, const GTForm& gamma,
                               const GenMetric& G0, const RVec& p, Real t_end,
                               Real dt = 1e-3) {
  return integrate_gb(grf_rhs(B, gamma, p), G0, t_end, dt);
}

// Zero the same-chirality (Gb-diagonal) blocks of an operator.
inline RMat mixed_blocks_only(const RMat& L, const GenMetric& G) {
  const int n = G.n();
  const RMat F = G.orthonormal_frame();
  const RMat Fi = F.inverse();
  RMat Lf = Fi * L * F;
  Lf.topLeftCorner(n, n).setZero();
  Lf.bottomRightCorner(n, n).setZero();
  return RMat(F * Lf * Fi);
}

// Ricci operator of the slice connection (PhiB for the Ricci Lax flow,
// Bismut for the Bismut-Ricci Lax flow).
inline OperatorRule ricci_lax_rule(const Backend& B, const GTForm& gamma, const RVec& p,
                                   ConnKind kind = ConnKind::PhiB,
                                   bool mixed_only = false) {
  return [&B, gamma, p, kind, mixed_only](Real, const GenMetric& G) {
    FieldSet F = FieldSet::constant(G, flow_phi(B, gamma, G.b));
    GenConnection D(B, kind, F);
    RMat L = ricci_phib(D, p, CurvRoute::Blocks).ric;
    if (mixed_only) L = mixed_blocks_only(L, G);
    return L;
  };
}

inline FlowTrajectory ricci_lax_flow(const Backend& B, const GTForm& gamma,
                                     const GenMetric& G0, const RVec& p, Real t_end,
                                     Real dt = 1e-3, ConnKind kind = ConnKind::PhiB,
                                     bool mixed_only = false) {
  return integrate_operator(ricci_lax_rule(B, gamma, p, kind, mixed_only), G0, t_end,
                            dt);
}

inline FlowTrajectory bismut_ricci_lax(const Backend& B, const GTForm& gamma,
                                       const GenMetric& G0, const RVec& p, Real t_end,
                                       Real dt = 1e-3, bool mixed_only = false) {
  return ricci_lax_flow(B, gamma, G0, p, t_end, dt, ConnKind::Bismut, mixed_only);
}

// The (g, b) slice on the generalized-Ricci-flow trajectory at time t.
inline GenMetric grf_metric_at(const Backend& B, const GTForm& gamma,
                               const GenMetric& G0, const RVec& p, Real t,
                               Real dt = 1e-3) {
  if (t <= 0.0) return G0;
  return grf_flow(B, gamma, G0, p, t, dt).back().G;
}

// ---------------------------------------------------------------------------
// Ricci Lax solitons
// ---------------------------------------------------------------------------

// Commutator residual |[Ric - dT u - theta_{r,s}, Gb]|_inf for a constant
// section u and a conformal form with weights (r, s).
inline Real soliton_residual(const Backend& B, const GTForm& gamma, const GenMetric& G,
                             const RVec& p, const RVec& u, Real r, Real s) {
  FieldSet F = FieldSet::constant(G, flow_phi(B, gamma, G.b));
  GenConnection D(B, ConnKind::PhiB, F);
  RMat M = ricci_phib(D, p, CurvRoute::Blocks).ric;
  if (u.cwiseAbs().maxCoeff() > 0.0) {
    TFormField uform = TFormField::constant(GTForm::from_vector(u));
    M -= form_operator(dT(D, uform, p));
  }
  M -= conformal_form_operator(G, r, s);
  const RMat Gb = G.Gb();
  return (M * Gb - Gb * M).cwiseAbs().maxCoeff();
}

// Classical residuals of the gradient soliton system (s = 0):
//   eq1 = Rc - 1/4 phi^2 + Hess f - r g
//   eq2 = d* phi + iota_{grad f} phi
struct GradientSolitonResiduals {
  RMat eq1;
  RMat eq2;
};

inline GradientSolitonResiduals gradient_soliton_residual(
    const Backend& B, const GTForm& gamma, const GenMetric& G,
    const std::function<Real(const RVec&)>& f, Real r, const RVec& p) {
  const int n = B.n();
  FieldSet F = FieldSet::constant(G, flow_phi(B, gamma, G.b));
  ClassicalCurvature C = classical_curvature(B, F, p);
  FramePoint fp = frame_point(B, F, p);

  auto fc = [&f](const RVec& q) { return Cplx(f(q), 0.0); };
  RVec df(n);
  for (int i = 0; i < n; ++i) df(i) = B.d_scalar(fc, p, i).real();
  RMat hess(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      auto djf = [&B, &fc, j](const RVec& q) { return B.d_scalar(fc, q, j); };
      Real v = B.d_scalar(djf, p, i).real();
      for (int m = 0; m < n; ++m) v -= fp.gam[i](m, j) * df(m);
      hess(i, j) = v;
    }
  const RVec grad = fp.gi * df;

  GradientSolitonResiduals out;
  out.eq1 = C.ric0 - 0.25 * C.phi2 + 0.5 * (hess + hess.transpose()) - r * G.g;
  out.eq2 = C.dstar_phi + fp.phi.contract(grad).as_matrix().real();
  return out;
}

// Least-squares conformal weight: argmin_r |A - r g|_F.
inline Real soliton_fit_r(const RMat& A, const RMat& g) {
  return A.cwiseProduct(g).sum() / g.cwiseProduct(g).sum();
}

// ---------------------------------------------------------------------------
// Kahler-Ricci reduction of the Bismut-Ricci Lax flow
// ---------------------------------------------------------------------------

// On almost Hermitian data: rhs(X, Y) = 2 Rc(X, I Y) - 1/2 phi^2(X, I Y),
// compared against -2 rho with rho(X, Y) = Rc(I X, Y).
struct KahlerReduction {
  RMat rhs;
  RMat rho;
  Real residual = 0.0;
};

inline KahlerReduction kahler_ricci_reduction_check(const Backend& B, const FieldSet& F,
                                                    const RMat& I, const RVec& p) {
  ClassicalCurvature C = classical_curvature(B, F, p);
  KahlerReduction out;
  out.rhs = 2.0 * C.ric0 * I - 0.5 * C.phi2 * I;
  out.rho = I.transpose() * C.ric0;
  out.residual = (out.rhs + 2.0 * out.rho).cwiseAbs().maxCoeff();
  return out;
}

// ---------------------------------------------------------------------------
// Lax differential
// ---------------------------------------------------------------------------

// delta_L A = dA/dt - [L, A], with a fourth-order stencil for dA/dt.
inline RMat lax_differential(const std::function<RMat(Real)>& A, const RMat& L, Real t,
                             Real h = 1e-4) {
  const RMat dA =
      (-A(t + 2 * h) + 8.0 * A(t + h) - 8.0 * A(t - h) + A(t - 2 * h)) / (12.0 * h);
  const RMat At = A(t);
  return RMat(dA - (L * At - At * L));
}

}  // namespace gengeo
