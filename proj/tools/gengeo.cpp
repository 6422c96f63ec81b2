// gengeo: scenario-driven front end.
//
//   gengeo verify|flow|cohomology|bundle --scenario FILE [--seed N] [--out DIR]
//          [--dt X] [--t-end X]
//
// Reads a JSON scenario (schema below), runs the selected task, and writes
// machine-readable outputs into --out (default "."): report.json always, and
// trajectory.csv (RFC 4180) for flow tasks.  Exit codes: 0 all checks pass,
// 2 schema/validation error, 3 numerical abort.  The environment variable
// GENGEO_TOL_SCALE multiplies every tolerance (default 1).
#include <CLI11.hpp>
#include <json.hpp>

#include <gengeo/bundles.hpp>
#include <gengeo/flows.hpp>
#include <gengeo/gck.hpp>
#include <gengeo/laplace_cohomology.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <set>

using namespace gengeo;
using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;
constexpr std::uint64_t kDefaultSeed = 0x47454F;

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Real tol_scale() {
  const char* s = std::getenv("GENGEO_TOL_SCALE");
  if (!s) return 1.0;
  const Real v = std::atof(s);
  if (!(v > 0.0)) throw SchemaError("GENGEO_TOL_SCALE must be a positive number");
  return v;
}

// ---------------------------------------------------------------------------
// Scenario parsing (unknown keys rejected)
// ---------------------------------------------------------------------------

void require_keys(const json& j, const std::set<std::string>& allowed,
                  const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw SchemaError(where + ": unknown key \"" + it.key() + "\"");
}

RMat parse_matrix(const json& j, int n, const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != n)
    throw SchemaError(where + ": expected a " + std::to_string(n) + "x" +
                      std::to_string(n) + " matrix");
  RMat m(n, n);
  for (int i = 0; i < n; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != n)
      throw SchemaError(where + ": row " + std::to_string(i) + " has wrong length");
    for (int k = 0; k < n; ++k) m(i, k) = j[i][k].get<Real>();
  }
  return m;
}

GTForm volume_form(int n, Real c) {
  GTForm p3(n, 3);
  std::vector<int> idx = {0, 1, 2};
  p3.set_coeff(idx, c);
  Real fact = 6.0;
  return GTForm(p3.antisymmetrized() * Cplx(fact));
}

GTForm parse_gamma(const json& j, int n) {
  if (j.is_null()) return GTForm(n, 3);
  require_keys(j, {"type", "c"}, "backend.gamma");
  const std::string type = j.value("type", "zero");
  if (type == "zero") return GTForm(n, 3);
  if (type == "volume") {
    if (n != 3) throw SchemaError("backend.gamma: volume type requires n = 3");
    return volume_form(n, j.value("c", 1.0));
  }
  throw SchemaError("backend.gamma: unknown type \"" + type + "\"");
}

// Owns whichever backend the scenario selects and exposes the common pieces.
struct BackendBox {
  std::string kind;
  int n = 0;
  std::unique_ptr<InvariantTorusBackend> torus;
  std::unique_ptr<SU2Backend> su2;
  std::unique_ptr<ChartBackend> chart;
  GTForm gamma;   // closed three-form (invariant backends)
  GenMetric G0 = GenMetric(RMat::Identity(1, 1), RMat::Zero(1, 1));
  Real kappa = 1.0;  // su2 only
  std::string chart_catalogue;

  const Backend& ref() const {
    if (torus) return *torus;
    if (su2) return *su2;
    return *chart;
  }
  bool invariant() const { return torus || su2; }
};

ChartBackend make_chart(const std::string& catalogue, int n, int quad) {
  if (catalogue == "flat-torus") {
    ChartBackend B(
        n,
        [n](const RVec&) { return GenMetric(RMat::Identity(n, n), RMat::Zero(n, n)); },
        [n](const RVec&) { return GTForm(n, 3); }, RVec::Zero(n), RVec::Ones(n), true);
    B.set_quad_points(quad);
    return B;
  }
  if (catalogue == "trig3") {
    if (n != 3) throw SchemaError("chart catalogue trig3 requires n = 3");
    ChartBackend B(
        3,
        [](const RVec& q) {
          RMat g = RMat::Identity(3, 3);
          g(0, 0) += 0.2 * std::sin(2 * M_PI * q(1));
          g(1, 1) += 0.1 * std::cos(2 * M_PI * q(2));
          RMat b = RMat::Zero(3, 3);
          b(0, 1) = 0.15 * std::cos(2 * M_PI * q(2));
          b(1, 0) = -b(0, 1);
          return GenMetric(g, b);
        },
        [](const RVec& q) {
          GTForm p3(3, 3);
          std::vector<int> idx = {0, 1, 2};
          p3.set_coeff(idx, 0.7 + 0.3 * std::sin(2 * M_PI * q(0)));
          return GTForm(p3.antisymmetrized() * Cplx(6.0));
        },
        RVec::Zero(3), RVec::Ones(3), true);
    B.set_quad_points(quad);
    return B;
  }
  if (catalogue == "round-s2") {
    if (n != 2) throw SchemaError("chart catalogue round-s2 requires n = 2");
    return ChartBackend(
        2,
        [](const RVec& q) {
          const Real w = 4.0 / std::pow(1.0 + q.squaredNorm(), 2);
          return GenMetric(RMat(w * RMat::Identity(2, 2)), RMat::Zero(2, 2));
        },
        [](const RVec&) { return GTForm(2, 3); }, RVec::Constant(2, -0.7),
        RVec::Constant(2, 0.7), false);
  }
  throw SchemaError("unknown chart catalogue \"" + catalogue + "\"");
}

BackendBox parse_backend(const json& j) {
  require_keys(j, {"kind", "n", "kappa", "g", "b", "gamma", "chart"}, "backend");
  BackendBox box;
  box.kind = j.value("kind", "");
  if (box.kind == "torus") {
    box.n = j.value("n", 3);
    RMat g = j.contains("g") ? parse_matrix(j["g"], box.n, "backend.g")
                             : RMat(RMat::Identity(box.n, box.n));
    RMat b = j.contains("b") ? parse_matrix(j["b"], box.n, "backend.b")
                             : RMat(RMat::Zero(box.n, box.n));
    if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw SchemaError("backend.g: metric must be symmetric");
    if ((b + b.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw SchemaError("backend.b: must be antisymmetric");
    Eigen::SelfAdjointEigenSolver<RMat> es(g);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw SchemaError("backend.g: metric must be positive definite");
    box.gamma = parse_gamma(j.contains("gamma") ? j["gamma"] : json(), box.n);
    box.G0 = GenMetric(g, b);
    box.torus = std::make_unique<InvariantTorusBackend>(box.G0, box.gamma);
    return box;
  }
  if (box.kind == "su2") {
    box.n = 3;
    const Real kappa = j.value("kappa", 1.0);
    box.kappa = kappa;
    auto S = SU2Backend::biinvariant(kappa);
    RVec p0(4);
    p0 << 1, 0, 0, 0;
    box.gamma = S.phi(p0);
    RMat g = j.contains("g") ? parse_matrix(j["g"], 3, "backend.g")
                             : RMat(2.0 * kappa * RMat::Identity(3, 3));
    RMat b = j.contains("b") ? parse_matrix(j["b"], 3, "backend.b")
                             : RMat(RMat::Zero(3, 3));
    box.G0 = GenMetric(g, b);
    box.su2 = std::make_unique<SU2Backend>(box.G0, box.gamma);
    return box;
  }
  if (box.kind == "chart") {
    const json& c = j.contains("chart") ? j["chart"] : json::object();
    require_keys(c, {"catalogue", "n", "quad"}, "backend.chart");
    box.n = c.value("n", 3);
    const int quad = c.value("quad", 4);
    box.chart_catalogue = c.value("catalogue", "flat-torus");
    box.chart =
        std::make_unique<ChartBackend>(make_chart(box.chart_catalogue, box.n, quad));
    box.G0 = box.chart->metric(RVec::Zero(box.n));
    box.gamma = GTForm(box.n, 3);
    return box;
  }
  throw SchemaError("backend.kind must be torus, su2, or chart");
}

// ---------------------------------------------------------------------------
// Report plumbing
// ---------------------------------------------------------------------------

struct Report {
  json checks = json::array();
  bool all_pass = true;

  void add(const std::string& name, Real residual, Real tol) {
    const bool ok = std::isfinite(residual) && residual <= tol;
    checks.push_back({{"name", name},
                      {"residual", residual},
                      {"tolerance", tol},
                      {"pass", ok}});
    all_pass = all_pass && ok;
  }
  void add_exact(const std::string& name, bool ok, const json& detail) {
    checks.push_back({{"name", name}, {"detail", detail}, {"pass", ok}});
    all_pass = all_pass && ok;
  }
};

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json base_report(const json& scenario, const std::string& task, std::uint64_t seed) {
  return {{"schema_version", kSchemaVersion},
          {"scenario_name", scenario.value("name", "")},
          {"task", task},
          {"seed", seed},
          {"tol_scale", tol_scale()}};
}

// ---------------------------------------------------------------------------
// Random draws (seeded; recorded in the report)
// ---------------------------------------------------------------------------

RVec random_vec(std::mt19937_64& rng, int n) {
  std::normal_distribution<Real> g(0.0, 1.0);
  RVec v(n);
  for (int i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

GTForm random_form(std::mt19937_64& rng, int d, int k) {
  GTForm th(d, k);
  if (k == 0) return GTForm::scalar(d, Cplx(random_vec(rng, 1)(0)));
  std::vector<int> idx(k);
  for (int t = 0; t < 3 * d; ++t) {
    for (int a = 0; a < k; ++a) idx[a] = std::uniform_int_distribution<int>(0, d - 1)(rng);
    th.set_coeff(idx, Cplx(random_vec(rng, 1)(0)));
  }
  Real fact = 1.0;
  for (int a = 2; a <= k; ++a) fact *= a;
  return GTForm(th.antisymmetrized() * Cplx(fact));
}

Section combine(const Section& a, const Section& b) {
  Section s;
  s.val = [a, b](const RVec& p) { return CVec(a.val(p) + b.val(p)); };
  if (a.dval && b.dval)
    s.dval = [a, b](const RVec& p, int i) { return CVec(a.dval(p, i) + b.dval(p, i)); };
  s.invariant = a.invariant && b.invariant;
  return s;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

int run_verify(const json& scenario, std::uint64_t seed,
               const std::filesystem::path& outdir) {
  const json& vj = scenario.contains("verify") ? scenario["verify"] : json::object();
  require_keys(vj, {"draws"}, "verify");
  const int draws = vj.value("draws", 100);
  BackendBox box = parse_backend(scenario.at("backend"));
  const Backend& B = box.ref();
  const int n = box.n;
  const Real ts = tol_scale();
  const Real tol = (box.invariant() ? 1e-10 : 5e-5) * ts;
  const Real wtol = (box.invariant() ? 1e-9 : 5e-5) * ts;
  std::mt19937_64 rng(seed);

  Report rep;
  FieldSet F = FieldSet::of_backend(B);
  GenConnection Da(B, ConnKind::PhiB, F);
  GenConnection Db(B, ConnKind::PhiBStandard, F);

  // Pointwise generalized-metric invariants.
  {
    Real inv = 0.0, sa = 0.0;
    for (int t = 0; t < 10; ++t) {
      const RVec p = B.sample_point(rng);
      const GenMetric G = F.metric(p);
      const RMat Gb = G.Gb();
      inv = std::max(inv, (Gb * Gb - RMat::Identity(2 * n, 2 * n)).cwiseAbs().maxCoeff());
      const RMat sig = Gb.transpose() * pairing(n);
      sa = std::max(sa, (sig - sig.transpose()).cwiseAbs().maxCoeff());
    }
    rep.add("gb-involution", inv, tol);
    rep.add("pairing-self-adjoint", sa, tol);
  }

  // Dual-route connection agreement over random draws.
  {
    Real worst = 0.0;
    for (int t = 0; t < draws; ++t) {
      const RVec p = B.sample_point(rng);
      const Section x = Section::constant(CVec(random_vec(rng, 2 * n).cast<Cplx>()));
      const Section y = Section::constant(CVec(random_vec(rng, 2 * n).cast<Cplx>()));
      worst = std::max(worst, (Da.apply(x, y, p) - Db.apply(x, y, p)).norm());
    }
    rep.add("dual-route-connection", worst, tol);
  }

  // Curvature tensor: block assembly vs commutator route.
  {
    const RVec p = B.sample_point(rng);
    const CurvatureTensor Tb = riemann_tensor(Da, p, CurvRoute::Blocks);
    const CurvatureTensor Tc = riemann_tensor(Da, p, CurvRoute::Commutator);
    Real worst = 0.0;
    for (size_t i = 0; i < Tb.t.size(); ++i)
      worst = std::max(worst, std::abs(Tb.t[i] - Tc.t[i]));
    rep.add("curvature-route-agreement", worst, wtol);
  }

  // Jacobiator: brute force vs closed form.
  {
    Real worst = 0.0;
    const RVec p = B.sample_point(rng);
    for (int t = 0; t < (box.invariant() ? std::min(draws, 20) : 5); ++t) {
      const Section x = Section::constant(CVec(random_vec(rng, 2 * n).cast<Cplx>()));
      const Section y = Section::constant(CVec(random_vec(rng, 2 * n).cast<Cplx>()));
      const Section z = Section::constant(CVec(random_vec(rng, 2 * n).cast<Cplx>()));
      worst = std::max(
          worst, (jacobiator_brute(Da, x, y, z, p) - jacobiator_closed(Da, x, y, z, p))
                     .norm());
    }
    rep.add("jacobiator-closed-form", worst, wtol);
  }

  // Bianchi identities and the Bismut double switch.
  {
    const RVec p = B.sample_point(rng);
    const BianchiResiduals br = bianchi_residuals(B, F, p);
    rep.add("bianchi-algebraic", br.algebraic, wtol);
    rep.add("bianchi-differential", br.differential, wtol);
    rep.add("bismut-double-switch", double_switch(B, F, p), wtol);
  }

  // Weitzenboeck identity per degree over random forms.  Degrees are capped
  // at three: higher-degree forms cost (2n)^k per tensor and add no coverage
  // beyond Hodge duality.
  for (int k = 0; k <= std::min(3, 2 * n); ++k) {
    Real worst = 0.0;
    const RVec p = B.sample_point(rng);
    const int reps = box.invariant() ? std::max(20, draws / 5) : 2;
    for (int t = 0; t < reps; ++t) {
      const TFormField th = TFormField::constant(random_form(rng, 2 * n, k));
      worst = std::max(worst, weitzenbock_residual(Da, th, p));
    }
    rep.add("weitzenbock-degree-" + std::to_string(k), worst, wtol);
  }

  // su(2)-specific structure.
  if (box.su2) {
    const SU2Backend& S = *box.su2;
    // The invariant bracket table and the Einstein property are statements
    // about the bi-invariant calibration g = 2 kappa Id, b = 0.
    const bool calibrated =
        (box.G0.g - 2.0 * box.kappa * RMat::Identity(3, 3)).cwiseAbs().maxCoeff() ==
            0.0 &&
        box.G0.b.cwiseAbs().maxCoeff() == 0.0;
    Real worst = 0.0;
    for (int t = 0; t < (calibrated ? 5 : 0); ++t) {
      const RVec p = S.sample_point(rng);
      const RVec u = random_vec(rng, 3), v = random_vec(rng, 3);
      RVec uv(3);
      uv << u(1) * v(2) - u(2) * v(1), u(2) * v(0) - u(0) * v(2),
          u(0) * v(1) - u(1) * v(0);
      const Section xp_u = combine(S.right_invariant_field(u), S.right_invariant_covector(u));
      const Section xp_v = combine(S.right_invariant_field(v), S.right_invariant_covector(v));
      const Section xp_uv =
          combine(S.right_invariant_field(uv), S.right_invariant_covector(uv));
      worst = std::max(worst, (Da.apply(xp_u, xp_v, p) + 0.5 * xp_uv.val(p)).norm());
    }
    if (calibrated) rep.add("su2-bracket-table", worst, tol);

    const RVec p = S.sample_point(rng);
    // Einstein property at the bi-invariant calibration: rc = 1/(4 kappa) Id
    // in the orthonormal frame (1/4 G at kappa = 1).
    if (calibrated) {
      const RicciOperator R = ricci_phib(Da, p);
      rep.add("su2-einstein-quarter-g",
              (R.rc - 0.25 / box.kappa * RMat::Identity(6, 6)).cwiseAbs().maxCoeff(),
              tol);
    }
    const ClassicalCurvature C = classical_curvature(B, F, p);
    auto max_abs = [](const std::vector<Real>& v) {
      Real m = 0.0;
      for (Real x : v) m = std::max(m, std::abs(x));
      return m;
    };
    rep.add("su2-flat-plus-connection", max_abs(C.rp), tol);
    rep.add("su2-flat-minus-connection", max_abs(C.rm), tol);
  }

  json out = base_report(scenario, "verify", seed);
  out["draws"] = draws;
  out["checks"] = rep.checks;
  out["status"] = rep.all_pass ? "ok" : "failed";
  write_json(outdir / "report.json", out);
  return rep.all_pass ? 0 : 3;
}

// ---------------------------------------------------------------------------
// flow
// ---------------------------------------------------------------------------

std::string csv_num(Real v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int run_flow(const json& scenario, std::uint64_t seed,
             const std::filesystem::path& outdir, Real dt_override,
             Real tend_override) {
  const json& fj = scenario.contains("flow") ? scenario["flow"] : json::object();
  require_keys(fj, {"name", "t_end", "dt", "dual_route", "u"}, "flow");
  BackendBox box = parse_backend(scenario.at("backend"));
  if (!box.invariant())
    throw SchemaError("flow: requires an invariant backend (torus or su2)");
  const Backend& B = box.ref();
  const int n = box.n;
  const Real ts = tol_scale();
  const std::string name = fj.value("name", "ricci-lax");
  const Real t_end = tend_override > 0 ? tend_override : fj.value("t_end", 1.0);
  const Real dt = dt_override > 0 ? dt_override : fj.value("dt", 1e-3);
  const bool dual = fj.value("dual_route", false);
  const RVec p = box.su2 ? [] {
    RVec q(4);
    q << 1, 0, 0, 0;
    return q;
  }()
                         : RVec(RVec::Zero(n));

  FlowTrajectory traj, alt;
  bool have_alt = false;
  if (name == "ricci-lax") {
    traj = ricci_lax_flow(B, box.gamma, box.G0, p, t_end, dt);
    if (dual) {
      alt = grf_flow(B, box.gamma, box.G0, p, t_end, dt);
      have_alt = true;
    }
  } else if (name == "grf") {
    traj = grf_flow(B, box.gamma, box.G0, p, t_end, dt);
  } else if (name == "gen-diffeo") {
    if (!fj.contains("u") || fj["u"].size() != static_cast<size_t>(2 * n))
      throw SchemaError("flow.u: gen-diffeo needs a length-2n section");
    RVec u(2 * n);
    for (int i = 0; i < 2 * n; ++i) u(i) = fj["u"][i].get<Real>();
    traj = gen_diffeo_flow(B, box.gamma, u, box.G0, t_end, dt);
  } else {
    throw SchemaError("flow.name must be ricci-lax, grf, or gen-diffeo");
  }

  // trajectory.csv: t, vech(g), vech_strict(b), diagnostics.
  std::ofstream csv(outdir / "trajectory.csv", std::ios::binary);
  if (!csv) throw std::runtime_error("cannot write trajectory.csv");
  csv << "t";
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) csv << ",g" << i << j;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) csv << ",b" << i << j;
  csv << ",gb_sq_drift,min_eig_g";
  if (have_alt) csv << ",equivalence_gap";
  csv << "\r\n";
  Real max_gap = 0.0;
  for (size_t k = 0; k < traj.states.size(); ++k) {
    const FlowState& st = traj.states[k];
    csv << csv_num(st.t);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) csv << "," << csv_num(st.G.g(i, j));
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) csv << "," << csv_num(st.G.b(i, j));
    const RMat Gb = st.G.Gb();
    csv << "," << csv_num((Gb * Gb - RMat::Identity(2 * n, 2 * n)).cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<RMat> es(st.G.g);
    csv << "," << csv_num(es.eigenvalues().minCoeff());
    if (have_alt) {
      Real gap = std::numeric_limits<Real>::quiet_NaN();
      if (k < alt.states.size())
        gap = std::max((st.G.g - alt.states[k].G.g).cwiseAbs().maxCoeff(),
                       (st.G.b - alt.states[k].G.b).cwiseAbs().maxCoeff());
      max_gap = std::max(max_gap, gap);
      csv << "," << csv_num(gap);
    }
    csv << "\r\n";
  }
  csv.close();

  Report rep;
  const char* status = traj.status == FlowStatus::Ok ? "ok" : "aborted";
  rep.add("gb-involution-drift", traj.max_gb_residual, 1e-9 * ts);
  if (have_alt) rep.add("equivalence-gap", max_gap, 1e-7 * ts);
  if (name == "gen-diffeo" || name == "grf" || name == "ricci-lax") {
    // gamma = 0 torus scenarios are stationary.
    if (box.torus && box.gamma.norm_inf() == 0.0 && name != "gen-diffeo")
      rep.add("stationary-increments",
              std::max((traj.back().G.g - box.G0.g).cwiseAbs().maxCoeff(),
                       (traj.back().G.b - box.G0.b).cwiseAbs().maxCoeff()),
              1e-12 * ts);
  }
  // Closed form on the isotropic T^3 volume scenario: a(t)^3 = a0^3 + 3c^2 t.
  json fit = json();
  if (box.torus && name != "gen-diffeo" && box.gamma.norm_inf() > 0.0 &&
      (box.G0.g - box.G0.g(0, 0) * RMat::Identity(n, n)).cwiseAbs().maxCoeff() ==
          0.0 &&
      box.G0.b.cwiseAbs().maxCoeff() == 0.0 && n == 3) {
    // Least-squares slope of a(t)^3 against t.
    Real sx = 0, sy = 0, sxx = 0, sxy = 0;
    const Real m = static_cast<Real>(traj.states.size());
    for (const FlowState& st : traj.states) {
      const Real a3 = std::pow(st.G.g(0, 0), 3);
      sx += st.t;
      sy += a3;
      sxx += st.t * st.t;
      sxy += st.t * a3;
    }
    const Real slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    std::vector<int> idx = {0, 1, 2};
    const Real c = box.gamma.coeff(idx).real();
    fit = {{"a3_slope", slope}, {"expected", 3.0 * c * c}};
    rep.add("a3-linear-slope", std::abs(slope - 3.0 * c * c), 1e-4 * ts);
  }

  json out = base_report(scenario, "flow", seed);
  out["flow"] = name;
  out["dt"] = dt;
  out["t_end"] = t_end;
  out["status"] = status;
  out["steps"] = traj.states.size() - 1;
  out["final_t"] = traj.back().t;
  json gfin = json::array(), bfin = json::array();
  for (int i = 0; i < n; ++i) {
    json rg = json::array(), rb = json::array();
    for (int j = 0; j < n; ++j) {
      rg.push_back(traj.back().G.g(i, j));
      rb.push_back(traj.back().G.b(i, j));
    }
    gfin.push_back(rg);
    bfin.push_back(rb);
  }
  out["final_g"] = gfin;
  out["final_b"] = bfin;
  if (!fit.is_null()) out["a3_fit"] = fit;
  out["checks"] = rep.checks;
  write_json(outdir / "report.json", out);
  if (traj.status != FlowStatus::Ok) return 3;
  return rep.all_pass ? 0 : 3;
}

// ---------------------------------------------------------------------------
// cohomology
// ---------------------------------------------------------------------------

int run_cohomology(const json& scenario, std::uint64_t seed,
                   const std::filesystem::path& outdir) {
  if (scenario.contains("cohomology"))
    require_keys(scenario["cohomology"], {}, "cohomology");
  BackendBox box = parse_backend(scenario.at("backend"));
  if (!box.invariant())
    throw SchemaError("cohomology: requires an invariant backend");
  const Backend& B = box.ref();
  FieldSet F = FieldSet::of_backend(B);
  GenConnection D(B, ConnKind::PhiB, F);
  const RVec p = box.su2 ? [] {
    RVec q(4);
    q << 1, 0, 0, 0;
    return q;
  }()
                         : RVec(RVec::Zero(box.n));

  const InvariantComplex C = invariant_complex(D, p);
  const ReducedCohomology R = reduced_cohomology(C);

  Report rep;
  rep.add("chain-residual", R.chain_residual, 1e-9 * tol_scale());

  json out = base_report(scenario, "cohomology", seed);
  out["dims"] = R.dims;
  out["status"] = rep.all_pass ? "ok" : "failed";
  out["checks"] = rep.checks;
  write_json(outdir / "report.json", out);
  return rep.all_pass ? 0 : 3;
}

// ---------------------------------------------------------------------------
// bundle
// ---------------------------------------------------------------------------

RMat std_i(int n) {
  RMat J0 = RMat::Zero(n, n);
  for (int k = 0; k + 1 < n; k += 2) {
    J0(k, k + 1) = -1.0;
    J0(k + 1, k) = 1.0;
  }
  return J0;
}

CVec alpha_twist(int n, int plane, Real mu, const RVec& q) {
  CVec a = CVec::Zero(n);
  const Cplx i(0.0, 1.0);
  const Cplx z(q(2 * plane), q(2 * plane + 1));
  a(2 * plane) += mu * z;
  a(2 * plane + 1) += -i * mu * z;
  return a;
}

int run_bundle(const json& scenario, std::uint64_t seed,
               const std::filesystem::path& outdir) {
  const json& bj = scenario.contains("bundle") ? scenario["bundle"] : json::object();
  require_keys(bj, {"fixture", "k"}, "bundle");
  const std::string fixture = bj.value("fixture", "t4-constant");
  const Real ts = tol_scale();
  std::mt19937_64 rng(seed);
  Report rep;
  json out = base_report(scenario, "bundle", seed);

  if (fixture == "t4-constant") {
    std::vector<Real> kv = {2.0, -1.0};
    if (bj.contains("k")) {
      if (!bj["k"].is_array() || bj["k"].size() != 2)
        throw SchemaError("bundle.k: t4-constant needs two twist integers");
      kv = {bj["k"][0].get<Real>(), bj["k"][1].get<Real>()};
    }
    ChartBackend B(
        4, [](const RVec&) { return GenMetric(RMat::Identity(4, 4), RMat::Zero(4, 4)); },
        [](const RVec&) { return GTForm(4, 3); }, RVec::Zero(4), RVec::Ones(4), true);
    B.set_quad_points(4);
    const FieldSet F = FieldSet::of_backend(B);
    const GenConnection D(B, ConnKind::PhiB, F);
    const RMat I = std_i(4);
    const BiHermitian H = BiHermitian::constant(I, I);
    const RVec p = B.sample_point(rng);
    auto alpha = [kv](const RVec& q) {
      return CVec(alpha_twist(4, 0, 0.5 * M_PI * kv[0], q) +
                  alpha_twist(4, 1, 0.5 * M_PI * kv[1], q));
    };
    const HoloLineBundle V = HoloLineBundle::make(B, F, H, alpha, alpha);

    rep.add("dbar-flat", jholo_residual(V, D, p), 1e-8 * ts);
    rep.add("chern-type-1-1", chern_type_residual(V, D, p), 1e-8 * ts);
    const Real c = 2.0 * M_PI * (kv[0] + kv[1]);
    rep.add("hermitian-einstein", he_residual(V, D, c, p), 1e-8 * ts);
    rep.add("hitchin-form", hitchin_form_residual(V, c, p), 1e-8 * ts);
    const Real dG = degree(V, D);
    const auto [dp, dm] = classical_degrees(V);
    rep.add("degree-halving", std::abs(dG - 0.5 * (dp + dm)), 1e-8 * ts);
    rep.add("degree-value", std::abs(dG - (kv[0] + kv[1])), 1e-8 * ts);
    auto scale_f = [](const RVec& q) {
      return 0.3 * std::sin(2.0 * M_PI * q(0)) +
             0.2 * std::cos(2.0 * M_PI * (q(2) + q(3)));
    };
    const HoloLineBundle Vf = HoloLineBundle::make(B, F, H, alpha, alpha, scale_f);
    rep.add("degree-metric-invariance", std::abs(degree(Vf, D) - dG), 1e-7 * ts);
    auto f1 = [](const RVec& q) { return Cplx(std::sin(2.0 * M_PI * q(0))); };
    auto f2 = [](const RVec& q) {
      return Cplx(std::cos(2.0 * M_PI * (q(1) + q(3))));
    };
    rep.add("gauduchon", gauduchon_residual(D, H, {f1, f2}), 1e-8 * ts);
    out["degree"] = dG;
    out["he_constant"] = he_constant(V, D);
  } else if (fixture == "t2-twist") {
    Real k = 3.0;
    if (bj.contains("k")) {
      if (bj["k"].is_array() && bj["k"].size() == 1)
        k = bj["k"][0].get<Real>();
      else if (bj["k"].is_number())
        k = bj["k"].get<Real>();
      else
        throw SchemaError("bundle.k: t2-twist needs one twist integer");
    }
    ChartBackend B(
        2, [](const RVec&) { return GenMetric(RMat::Identity(2, 2), RMat::Zero(2, 2)); },
        [](const RVec&) { return GTForm(2, 3); }, RVec::Zero(2), RVec::Ones(2), true);
    B.set_quad_points(8);
    const FieldSet F = FieldSet::of_backend(B);
    const GenConnection D(B, ConnKind::PhiB, F);
    const BiHermitian H = BiHermitian::constant(std_i(2), std_i(2));
    auto a2 = [k](const RVec& q) { return alpha_twist(2, 0, 0.5 * M_PI * k, q); };
    const HoloLineBundle V = HoloLineBundle::make(B, F, H, a2, a2);
    const Real dG = degree(V, D);
    rep.add("chern-number-integrality", std::abs(dG - std::round(dG)), 1e-8 * ts);
    rep.add("chern-number-value", std::abs(dG - k), 1e-8 * ts);
    out["chern_number"] = dG;
  } else {
    throw SchemaError("bundle.fixture must be t4-constant or t2-twist");
  }

  out["status"] = rep.all_pass ? "ok" : "failed";
  out["checks"] = rep.checks;
  write_json(outdir / "report.json", out);
  return rep.all_pass ? 0 : 3;
}

json load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open scenario file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("scenario parse error: ") + e.what());
  }
  require_keys(j,
               {"schema", "name", "backend", "task", "flow", "verify", "cohomology",
                "bundle"},
               "scenario");
  if (j.value("schema", 1) != kSchemaVersion)
    throw SchemaError("unsupported scenario schema version");
  if (!j.contains("backend")) throw SchemaError("scenario: missing backend");
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gengeo: generalized-geometry suites, flows, and reports"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir = ".";
  std::uint64_t seed = kDefaultSeed;
  Real dt = -1.0, t_end = -1.0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", scenario_path, "scenario JSON file")->required();
    sub->add_option("--seed", seed, "seed for randomized draws");
    sub->add_option("--out", out_dir, "output directory");
  };
  CLI::App* verify = app.add_subcommand("verify", "run identity suites");
  CLI::App* flow = app.add_subcommand("flow", "integrate a flow");
  CLI::App* cohomology = app.add_subcommand("cohomology", "reduced cohomology dims");
  CLI::App* bundle = app.add_subcommand("bundle", "line bundle suite");
  add_common(verify);
  add_common(flow);
  add_common(cohomology);
  add_common(bundle);
  flow->add_option("--dt", dt, "time step override");
  flow->add_option("--t-end", t_end, "final time override");

  CLI11_PARSE(app, argc, argv);

  try {
    const json scenario = load_scenario(scenario_path);
    std::filesystem::path outdir(out_dir);
    std::filesystem::create_directories(outdir);
    int rc = 0;
    if (app.got_subcommand(verify))
      rc = run_verify(scenario, seed, outdir);
    else if (app.got_subcommand(flow))
      rc = run_flow(scenario, seed, outdir, dt, t_end);
    else if (app.got_subcommand(cohomology))
      rc = run_cohomology(scenario, seed, outdir);
    else
      rc = run_bundle(scenario, seed, outdir);
    return rc;
  } catch (const SchemaError& e) {
    std::fprintf(stderr, "schema error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return 3;
  }
}
