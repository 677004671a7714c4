// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "oulab/calculus.hpp"
#include "oulab/config.hpp"
#include "oulab/feynman_kac.hpp"
#include "oulab/oracle.hpp"

using namespace oulab;

namespace {

constexpr double kPi = 3.14159265358979323846;

ProblemSpec config(const std::string& name) {
  return load_problem(std::string(OULAB_CONFIG_DIR) + "/" + name + ".json").problem;
}

Section real_section(const ProblemSpec& p, const std::string& src) {
  return Section{ComplexExpr{Expr::parse(src, p.vars()), Expr()}};
}

SdeConfig sde(double dt, double t, std::int64_t paths, std::uint64_t seed, int threads = 1) {
  SdeConfig c;
  c.dt = dt;
  c.t_final = t;
  c.n_paths = paths;
  c.seed = seed;
  c.threads = threads;
  return c;
}

std::string csv(const Manifold& m, const std::vector<std::vector<SemigroupEstimate>>& est) {
  std::ostringstream os;
  std::vector<SemigroupEstimate> flat;
  for (const auto& row : est)
    for (const auto& e : row) flat.push_back(e);
  write_estimates_csv(os, m, flat);
  return os.str();
}

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o{false, ""};
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("criterion %2d %s: %s (%.1f s, budget %.0f s) %s\n", id, name, o.pass ? "PASS" : "FAIL", secs, budget_s,
              o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// shared between criteria 1/3 and 13
std::string heat_csv, fk_csv;

ProblemSpec heat_problem() {
  ProblemSpec p = make_scalar_problem("circle", "0", {"0"}, "0", "0");
  p.V.nonnegative = true;
  return p;
}

std::vector<AVec> circle_points(const Manifold& m, int n) {
  std::vector<AVec> pts;
  for (int i = 0; i < n; ++i) pts.push_back(point_from_coords(m, {2 * kPi * i / n}));
  return pts;
}

std::vector<std::vector<SemigroupEstimate>> heat_run(int threads) {
  const ProblemSpec p = heat_problem();
  return estimate_field(p, {real_section(p, "cos(theta)"), real_section(p, "cos(2*theta)")},
                        circle_points(*p.manifold, 8), 0.5, sde(1e-3, 0.5, 100000, 101, threads));
}

Outcome heat() {
  const ProblemSpec p = heat_problem();
  const auto est = heat_run(1);
  heat_csv = csv(*p.manifold, est);
  const auto pts = circle_points(*p.manifold, 8);
  double worst = 0.0;  // largest |err| / tolerance
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double th = 2 * kPi * i / 8;
    for (int k = 1; k <= 2; ++k) {
      const SemigroupEstimate& e = est[i][k - 1];
      const double exact = std::exp(-k * k * 0.5) * std::cos(k * th);
      const double tol = std::max(3 * e.std_error[0], 0.02 * std::abs(exact));
      worst = std::max(worst, std::abs(e.value[0] - exact) / tol);
    }
  }
  return {worst <= 1.0, fmt("worst err/tol = %.3f", worst)};
}

Outcome ou() {
  const ProblemSpec p = config("ou_line");
  AVec x0(1);
  x0[0] = 1.0;
  const auto e = estimate_semigroup(p, {real_section(p, "x"), real_section(p, "x^2")}, x0, 1.0,
                                    sde(1e-2, 1.0, 200000, 202));
  const double m1 = std::exp(-1.0), m2 = std::exp(-2.0) + (1 - std::exp(-2.0));
  const double z1 = std::abs(e[0].value[0].real() - m1) / e[0].std_error[0];
  const double z2 = std::abs(e[1].value[0].real() - m2) / e[1].std_error[0];
  return {z1 <= 3 && z2 <= 3, fmt("E[x] z = %.2f, E[x^2] z = %.2f", z1, z2)};
}

std::vector<std::vector<SemigroupEstimate>> fk_run(const ProblemSpec& p, const std::vector<AVec>& pts, int threads) {
  return estimate_field(p, {p.f}, pts, 0.5, sde(1e-3, 0.5, 200000, 303, threads));
}

std::vector<int> fk_nodes() {
  std::vector<int> n;
  for (int k = 0; k < 16; ++k) n.push_back(k * 16);
  return n;
}

Outcome full_fk() {
  const ProblemSpec p = config("fk_circle");
  const GridPtr g = make_grid(p.manifold, 256);
  const OperatorMatrix H = build_operator(p, g);
  const GridFunction exact = semigroup_apply(H, sample(g, p.f.front()), 0.5);
  std::vector<AVec> pts;
  for (int i : fk_nodes()) pts.push_back(g->points[i]);
  const auto est = fk_run(p, pts, 1);
  fk_csv = csv(*p.manifold, est);
  double worst = 0.0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const SemigroupEstimate& e = est[k].front();
    const std::complex<double> ex = exact.values[fk_nodes()[k]];
    const double tol = std::max(3 * e.std_error[0], 0.03 * std::abs(ex));
    worst = std::max(worst, std::abs(e.value[0] - ex) / tol);
  }
  return {worst <= 1.0, fmt("worst err/tol = %.3f", worst)};
}

Outcome twisted() {
  const ProblemSpec p = config("twisted_circle");
  const auto pts = circle_points(*p.manifold, 8);
  const auto est = estimate_field(p, {p.f}, pts, 0.5, sde(1e-3, 0.5, 50000, 404));
  double worst = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const std::complex<double> oracle = twisted_heat_value(0.5, {{1, 1.0}}, 0.5, 2 * kPi * i / 8);
    worst = std::max(worst, std::abs(est[i].front().value[0] - oracle) / std::abs(oracle));
  }
  return {worst <= 0.03, fmt("worst relative error = %.4f", worst)};
}

Outcome holonomy() {
  const ManifoldPtr m = make_manifold("sphere2");
  const double alpha = kPi / 3, expect = 2 * kPi * (1 - std::cos(alpha));
  std::vector<double> errs;
  // unit-time loop: K = 1/dt steps
  for (int K : {100, 200, 400}) {
    std::vector<AVec> path;
    for (int k = 0; k <= K; ++k) path.push_back(point_from_coords(*m, {alpha, 2 * kPi * k / K}));
    Eigen::MatrixXd e0(3, 2);
    m->frame_raw(path[0].data(), e0.data());
    const Eigen::MatrixXd r = e0.transpose() * transport_tangent_frame(*m, path, e0);
    const double ang = std::abs(std::atan2(r(1, 0), r(0, 0)));
    errs.push_back(std::min(std::abs(ang - expect), std::abs(ang - (2 * kPi - expect))));
  }
  const double o1 = std::log2(errs[0] / errs[1]), o2 = std::log2(errs[1] / errs[2]);
  return {std::min(o1, o2) >= 0.8, fmt("errors %.2e -> %.2e, min order %.3f", errs[0], errs[2], std::min(o1, o2))};
}

struct CoerciveSetup {
  ProblemSpec p;
  GridPtr g;
  Suite s;
};

CoerciveSetup coercive_setup(double pp) {
  CoerciveSetup c{config("coercive_circle"), nullptr, {}};
  c.p.constants.p = pp;
  c.g = make_grid(c.p.manifold, 64);
  c.s = random_trig_suite(c.g, 50, 1);
  return c;
}

Outcome coercive() {
  bool ok = true;
  std::string d;
  for (double pp : {2.0, 3.0}) {
    const CoerciveSetup c = coercive_setup(pp);
    const Thresholds t = compute_thresholds(c.p.constants);
    const InequalityReport r = check_inequality_family(Family::Coercive, c.p, c.g, c.s);
    const bool finite_star = r.lambda_star && std::isfinite(*r.lambda_star);
    ok = ok && r.lambda == t.lambda1 && r.worst_ratio <= t.c_coercive && finite_star;
    d += fmt("p=%g ratio %.4f <= C %.4f", pp, r.worst_ratio, t.c_coercive) +
         fmt(", lambda* %.4g; ", finite_star ? *r.lambda_star : NAN);
  }
  return {ok, d};
}

Outcome ueps() {
  bool ok = true;
  std::string d;
  for (double pp : {2.0, 3.0}) {
    const CoerciveSetup c = coercive_setup(pp);
    const Thresholds t = compute_thresholds(c.p.constants);
    const double bound = 8 * pp * pp / (pp - 1);
    for (double lam : {t.lambda0, t.lambda1, 4 * t.lambda1}) {
      FamilyOptions o;
      o.lambda = lam;
      o.sweep = false;
      const InequalityReport r = check_inequality_family(Family::Ueps, c.p, c.g, c.s, o);
      ok = ok && r.worst_ratio <= bound;
      d += fmt("p=%g lambda %.3g ratio %.4f; ", pp, lam, r.worst_ratio);
    }
  }
  return {ok, d};
}

Outcome grad_hess() {
  const CoerciveSetup c = coercive_setup(2.0);
  const InequalityReport a = check_inequality_family(Family::GradCoercive, c.p, c.g, c.s);
  const InequalityReport b = check_inequality_family(Family::HessCoercive, c.p, c.g, c.s);
  const bool ok = std::isfinite(a.empirical_constant) && std::isfinite(b.empirical_constant) && a.pass && b.pass;
  return {ok, fmt("C' = %.4f, C'' = %.4f", a.empirical_constant, b.empirical_constant)};
}

Outcome separation() {
  const ProblemSpec p = config("sep_circle");
  const GridPtr g = make_grid(p.manifold, 64);
  const Thresholds t = compute_thresholds(p.constants);
  const InequalityReport r = check_inequality_family(Family::Separation, p, g, random_trig_suite(g, 50, 1));
  const double bound = p.constants.zeta_ratio * t.c_coercive;
  return {r.pass && r.worst_ratio <= bound, fmt("ratio %.4f <= %.4f", r.worst_ratio, bound)};
}

Outcome ibp() {
  double worst = 0.0;
  for (const char* name : {"fk_circle", "torus"}) {
    const ProblemSpec p = config(name);
    const GridPtr g = make_grid(p.manifold, p.manifold->name() == "circle" ? 64 : 32);
    const Suite s = random_trig_suite(g, 41, 9, 6);
    for (int k = 0; k < 20; ++k) {
      GridFunction u = s.members[2 * k], w = s.members[2 * k + 1];
      w.values = w.values + std::complex<double>(0.0, 1.0) * s.members[2 * k + 2].values;
      const IbpResidual r = check_ibp(p, g, u, w);
      worst = std::max({worst, r.first, r.second});
    }
  }
  return {worst <= 1e-8, fmt("max residual %.2e", worst)};
}

Outcome calculus() {
  double worst = 0.0, margin = -INFINITY;
  bool ok = true;
  for (const char* name : {"circle", "torus2"}) {
    const ManifoldPtr m = make_manifold(name);
    for (RuleId rule : all_rules()) {
      const RuleResult r = verify_rule(rule, m, 100, 11, 64);
      ok = ok && r.pass && r.trials == 100;
      if (rule_is_inequality(rule)) margin = std::max(margin, r.max_residual);
      else worst = std::max(worst, r.max_residual);
    }
  }
  ok = ok && worst <= 1e-7 && margin <= kLapHessTolerance;
  return {ok, fmt("max residual %.2e, max lap-hess margin %.2e", worst, margin)};
}

Outcome cz() {
  ProblemSpec c = config("coercive_circle");
  const GridPtr gc = make_grid(c.manifold, 64);
  const InequalityReport rc = check_inequality_family(Family::Cz, c, gc, random_trig_suite(gc, 50, 1));
  const ProblemSpec t = config("torus");
  double k[2];
  int i = 0;
  for (int N : {64, 128}) {
    const GridPtr g = make_grid(t.manifold, N);
    k[i++] = check_inequality_family(Family::Cz, t, g, random_trig_suite(g, 50, 1, 8)).empirical_constant;
  }
  const bool ok = std::abs(rc.empirical_constant - 1.0) <= 1e-6 && std::isfinite(k[0]) && std::isfinite(k[1]) &&
                  std::abs(k[1] / k[0] - 1.0) <= 0.05;
  return {ok, fmt("S1 %.9f, T2 %.6f -> %.6f", rc.empirical_constant, k[0], k[1])};
}

Outcome determinism() {
  const ProblemSpec h = heat_problem();
  const std::string h4 = csv(*h.manifold, heat_run(4));
  const ProblemSpec p = config("fk_circle");
  const GridPtr g = make_grid(p.manifold, 256);
  std::vector<AVec> pts;
  for (int i : fk_nodes()) pts.push_back(g->points[i]);
  const std::string f3 = csv(*p.manifold, fk_run(p, pts, 3));
  const bool ok = !heat_csv.empty() && !fk_csv.empty() && h4 == heat_csv && f3 == fk_csv;
  return {ok, std::string("heat 1 vs 4 workers ") + (h4 == heat_csv ? "identical" : "differ") +
                  ", feynman-kac 1 vs 3 workers " + (f3 == fk_csv ? "identical" : "differ")};
}

}  // namespace

int main() {
  criterion(1, "heat semigroup on S1", 60, heat);
  criterion(2, "Ornstein-Uhlenbeck moments", 30, ou);
  criterion(3, "Feynman-Kac vs oracle", 300, full_fk);
  criterion(4, "twisted bundle", 120, twisted);
  criterion(5, "latitude holonomy", 10, holonomy);
  criterion(6, "coercive estimate", 30, coercive);
  criterion(7, "U_eps estimate", 30, ueps);
  criterion(8, "gradient/Hessian bounds", 30, grad_hess);
  criterion(9, "separation", 15, separation);
  criterion(10, "integration by parts", 10, ibp);
  criterion(11, "calculus battery", 60, calculus);
  criterion(12, "CZ probe", 60, cz);
  criterion(13, "determinism", 600, determinism);
  std::printf("%d of 13 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
