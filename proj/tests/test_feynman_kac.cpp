#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "oulab/errors.hpp"
#include "oulab/feynman_kac.hpp"
#include "oulab/oracle.hpp"

using namespace oulab;
using testutil::kPi;
using testutil::problem;
using testutil::vec;

namespace {

Section real_section(const ProblemSpec& p, const std::string& src) {
  return Section{ComplexExpr{Expr::parse(src, p.vars()), Expr()}};
}

SdeConfig config(double dt, std::int64_t paths, std::uint64_t seed = 1) {
  SdeConfig c;
  c.dt = dt;
  c.n_paths = paths;
  c.seed = seed;
  return c;
}

ProblemSpec heat() {
  ProblemSpec p = make_scalar_problem("circle", "0", {"0"}, "0", "0");
  p.V.nonnegative = true;
  return p;
}

}  // namespace

TEST_SUITE("feynman_kac") {

TEST_CASE("constant section is reproduced exactly") {
  ProblemSpec p = heat();
  const auto e = estimate_semigroup(p, real_section(p, "3"), vec({0, 1}), 0.4, config(1e-2, 500));
  CHECK(e.value[0] == std::complex<double>(3.0, 0.0));
  CHECK(e.std_error[0] == 0.0);
  CHECK(e.surviving_fraction == 1.0);
}

TEST_CASE("t = 0 returns f") {
  ProblemSpec p = testutil::config("fk_circle");
  const AVec x = point_from_coords(*p.manifold, {0.9});
  const auto e = estimate_semigroup(p, p.f, x, 0.0, config(1e-3, 10));
  CHECK(e.value[0].real() == std::cos(0.9));
  CHECK(e.std_error[0] == 0.0);
}

TEST_CASE("heat semigroup on the circle") {
  ProblemSpec p = heat();
  const double th = 0.4, t = 0.5;
  const auto e = estimate_semigroup(p, real_section(p, "cos(theta)"), point_from_coords(*p.manifold, {th}), t,
                                    config(1e-3, 20000, 3));
  const double exact = std::exp(-t) * std::cos(th);
  CHECK(std::abs(e.value[0].real() - exact) <= std::max(3 * e.std_error[0], 0.02 * std::abs(exact)));
  CHECK(e.value[0].imag() == 0.0);
}

TEST_CASE("Ornstein-Uhlenbeck moments") {
  ProblemSpec p = testutil::config("ou_line");
  const auto e = estimate_semigroup(p, {real_section(p, "x"), real_section(p, "x^2")}, vec({1.0}), 1.0,
                                    config(1e-2, 50000, 4));
  const double m1 = std::exp(-1.0), m2 = std::exp(-2.0) + (1 - std::exp(-2.0));
  CHECK(std::abs(e[0].value[0].real() - m1) <= 3 * e[0].std_error[0]);
  CHECK(std::abs(e[1].value[0].real() - m2) <= 3 * e[1].std_error[0]);
}

TEST_CASE("positivity, sup bound and linearity") {
  ProblemSpec p = testutil::config("fk_circle");
  const AVec x = point_from_coords(*p.manifold, {2.0});
  const SdeConfig cfg = config(1e-2, 2000, 8);
  const auto e = estimate_semigroup(
      p, {real_section(p, "1+cos(theta)"), real_section(p, "cos(theta)"), real_section(p, "sin(2*theta)"),
          real_section(p, "2*cos(theta)-3*sin(2*theta)")},
      x, 0.5, cfg);
  CHECK(e[0].value[0].real() >= 0.0);
  CHECK(std::abs(e[1].value[0]) <= 1.0 * (1 + 10 * cfg.dt));
  const std::complex<double> lin = 2.0 * e[1].value[0] - 3.0 * e[2].value[0];
  CHECK(std::abs(e[3].value[0] - lin) <= 1e-12);
}

TEST_CASE("estimates do not depend on the worker count") {
  ProblemSpec p = testutil::config("fk_circle");
  const AVec x = point_from_coords(*p.manifold, {1.0});
  SdeConfig a = config(1e-2, 1000, 2);
  SdeConfig b = a;
  b.threads = 3;
  const auto ea = estimate_semigroup(p, p.f, x, 0.5, a);
  const auto eb = estimate_semigroup(p, p.f, x, 0.5, b);
  CHECK(ea.value[0] == eb.value[0]);
  CHECK(ea.std_error[0] == eb.std_error[0]);
}

TEST_CASE("grid of constant sections") {
  ProblemSpec p = heat();
  std::vector<AVec> grid;
  for (int i = 0; i < 8; ++i) grid.push_back(point_from_coords(*p.manifold, {2 * kPi * i / 8}));
  const auto est = estimate_field(p, {real_section(p, "1")}, grid, 0.3, config(1e-2, 100));
  REQUIRE(est.size() == 8);
  for (const auto& e : est) CHECK(e[0].value[0] == std::complex<double>(1.0, 0.0));
  std::ostringstream os;
  std::vector<SemigroupEstimate> flat;
  for (const auto& e : est) flat.push_back(e[0]);
  write_estimates_csv(os, *p.manifold, flat);
  const std::string csv = os.str();
  CHECK(csv.rfind("theta,re_0,im_0,stderr_0,n_paths,t\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
}

TEST_CASE("twisted bundle matches the shifted Fourier oracle") {
  ProblemSpec p = testutil::config("twisted_circle");
  const double t = 0.5;
  for (double th : {0.0, 1.3}) {
    const auto e = estimate_semigroup(p, p.f, point_from_coords(*p.manifold, {th}), t, config(1e-3, 20000, 11));
    const std::complex<double> oracle = twisted_heat_value(0.5, {{1, 1.0}}, t, th);
    CHECK(std::abs(oracle - std::exp(-2.25 * t) * std::polar(1.0, th)) <= 1e-14);
    CHECK(std::abs(e.value[0] - oracle) <= 0.03 * std::abs(oracle));
  }
}

TEST_CASE("mode and hypothesis errors") {
  ProblemSpec p = make_scalar_problem("circle", "0", {"0"}, "cos(theta)", "0");
  CHECK_THROWS_AS(estimate_semigroup(p, real_section(p, "1"), vec({1, 0}), 0.1, config(1e-2, 10)), ModeError);
  p.V.nonnegative = false;
  CHECK_THROWS_AS(estimate_semigroup(p, real_section(p, "1"), vec({1, 0}), 0.1, config(1e-2, 10)), ModeError);
  // (A3) with h = 0 fails: div X - X phi + beta1 = cos(theta)
  ProblemSpec q = make_scalar_problem("circle", "sin(theta)", {"-1"}, "1", "1");
  q.V.nonnegative = true;
  q.constants.c_eps = {{1e-10, 1.0}};
  CHECK_THROWS_AS(estimate_semigroup(q, real_section(q, "1"), vec({1, 0}), 0.1, config(1e-2, 10)), HypothesisError);
  EstimateOptions force;
  force.force = true;
  const auto e = estimate_semigroup(q, real_section(q, "1"), vec({1, 0}), 0.1, config(1e-2, 10), force);
  CHECK(e.forced);
  CHECK_THROWS_AS(estimate_semigroup(heat(), real_section(heat(), "1"), vec({1, 0.1}), 0.1, config(1e-2, 10)),
                  PointOffManifoldError);
  CHECK_THROWS_AS(estimate_semigroup(heat(), Section{}, vec({1, 0}), 0.1, config(1e-2, 10)), ModeError);
}

TEST_CASE("killed paths contribute zero") {
  ProblemSpec p = make_scalar_problem("euclidean:1", "-x^4", {}, "0", "0");
  p.V.nonnegative = true;
  EstimateOptions force;
  force.force = true;
  const auto e = estimate_semigroup(p, real_section(p, "1"), vec({2.0}), 1.0, config(1e-2, 64), force);
  CHECK(e.surviving_fraction == 0.0);
  CHECK(e.value[0] == 0.0);
}

}
