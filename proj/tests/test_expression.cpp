#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "oulab/errors.hpp"
#include "oulab/expression.hpp"
#include "oulab/rng.hpp"

using namespace oulab;
using testutil::kPi;

namespace {

VarInputs at(const VarSpace& vs, std::vector<double> q) { return VarInputs::from_values(vs, q.data()); }

const VarSpace& circle_vars() {
  static const VarSpace vs = VarSpace::angles({"theta"});
  return vs;
}

struct Case {
  VarSpace vs;
  std::string src;
};

std::vector<Case> corpus() {
  const VarSpace th = VarSpace::angles({"theta1", "theta2"});
  const VarSpace xy = VarSpace::plain({"x", "y", "z"});
  return {
      {circle_vars(), "2+cos(theta)"},
      {circle_vars(), "sin(theta)^2"},
      {circle_vars(), "exp(sin(3*theta - 0.5))*cos(theta)"},
      {circle_vars(), "-(cos(2*theta)^3) + 1.5e-1*sin(theta+1)"},
      {th, "cos(theta1)*sin(2*theta2) + 0.5*sin(theta2)^2"},
      {th, "exp(cos(theta1 - theta2))*0.5"},
      {xy, "x^2 + y*z - 3*x*y*z + exp(-x^2)"},
      {xy, "sin(x)*cos(y) - 0.125*z^4"},
  };
}

}  // namespace

TEST_SUITE("expression") {

TEST_CASE("literal examples") {
  const Expr z = Expr::parse("0", circle_vars());
  CHECK(z.is_zero());
  const Jet2 j = z.eval2(at(circle_vars(), {1.3}));
  CHECK(j.v == 0.0);
  CHECK(j.d[0] == 0.0);
  CHECK(j.hess(0, 0) == 0.0);

  const Jet1 a = Expr::parse("2+cos(theta)", circle_vars()).eval1(at(circle_vars(), {0.0}));
  CHECK(a.v == 3.0);
  CHECK(a.d[0] == 0.0);

  const Expr s = Expr::parse("sin(theta)^2", circle_vars());
  const Jet1 b = s.eval1(at(circle_vars(), {kPi / 4}));
  CHECK(b.v == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(b.d[0] == doctest::Approx(1.0).epsilon(1e-15));
  const double hstep = 1e-5;
  const double fd = (s.eval(at(circle_vars(), {kPi / 4 + hstep})) - s.eval(at(circle_vars(), {kPi / 4 - hstep}))) / (2 * hstep);
  CHECK(fd == doctest::Approx(b.d[0]).epsilon(1e-9));
}

TEST_CASE("parse errors") {
  const VarSpace& vs = circle_vars();
  CHECK_THROWS_AS(Expr::parse("", vs), ParseError);
  CHECK_THROWS_AS(Expr::parse("cos(theta", vs), ParseError);
  CHECK_THROWS_AS(Expr::parse("2 + * 3", vs), ParseError);
  CHECK_THROWS_AS(Expr::parse("tan(theta)", vs), ParseError);
  CHECK_THROWS_AS(Expr::parse("cos(phi)", vs), UnknownVariableError);
  CHECK_THROWS_AS(Expr::parse("theta^-1", vs), ParseError);
  CHECK_THROWS_AS(Expr::parse("theta", vs), NonPeriodicError);
  try {
    Expr::parse("1 + cos(q)", vs);
    FAIL("no throw");
  } catch (const UnknownVariableError& e) {
    CHECK(e.offset() == 8);
  }
}

TEST_CASE("round trip through to_string") {
  CounterRng rng(11);
  for (const Case& c : corpus()) {
    CAPTURE(c.src);
    const Expr e = Expr::parse(c.src, c.vs);
    const Expr r = Expr::parse(e.to_string(), c.vs);
    for (int i = 0; i < 100; ++i) {
      std::vector<double> q(c.vs.count);
      for (double& v : q) v = rng.uniform(-3.0, 3.0);
      const VarInputs in = at(c.vs, q);
      CHECK(std::abs(e.eval(in) - r.eval(in)) <= 1e-12);
    }
  }
}

TEST_CASE("dual numbers match central differences") {
  CounterRng rng(12);
  for (const Case& c : corpus()) {
    CAPTURE(c.src);
    const Expr e = Expr::parse(c.src, c.vs);
    for (int i = 0; i < 100; ++i) {
      std::vector<double> q(c.vs.count);
      for (double& v : q) v = rng.uniform(-2.0, 2.0);
      const Jet2 j = e.eval2(at(c.vs, q));
      const Jet1 j1 = e.eval1(at(c.vs, q));
      CHECK(j.v == doctest::Approx(e.eval(at(c.vs, q))).epsilon(1e-14));
      for (int a = 0; a < c.vs.count; ++a) {
        CHECK(j1.d[a] == doctest::Approx(j.d[a]).epsilon(1e-14));
        const double h = 1e-5;
        auto qp = q, qm = q;
        qp[a] += h;
        qm[a] -= h;
        const double fd = (e.eval(at(c.vs, qp)) - e.eval(at(c.vs, qm))) / (2 * h);
        CHECK(std::abs(fd - j.d[a]) <= 1e-6 * std::max(1.0, std::abs(j.d[a])));
        const Jet1 dp = e.eval1(at(c.vs, qp)), dm = e.eval1(at(c.vs, qm));
        for (int b = 0; b < c.vs.count; ++b) {
          const double fh = (dp.d[b] - dm.d[b]) / (2 * h);
          CHECK(std::abs(fh - j.hess(a, b)) <= 1e-6 * std::max(1.0, std::abs(j.hess(a, b))));
        }
      }
    }
  }
}

TEST_CASE("batch evaluation matches pointwise evaluation") {
  CounterRng rng(13);
  for (const Case& c : corpus()) {
    CAPTURE(c.src);
    const Expr e = Expr::parse(c.src, c.vs);
    const int n = 21;
    BatchInputs bi;
    bi.resize(n);
    std::vector<VarInputs> ins;
    for (int i = 0; i < n; ++i) {
      std::vector<double> q(c.vs.count);
      for (double& v : q) v = rng.uniform(-3.0, 3.0);
      ins.push_back(at(c.vs, q));
      bi.set(i, ins.back());
    }
    std::vector<double> out(n), scratch(e.max_stack() * n);
    std::vector<Jet1> out1(n), scratch1(e.max_stack() * n);
    e.run_batch<double>(bi, out.data(), scratch.data());
    e.run_batch<Jet1>(bi, out1.data(), scratch1.data());
    for (int i = 0; i < n; ++i) {
      CHECK(out[i] == e.eval(ins[i]));
      const Jet1 j = e.eval1(ins[i]);
      CHECK(out1[i].v == j.v);
      for (int a = 0; a < kMaxVars; ++a) CHECK(out1[i].d[a] == j.d[a]);
    }
  }
}

TEST_CASE("constants and aliases") {
  const Expr c = Expr::constant(2.5, circle_vars());
  CHECK(c.is_constant());
  CHECK(c.eval(at(circle_vars(), {0.3})) == 2.5);
  CHECK(Expr::parse("2^10", circle_vars()).eval(at(circle_vars(), {0.0})) == 1024.0);
  CHECK_FALSE(Expr::parse("cos(theta)", circle_vars()).is_constant());
  const VarSpace sph = VarSpace::plain({"x", "y", "z"});
  CHECK(sph.lookup("y") == 1);
  CHECK(sph.lookup("w") == -1);
}

}
