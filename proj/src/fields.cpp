#include "oulab/fields.hpp"

#include <cmath>
#include <limits>

#include "oulab/errors.hpp"
#include "oulab/format.hpp"

namespace oulab {

bool VectorFieldSpec::is_zero() const {
  for (const auto& c : components)
    if (!c.is_zero()) return false;
  return true;
}

std::optional<double> AssumptionConstants::c_for(double eps) const {
  std::optional<double> best_eps, best_c;
  for (const auto& [e, c] : c_eps) {
    if (e <= eps * (1.0 + 1e-12) && (!best_eps || e > *best_eps)) {
      best_eps = e;
      best_c = c;
    }
  }
  return best_c;
}

int ProblemSpec::fiber_dim() const {
  return connection.kind == ConnectionSpec::Kind::Tangent ? manifold->dim() : connection.rank;
}

ComplexExpr parse_complex(const std::string& re, const std::string& im, const VarSpace& vs) {
  return ComplexExpr{Expr::parse(re, vs), Expr::parse(im, vs)};
}

std::vector<Expr> parse_components(const std::vector<std::string>& src, const VarSpace& vs) {
  std::vector<Expr> out;
  for (const auto& s : src) out.push_back(Expr::parse(s, vs));
  return out;
}

ProblemSpec make_scalar_problem(const std::string& manifold, const std::string& phi,
                                const std::vector<std::string>& X, const std::string& V, const std::string& h) {
  ProblemSpec p;
  p.manifold = make_manifold(manifold);
  const VarSpace& vs = p.manifold->vars();
  p.phi = Expr::parse(phi, vs);
  if (X.empty()) p.X.components.assign(vs.count, Expr());
  else p.X.components = parse_components(X, vs);
  if (static_cast<int>(p.X.components.size()) != vs.count)
    throw ModeError("vector field needs " + std::to_string(vs.count) + " components");
  p.V.scalar = Expr::parse(V, vs);
  p.V.h = Expr::parse(h, vs);
  p.constants.n = p.manifold->dim();
  return p;
}

// ---------------------------------------------------------------------------

namespace {

std::complex<double> eval_complex(const ComplexExpr& e, const VarInputs& in) {
  return {e.re.eval(in), e.im.eval(in)};
}

bool needs_raw(const std::vector<ComplexExpr>& v) {
  for (const auto& e : v)
    if (e.re.needs_raw_values() || e.im.needs_raw_values()) return true;
  return false;
}

}  // namespace

Eigen::MatrixXcd potential_matrix(const ProblemSpec& prob, const AVec& x) {
  const int m = prob.fiber_dim();
  VarInputs in;
  if (!prob.V.is_matrix) {
    prob.manifold->fill_inputs(x.data(), in, prob.V.scalar.needs_raw_values());
    return Eigen::MatrixXcd::Identity(m, m) * prob.V.scalar.eval(in);
  }
  prob.manifold->fill_inputs(x.data(), in, needs_raw(prob.V.entries));
  const int r = prob.V.rank;
  Eigen::MatrixXcd v(r, r);
  for (int i = 0; i < r; ++i)
    for (int k = 0; k < r; ++k) v(i, k) = eval_complex(prob.V.entries[i * r + k], in);
  return v;
}

Eigen::MatrixXcd connection_form(const ProblemSpec& prob, const AVec& x, const AVec& v) {
  const int m = prob.fiber_dim();
  Eigen::MatrixXcd w = Eigen::MatrixXcd::Zero(m, m);
  if (prob.connection.kind != ConnectionSpec::Kind::Trivial || prob.connection.flat()) return w;
  const Manifold& man = *prob.manifold;
  double dv[kMaxVars] = {};
  man.var_differential(x.data(), v.data(), dv);
  VarInputs in;
  bool raw = false;
  for (const auto& slot : prob.connection.omega) raw = raw || needs_raw(slot);
  man.fill_inputs(x.data(), in, raw);
  for (int s = 0; s < man.vars().count; ++s) {
    const auto& om = prob.connection.omega[s];
    if (om.empty()) continue;
    for (int i = 0; i < m; ++i)
      for (int k = 0; k < m; ++k) w(i, k) += eval_complex(om[i * m + k], in) * dv[s];
  }
  return w;
}

Eigen::VectorXcd section_value(const ProblemSpec& prob, const std::vector<ComplexExpr>& f, const AVec& x) {
  const Manifold& man = *prob.manifold;
  if (prob.connection.kind == ConnectionSpec::Kind::Tangent) {
    std::vector<Expr> re, im;
    for (const auto& c : f) {
      re.push_back(c.re);
      im.push_back(c.im);
    }
    double fr[kMaxVars] = {}, fi[kMaxVars] = {};
    man.vector_field(x.data(), re, fr, nullptr);
    man.vector_field(x.data(), im, fi, nullptr);
    const AMat e = man.frame(x);
    Eigen::VectorXcd out(man.ambient_dim());
    for (int i = 0; i < man.ambient_dim(); ++i) {
      std::complex<double> s = 0.0;
      for (int a = 0; a < man.dim(); ++a) s += e(i, a) * std::complex<double>(fr[a], fi[a]);
      out[i] = s;
    }
    return out;
  }
  VarInputs in;
  man.fill_inputs(x.data(), in, needs_raw(f));
  Eigen::VectorXcd out(static_cast<Eigen::Index>(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) out[static_cast<Eigen::Index>(i)] = eval_complex(f[i], in);
  return out;
}

AVec drift(const ProblemSpec& prob, const AVec& x) {
  const Manifold& man = *prob.manifold;
  man.require_chart_point(x);
  const LocalJet j = man.jet(x.data(), prob.phi, 1);
  double xc[kMaxVars] = {};
  man.vector_field(x.data(), prob.X.components, xc, nullptr);
  const AMat e = man.frame(x);
  AVec z = AVec::Zero(man.ambient_dim());
  for (int a = 0; a < man.dim(); ++a) z += (xc[a] - j.grad[a]) * e.col(a);
  return z;
}

double u_epsilon(const ProblemSpec& prob, double eps, const AVec& x) {
  if (!(eps > 0.0)) throw InfeasibleConstantsError("u_epsilon needs eps > 0");
  const auto c = prob.constants.c_for(eps);
  if (!c) throw InfeasibleConstantsError("no C_eps tabulated at or below eps = " + std::to_string(eps));
  const LocalJet j = prob.manifold->jet(x.data(), prob.phi, 1);
  return 4.0 * (j.grad_norm2() + *c / eps);
}

double divergence_mismatch(const ProblemSpec& prob, const std::vector<AVec>& samples) {
  if (!prob.X.div) return 0.0;
  const Manifold& man = *prob.manifold;
  double worst = 0.0;
  for (const auto& x : samples) {
    double xc[kMaxVars], div = 0.0;
    man.vector_field(x.data(), prob.X.components, xc, &div);
    const LocalJet d = man.jet(x.data(), *prob.X.div, 0);
    worst = std::max(worst, std::abs(d.value - div));
  }
  return worst;
}

// ---------------------------------------------------------------------------

bool AssumptionReport::all_pass() const {
  for (const auto& c : conditions)
    if (!c.pass) return false;
  return true;
}

const ConditionRecord* AssumptionReport::find(const std::string& id) const {
  for (const auto& c : conditions)
    if (c.id == id) return &c;
  return nullptr;
}

double a6_margin(const AssumptionConstants& c) {
  const double p = c.p;
  return 1.0 - (c.theta / p + (p - 1.0) * c.gamma * (c.kappa / p + c.gamma / 4.0));
}

namespace {

struct PointData {
  double dphi2, hess_phi, x_norm, div_x, x_phi, h, dh, vmin, vmax;
};

PointData evaluate(const ProblemSpec& prob, const AVec& x) {
  const Manifold& man = *prob.manifold;
  PointData d{};
  const LocalJet jp = man.jet(x.data(), prob.phi, 2);
  d.dphi2 = jp.grad_norm2();
  d.hess_phi = jp.hess_norm();
  double xc[kMaxVars] = {};
  man.vector_field(x.data(), prob.X.components, xc, &d.div_x);
  double xn = 0.0, xp = 0.0;
  for (int a = 0; a < man.dim(); ++a) {
    xn += xc[a] * xc[a];
    xp += xc[a] * jp.grad[a];
  }
  d.x_norm = std::sqrt(xn);
  d.x_phi = xp;
  const LocalJet jh = man.jet(x.data(), prob.V.h, 1);
  d.h = jh.value;
  d.dh = std::sqrt(jh.grad_norm2());
  const Eigen::MatrixXcd v = potential_matrix(prob, x);
  if (v.rows() == 1) {
    d.vmin = d.vmax = v(0, 0).real();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(v, Eigen::EigenvaluesOnly);
    d.vmin = es.eigenvalues().minCoeff();
    d.vmax = es.eigenvalues().maxCoeff();
  }
  return d;
}

constexpr double kPassTol = 1e-12;

struct Acc {
  std::string id;
  double worst = std::numeric_limits<double>::infinity();
  void add(double m) { worst = std::min(worst, m); }
  ConditionRecord record(std::string detail = {}) const {
    return ConditionRecord{id, worst, worst >= -kPassTol, std::move(detail)};
  }
};

}  // namespace

double min_potential_eigenvalue(const ProblemSpec& prob, const std::vector<AVec>& samples) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& x : samples) m = std::min(m, evaluate(prob, x).vmin);
  return m;
}

AssumptionReport check_assumptions(const ProblemSpec& prob, const std::vector<AVec>& samples, double eps,
                                   const AssumptionOptions& opt) {
  const AssumptionConstants& c = prob.constants;
  AssumptionReport rep;
  rep.n_samples = static_cast<int>(samples.size());
  std::vector<PointData> pts;
  pts.reserve(samples.size());
  for (const auto& x : samples) pts.push_back(evaluate(prob, x));
  const std::string verified = "verified on " + std::to_string(samples.size()) + " samples";

  auto a2_record = [&](const std::string& id, double e, std::optional<double> ce) {
    Acc a{id};
    const double cc = ce.value_or(0.0);
    for (const auto& d : pts) a.add(e * d.dphi2 + cc - d.hess_phi);
    ConditionRecord r = a.record(verified + ", eps = " + format_double(e) + ", C_eps = " + format_double(cc));
    if (!ce && !c.c_eps.empty()) {
      r.pass = false;
      r.detail = "no C_eps tabulated at or below eps = " + format_double(e);
    }
    return r;
  };

  if (opt.feynman_kac) {
    Acc f1{"F1"}, a3{"A3"}, a4{"A4"};
    for (const auto& d : pts) {
      f1.add(d.vmin);
      a3.add(d.div_x - d.x_phi + c.beta1);
      a4.add(c.kappa * std::sqrt(std::max(0.0, d.dphi2 + c.beta2)) - d.x_norm);
    }
    rep.conditions.push_back(f1.record(verified));
    if (c.c_eps.empty()) {
      rep.conditions.push_back(a2_record("A2", eps, std::nullopt));
    } else {
      for (const auto& [e, ce] : c.c_eps) rep.conditions.push_back(a2_record("A2@" + format_double(e), e, ce));
    }
    rep.conditions.push_back(a3.record(verified + ", h = 0"));
    rep.conditions.push_back(a4.record(verified + ", h = 0"));
    return rep;
  }

  Acc lo{"V2_lower"}, hi{"V2_upper"}, hn{"h_nonneg"}, a3{"A3"}, a4{"A4"}, a5{"A5"};
  for (const auto& d : pts) {
    lo.add(d.vmin - d.h);
    hi.add(c.zeta_ratio * d.h - d.vmax);
    hn.add(d.h);
    a3.add(d.div_x - d.x_phi + c.theta * d.h + c.beta1);
    a4.add(c.kappa * std::sqrt(std::max(0.0, d.dphi2 + d.h + c.beta2)) - d.x_norm);
    a5.add(c.gamma * std::pow(std::max(0.0, d.h), 1.5) + c.beta3 - d.dh);
  }
  rep.conditions.push_back(lo.record(verified));
  rep.conditions.push_back(hi.record(verified));
  rep.conditions.push_back(hn.record(verified));
  rep.conditions.push_back(a2_record("A2", eps, c.c_eps.empty() ? std::nullopt : c.c_for(eps)));
  rep.conditions.push_back(a3.record(verified));
  rep.conditions.push_back(a4.record(verified));
  rep.conditions.push_back(a5.record(verified));
  const double m6 = a6_margin(c);
  rep.conditions.push_back(ConditionRecord{"A6", m6, m6 > 0.0, "arithmetic"});
  return rep;
}

std::pair<double, double> eps0_conditions(const AssumptionConstants& c, double e) {
  const double p = c.p;
  const double first = 1.0 - p * p * e * e - 2.0 * (p - 2.0) * e - 2.0 * e * std::sqrt(static_cast<double>(c.n)) -
                       3.0 * p * c.kappa * e;
  const double second = p - c.theta - (p - 1.0) * c.kappa * e;
  return {first, second};
}

Thresholds compute_thresholds(const AssumptionConstants& c) {
  if (!(c.p > 1.0)) throw InfeasibleConstantsError("p must exceed 1");
  Thresholds t;
  t.a6 = a6_margin(c);
  if (!(t.a6 > 0.0)) throw InfeasibleConstantsError("(A6) fails: a6 margin = " + std::to_string(t.a6));
  if (!(c.theta < c.p)) throw InfeasibleConstantsError("theta must be smaller than p");
  const double p = c.p;
  bool found = false;
  for (int k = 0; k <= 40 && !found; ++k) {
    const double e = std::pow(10.0, -k / 4.0);
    const auto [first, second] = eps0_conditions(c, e);
    const auto ce = c.c_for(e);
    if (first >= 0.5 && second > 0.0 && ce) {
      t.eps0 = e;
      t.c_eps0 = *ce;
      found = true;
    }
  }
  if (!found) throw InfeasibleConstantsError("no grid eps satisfies the eps0 conditions with a tabulated C_eps");
  t.lambda0 = c.beta1 / p + (p - 1.0) * c.kappa * t.eps0 * c.beta2 / p + (p - 1.0) * t.c_eps0 / (p * p * t.eps0);
  t.rho0 = (c.beta1 + (p - 1.0) * c.kappa * c.gamma * c.beta2 / 2.0) / p;
  t.lambda1 = std::max(t.rho0, t.lambda0);
  t.c_coercive = (1.0 + p * c.kappa * c.gamma) / t.a6;
  t.c_ueps = 8.0 * p * p / (p - 1.0);
  return t;
}

}  // namespace oulab
