#include "oulab/calculus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "oulab/errors.hpp"
#include "oulab/format.hpp"
#include "oulab/rng.hpp"

namespace oulab {

using cd = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Section = std::vector<VectorXcd>;

namespace {

const std::vector<std::pair<RuleId, std::string>>& rule_names() {
  static const std::vector<std::pair<RuleId, std::string>> t{
      {RuleId::P1, "p1"}, {RuleId::P2, "p2"}, {RuleId::P3, "p3"}, {RuleId::P4, "p4"}, {RuleId::P5, "p5"},
      {RuleId::P6, "p6"}, {RuleId::P7, "p7"}, {RuleId::P8, "p8"}, {RuleId::P9, "p9"}, {RuleId::C1, "c1"},
      {RuleId::C2, "c2"}, {RuleId::C3, "c3"}, {RuleId::LapHess, "lap_hess"}};
  return t;
}

// Covariant calculus on sections of the trivial bundle over a grid.
struct Calc {
  const PeriodicGrid& g;
  const GridConnection* conn;

  int dims() const { return g.dims; }
  VectorXcd d(const VectorXcd& v, int a) const { return spectral_d(g, v, a); }
  VectorXcd dt(const VectorXcd& v, int a) const { return spectral_dt(g, v, a); }
  VectorXcd lap(const VectorXcd& v) const { return spectral_laplacian(g, v); }

  VectorXcd omega_times(int a, const Section& u, int i) const {
    VectorXcd r = VectorXcd::Zero(g.size());
    const auto& om = conn->omega[a];
    for (int x = 0; x < g.size(); ++x)
      for (int k = 0; k < conn->rank; ++k) r[x] += om[x](i, k) * u[k][x];
    return r;
  }
  VectorXcd omega_adj_times(int a, const Section& u, int i) const {
    VectorXcd r = VectorXcd::Zero(g.size());
    const auto& om = conn->omega[a];
    for (int x = 0; x < g.size(); ++x)
      for (int k = 0; k < conn->rank; ++k) r[x] += std::conj(om[x](k, i)) * u[k][x];
    return r;
  }
  Section nabla(const Section& u, int a) const {
    Section r;
    for (int i = 0; i < conn->rank; ++i) r.push_back(d(u[i], a) + omega_times(a, u, i));
    return r;
  }
  Section nabla_adjoint(const std::vector<Section>& psi) const {
    Section r(conn->rank, VectorXcd::Zero(g.size()));
    for (int a = 0; a < dims(); ++a)
      for (int i = 0; i < conn->rank; ++i) r[i] += dt(psi[a][i], a) + omega_adj_times(a, psi[a], i);
    return r;
  }
  Section rough_laplacian(const Section& u) const {
    std::vector<Section> g1;
    for (int a = 0; a < dims(); ++a) g1.push_back(nabla(u, a));
    return nabla_adjoint(g1);
  }
  Section along(const std::vector<VectorXcd>& y, const Section& u) const {
    Section r(conn->rank, VectorXcd::Zero(g.size()));
    for (int a = 0; a < dims(); ++a) {
      const Section na = nabla(u, a);
      for (int i = 0; i < conn->rank; ++i) r[i] += y[a].cwiseProduct(na[i]);
    }
    return r;
  }
};

Section scale(const VectorXcd& f, const Section& u) {
  Section r;
  for (const auto& c : u) r.push_back(f.cwiseProduct(c));
  return r;
}

double sup_diff(const Section& a, const Section& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, sup_norm(a[i] - b[i]));
  return m;
}

// Random trigonometric polynomial of degree <= 3, scaled to sup norm one.
VectorXcd trig(const PeriodicGrid& g, CounterRng& rng, bool complex_valued) {
  constexpr int deg = 3;
  VectorXcd v = VectorXcd::Zero(g.size());
  for (int k1 = 0; k1 <= deg; ++k1)
    for (int k2 = (g.dims == 1 ? 0 : -deg); k2 <= (g.dims == 1 ? 0 : deg); ++k2) {
      const double a = rng.normal(), b = rng.normal();
      const double c = complex_valued ? rng.normal() : 0.0, s = complex_valued ? rng.normal() : 0.0;
      for (int x = 0; x < g.size(); ++x) {
        const double t = k1 * g.angles[x][0] + k2 * g.angles[x][1];
        v[x] += cd(a * std::cos(t) + b * std::sin(t), c * std::cos(t) + s * std::sin(t));
      }
    }
  const double m = sup_norm(v);
  return m > 0.0 ? VectorXcd(v / m) : v;
}

// Outer functions for the chain rules: F, F', F''.
struct Outer {
  double c0, c1, c2, c3;
  int kind;  // 0: t^2, 1: t^3, 2: exp, 3: random cubic
  double f(double t, int order) const {
    switch (kind) {
      case 0: return order == 0 ? t * t : order == 1 ? 2.0 * t : 2.0;
      case 1: return order == 0 ? t * t * t : order == 1 ? 3.0 * t * t : 6.0 * t;
      case 2: return std::exp(t);
      default:
        return order == 0 ? c0 + t * (c1 + t * (c2 + t * c3))
               : order == 1 ? c1 + t * (2.0 * c2 + 3.0 * c3 * t)
                            : 2.0 * c2 + 6.0 * c3 * t;
    }
  }
};

VectorXcd apply_outer(const Outer& o, const VectorXcd& w, int order) {
  VectorXcd r(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) r[i] = o.f(w[i].real(), order);
  return r;
}

double trial(RuleId rule, const Calc& c, CounterRng& rng, int trial_index) {
  const PeriodicGrid& g = c.g;
  const int n = g.dims;
  switch (rule) {
    case RuleId::P1: case RuleId::P2: case RuleId::P3: case RuleId::P4: case RuleId::P5: {
      const VectorXcd f = trig(g, rng, false);
      const VectorXcd w = trig(g, rng, true);
      const VectorXcd fw = f.cwiseProduct(w);
      double r = 0.0;
      if (rule == RuleId::P1) {
        for (int a = 0; a < n; ++a)
          r = std::max(r, sup_norm(c.d(fw, a) - c.d(f, a).cwiseProduct(w) - f.cwiseProduct(c.d(w, a))));
      } else if (rule == RuleId::P2) {
        std::vector<VectorXcd> om;
        for (int a = 0; a < n; ++a) om.push_back(trig(g, rng, true));
        VectorXcd lhs = VectorXcd::Zero(g.size()), dom = VectorXcd::Zero(g.size()), pair = VectorXcd::Zero(g.size());
        for (int a = 0; a < n; ++a) {
          lhs += c.dt(f.cwiseProduct(om[a]), a);
          dom += c.dt(om[a], a);
          pair += c.d(f, a).cwiseProduct(om[a]);
        }
        r = sup_norm(lhs - (f.cwiseProduct(dom) - pair));
      } else if (rule == RuleId::P3) {
        VectorXcd lhs = VectorXcd::Zero(g.size()), pair = VectorXcd::Zero(g.size());
        for (int a = 0; a < n; ++a) {
          lhs += c.dt(f.cwiseProduct(c.d(w, a)), a);
          pair += c.d(f, a).cwiseProduct(c.d(w, a));
        }
        r = sup_norm(lhs - (f.cwiseProduct(c.lap(w)) - pair));
      } else if (rule == RuleId::P4) {
        VectorXcd pair = VectorXcd::Zero(g.size());
        for (int a = 0; a < n; ++a) pair += c.d(f, a).cwiseProduct(c.d(w, a));
        r = sup_norm(c.lap(fw) - (f.cwiseProduct(c.lap(w)) - 2.0 * pair + w.cwiseProduct(c.lap(f))));
      } else {
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) {
            const VectorXcd rhs = f.cwiseProduct(spectral_dd(g, w, a, b)) + c.d(f, a).cwiseProduct(c.d(w, b)) +
                                  c.d(w, a).cwiseProduct(c.d(f, b)) + w.cwiseProduct(spectral_dd(g, f, a, b));
            r = std::max(r, sup_norm(spectral_dd(g, fw, a, b) - rhs));
          }
      }
      return r;
    }
    case RuleId::P6: case RuleId::P7: case RuleId::P8: case RuleId::P9: {
      const VectorXcd f = trig(g, rng, false);
      Section u;
      for (int i = 0; i < c.conn->rank; ++i) u.push_back(trig(g, rng, true));
      const Section fu = scale(f, u);
      std::vector<VectorXcd> df;
      for (int a = 0; a < n; ++a) df.push_back(c.d(f, a));
      if (rule == RuleId::P6) {
        double r = 0.0;
        for (int a = 0; a < n; ++a) {
          Section rhs = scale(f, c.nabla(u, a));
          for (int i = 0; i < c.conn->rank; ++i) rhs[i] += df[a].cwiseProduct(u[i]);
          r = std::max(r, sup_diff(c.nabla(fu, a), rhs));
        }
        return r;
      }
      if (rule == RuleId::P7) {
        std::vector<VectorXcd> z;
        for (int a = 0; a < n; ++a) z.push_back(trig(g, rng, false));
        VectorXcd zf = VectorXcd::Zero(g.size());
        for (int a = 0; a < n; ++a) zf += z[a].cwiseProduct(df[a]);
        Section rhs = scale(f, c.along(z, u));
        for (int i = 0; i < c.conn->rank; ++i) rhs[i] += zf.cwiseProduct(u[i]);
        return sup_diff(c.along(z, fu), rhs);
      }
      if (rule == RuleId::P8) {
        std::vector<Section> psi;
        for (int a = 0; a < n; ++a) psi.push_back(scale(f, c.nabla(u, a)));
        Section rhs = scale(f, c.rough_laplacian(u));
        const Section dfu = c.along(df, u);
        for (int i = 0; i < c.conn->rank; ++i) rhs[i] -= dfu[i];
        return sup_diff(c.nabla_adjoint(psi), rhs);
      }
      Section rhs = scale(f, c.rough_laplacian(u));
      const Section dfu = c.along(df, u);
      const VectorXcd lf = c.lap(f);
      for (int i = 0; i < c.conn->rank; ++i) rhs[i] += -2.0 * dfu[i] + u[i].cwiseProduct(lf);
      return sup_diff(c.rough_laplacian(fu), rhs);
    }
    case RuleId::C1: case RuleId::C2: case RuleId::C3: {
      const VectorXcd w = trig(g, rng, false);
      Outer o{rng.normal(), rng.normal(), rng.normal(), rng.normal(), trial_index % 4};
      const VectorXcd Fw = apply_outer(o, w, 0), F1 = apply_outer(o, w, 1), F2 = apply_outer(o, w, 2);
      double r = 0.0;
      if (rule == RuleId::C1) {
        for (int a = 0; a < n; ++a) r = std::max(r, sup_norm(c.d(Fw, a) - F1.cwiseProduct(c.d(w, a))));
      } else if (rule == RuleId::C2) {
        VectorXcd dw2 = VectorXcd::Zero(g.size());
        for (int a = 0; a < n; ++a) dw2 += c.d(w, a).cwiseAbs2().cast<cd>();
        r = sup_norm(c.lap(Fw) - (-F2.cwiseProduct(dw2) + F1.cwiseProduct(c.lap(w))));
      } else {
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) {
            const VectorXcd rhs =
                F2.cwiseProduct(c.d(w, a)).cwiseProduct(c.d(w, b)) + F1.cwiseProduct(spectral_dd(g, w, a, b));
            r = std::max(r, sup_norm(spectral_dd(g, Fw, a, b) - rhs));
          }
      }
      return r;
    }
    case RuleId::LapHess: {
      const VectorXcd w = trig(g, rng, false);
      const VectorXcd lw = c.lap(w);
      Eigen::VectorXd hs = Eigen::VectorXd::Zero(g.size());
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) hs += spectral_dd(g, w, a, b).cwiseAbs2();
      const Eigen::VectorXd margin = lw.cwiseAbs() - std::sqrt(static_cast<double>(n)) * hs.cwiseSqrt();
      return margin.maxCoeff();
    }
  }
  return 0.0;
}

}  // namespace

RuleId parse_rule(const std::string& s) {
  for (const auto& [r, n] : rule_names())
    if (n == s) return r;
  throw ModeError("unknown calculus rule '" + s + "'");
}

std::string rule_name(RuleId r) {
  for (const auto& [q, n] : rule_names())
    if (q == r) return n;
  return "?";
}

const std::vector<RuleId>& all_rules() {
  static const std::vector<RuleId> v = [] {
    std::vector<RuleId> r;
    for (const auto& e : rule_names()) r.push_back(e.first);
    return r;
  }();
  return v;
}

bool rule_is_inequality(RuleId r) { return r == RuleId::LapHess; }

GridConnection default_connection(const PeriodicGrid& g) {
  const cd i(0.0, 1.0);
  GridConnection c;
  c.rank = 2;
  c.omega.assign(g.dims, std::vector<MatrixXcd>(g.size(), MatrixXcd::Zero(2, 2)));
  for (int x = 0; x < g.size(); ++x) {
    const double t = g.angles[x][0];
    auto& o = c.omega[0][x];
    o(0, 0) = i * (1.0 + 0.5 * std::cos(t));
    o(0, 1) = 0.3 * std::sin(t) + 0.2 * i;
    o(1, 0) = -0.3 * std::sin(t) + 0.2 * i;
    o(1, 1) = 2.0 * i;
    if (g.dims == 2) {
      const double s = g.angles[x][1];
      auto& q = c.omega[1][x];
      q(0, 0) = 0.5 * i * std::sin(s);
      q(0, 1) = 0.1 + 0.4 * i * std::cos(s);
      q(1, 0) = -0.1 + 0.4 * i * std::cos(s);
      q(1, 1) = -i;
    }
  }
  return c;
}

GridConnection diagonal_connection(const PeriodicGrid& g, const std::vector<double>& coef) {
  const int m = static_cast<int>(coef.size());
  if (m < 1) throw DegenerateInputError("connection rank must be positive");
  GridConnection c;
  c.rank = m;
  c.omega.assign(g.dims, std::vector<MatrixXcd>(g.size(), MatrixXcd::Zero(m, m)));
  for (int x = 0; x < g.size(); ++x)
    for (int k = 0; k < m; ++k) c.omega[0][x](k, k) = cd(0.0, coef[k]);
  return c;
}

RuleResult verify_rule(RuleId rule, const ManifoldPtr& m, int trials, std::uint64_t seed, int N) {
  const GridPtr g = make_grid(m, N);
  return verify_rule(rule, m, trials, seed, N, default_connection(*g));
}

RuleResult verify_rule(RuleId rule, const ManifoldPtr& m, int trials, std::uint64_t seed, int N,
                       const GridConnection& conn) {
  if (trials < 1) throw DegenerateInputError("trials must be at least 1");
  const GridPtr g = make_grid(m, N);
  if (static_cast<int>(conn.omega.size()) != g->dims)
    throw DegenerateInputError("connection does not match the grid dimension");
  for (const auto& ax : conn.omega)
    if (static_cast<int>(ax.size()) != g->size()) throw DegenerateInputError("connection does not match the grid");
  const Calc calc{*g, &conn};
  RuleResult res{rule, m->name(), trials, -std::numeric_limits<double>::infinity(), false};
  for (int t = 0; t < trials; ++t) {
    CounterRng rng(derive_seed(seed, static_cast<std::uint64_t>(rule)), static_cast<std::uint64_t>(t));
    res.max_residual = std::max(res.max_residual, trial(rule, calc, rng, t));
  }
  res.pass = rule_is_inequality(rule) ? res.max_residual <= kLapHessTolerance : res.max_residual <= kRuleTolerance;
  return res;
}

double p9_residual(const PeriodicGrid& g, const GridConnection& conn, const VectorXcd& f, const Section& u) {
  const Calc c{g, &conn};
  std::vector<VectorXcd> df;
  for (int a = 0; a < g.dims; ++a) df.push_back(c.d(f, a));
  Section rhs = scale(f, c.rough_laplacian(u));
  const Section dfu = c.along(df, u);
  const VectorXcd lf = c.lap(f);
  for (int i = 0; i < conn.rank; ++i) rhs[i] += -2.0 * dfu[i] + u[i].cwiseProduct(lf);
  return sup_diff(c.rough_laplacian(scale(f, u)), rhs);
}

void write_rules_csv(std::ostream& os, const std::vector<RuleResult>& rows) {
  os << "rule,manifold,trials,max_residual,pass\n";
  for (const auto& r : rows)
    os << rule_name(r.rule) << ',' << csv_field(r.manifold) << ',' << r.trials << ',' << format_double(r.max_residual)
       << ',' << (r.pass ? "true" : "false") << '\n';
}

}  // namespace oulab
