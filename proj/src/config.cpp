#include "oulab/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "oulab/errors.hpp"
#include "oulab/format.hpp"

namespace oulab {

using nlohmann::json;

namespace {

struct Ctx {
  const std::string& path;
  [[noreturn]] void fail(const std::string& field, const std::string& what) const { throw ConfigError(path, field, what); }
};

std::string expr_source(const Ctx& c, const json& v, const std::string& field) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return format_double(v.get<double>());
  c.fail(field, "expected an expression string");
}

Expr parse_expr(const Ctx& c, const json& v, const std::string& field, const VarSpace& vs) {
  const std::string src = expr_source(c, v, field);
  try {
    return Expr::parse(src, vs);
  } catch (const Error& e) {
    c.fail(field, e.what());
  }
}

ComplexExpr parse_entry(const Ctx& c, const json& v, const std::string& field, const VarSpace& vs) {
  if (v.is_object()) {
    for (auto it = v.begin(); it != v.end(); ++it)
      if (it.key() != "re" && it.key() != "im") c.fail(field, "unknown key '" + it.key() + "'");
    ComplexExpr e;
    if (v.contains("re")) e.re = parse_expr(c, v["re"], field + ".re", vs);
    if (v.contains("im")) e.im = parse_expr(c, v["im"], field + ".im", vs);
    return e;
  }
  return ComplexExpr{parse_expr(c, v, field, vs), Expr()};
}

std::vector<ComplexExpr> parse_matrix(const Ctx& c, const json& v, const std::string& field, const VarSpace& vs,
                                      int& rank) {
  if (!v.is_array() || v.empty()) c.fail(field, "expected a nonempty square matrix");
  rank = static_cast<int>(v.size());
  std::vector<ComplexExpr> out;
  for (int i = 0; i < rank; ++i) {
    const json& row = v[i];
    if (!row.is_array() || static_cast<int>(row.size()) != rank) c.fail(field, "matrix is not square");
    for (int k = 0; k < rank; ++k)
      out.push_back(parse_entry(c, row[k], field + "[" + std::to_string(i) + "][" + std::to_string(k) + "]", vs));
  }
  return out;
}

double number(const Ctx& c, const json& obj, const std::string& key, const std::string& field, double def) {
  if (!obj.contains(key)) return def;
  const json& v = obj[key];
  if (!v.is_number()) c.fail(field, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) c.fail(field, "must be finite");
  return x;
}

void check_keys(const Ctx& c, const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) c.fail(where.empty() ? it.key() : where + "." + it.key(), "unknown key");
  }
}

}  // namespace

ProblemConfig parse_problem(const json& doc, const std::string& path) {
  const Ctx c{path};
  if (!doc.is_object()) c.fail("<root>", "config must be a JSON object");
  check_keys(c, doc, "",
             {"manifold", "phi", "X", "V", "h", "zeta_ratio", "V_nonnegative", "connection", "constants", "f",
              "samples", "description"});
  ProblemConfig out;
  out.path = path;
  ProblemSpec& p = out.problem;

  if (!doc.contains("manifold") || !doc["manifold"].is_string()) c.fail("manifold", "required string");
  try {
    p.manifold = make_manifold(doc["manifold"].get<std::string>());
  } catch (const Error& e) {
    c.fail("manifold", e.what());
  }
  const VarSpace& vs = p.manifold->vars();
  p.constants.n = p.manifold->dim();

  p.phi = doc.contains("phi") ? parse_expr(c, doc["phi"], "phi", vs) : Expr();

  p.X.components.assign(vs.count, Expr());
  if (doc.contains("X")) {
    const json& x = doc["X"];
    if (!x.is_object()) c.fail("X", "expected {components, div}");
    check_keys(c, x, "X", {"components", "div"});
    if (x.contains("components")) {
      const json& comps = x["components"];
      if (!comps.is_array() || static_cast<int>(comps.size()) != vs.count)
        c.fail("X.components", "expected " + std::to_string(vs.count) + " components");
      for (int a = 0; a < vs.count; ++a)
        p.X.components[a] = parse_expr(c, comps[a], "X.components[" + std::to_string(a) + "]", vs);
    }
    if (x.contains("div")) p.X.div = parse_expr(c, x["div"], "X.div", vs);
  }

  if (!doc.contains("V")) c.fail("V", "required");
  if (doc["V"].is_array()) {
    p.V.is_matrix = true;
    p.V.entries = parse_matrix(c, doc["V"], "V", vs, p.V.rank);
  } else {
    p.V.scalar = parse_expr(c, doc["V"], "V", vs);
  }
  p.V.h = doc.contains("h") ? parse_expr(c, doc["h"], "h", vs) : Expr();
  if (doc.contains("V_nonnegative")) {
    if (!doc["V_nonnegative"].is_boolean()) c.fail("V_nonnegative", "expected a boolean");
    p.V.nonnegative = doc["V_nonnegative"].get<bool>();
  }

  p.connection.rank = p.V.is_matrix ? p.V.rank : 1;
  if (doc.contains("connection")) {
    const json& cn = doc["connection"];
    if (cn.is_string()) {
      const std::string s = cn.get<std::string>();
      if (s == "tangent") {
        p.connection.kind = ConnectionSpec::Kind::Tangent;
        if (p.V.is_matrix) c.fail("V", "the tangent bundle takes a scalar potential");
      } else if (s != "scalar" && s != "trivial") {
        c.fail("connection", "expected \"scalar\", \"trivial\", \"tangent\" or an object");
      }
    } else if (cn.is_object()) {
      check_keys(c, cn, "connection", {"type", "rank", "omega"});
      if (cn.contains("type") && cn["type"] != "trivial") c.fail("connection.type", "only \"trivial\" takes an object");
      if (cn.contains("rank")) {
        if (!cn["rank"].is_number_integer() || cn["rank"].get<int>() < 1) c.fail("connection.rank", "positive integer");
        p.connection.rank = cn["rank"].get<int>();
      }
      if (p.V.is_matrix && p.V.rank != p.connection.rank) c.fail("connection.rank", "does not match the size of V");
      if (cn.contains("omega")) {
        const json& om = cn["omega"];
        if (!om.is_object()) c.fail("connection.omega", "expected {variable: matrix}");
        std::vector<std::vector<ComplexExpr>> slots(vs.count);
        bool any = false;
        for (auto it = om.begin(); it != om.end(); ++it) {
          const std::string field = "connection.omega." + it.key();
          const int s = vs.lookup(it.key());
          if (s < 0) c.fail(field, "unknown variable");
          int r = 0;
          slots[vs.slot[s]] = parse_matrix(c, it.value(), field, vs, r);
          if (r != p.connection.rank) c.fail(field, "matrix size differs from the bundle rank");
          any = true;
        }
        if (any) {
          for (auto& s : slots)
            if (s.empty()) s.assign(static_cast<std::size_t>(p.connection.rank * p.connection.rank), ComplexExpr{});
          p.connection.omega = std::move(slots);
        }
      }
    } else {
      c.fail("connection", "expected a string or an object");
    }
  }

  p.constants.zeta_ratio = number(c, doc, "zeta_ratio", "zeta_ratio", 1.0);
  if (p.constants.zeta_ratio < 1.0) c.fail("zeta_ratio", "must be at least 1");
  if (doc.contains("constants")) {
    const json& k = doc["constants"];
    if (!k.is_object()) c.fail("constants", "expected an object");
    check_keys(c, k, "constants", {"theta", "beta1", "kappa", "beta2", "gamma", "beta3", "p", "C_eps", "zeta_ratio"});
    auto& a = p.constants;
    a.theta = number(c, k, "theta", "constants.theta", 0.0);
    a.beta1 = number(c, k, "beta1", "constants.beta1", 0.0);
    a.kappa = number(c, k, "kappa", "constants.kappa", 0.0);
    a.beta2 = number(c, k, "beta2", "constants.beta2", 0.0);
    a.gamma = number(c, k, "gamma", "constants.gamma", 0.0);
    a.beta3 = number(c, k, "beta3", "constants.beta3", 0.0);
    a.p = number(c, k, "p", "constants.p", 2.0);
    if (k.contains("zeta_ratio")) {
      a.zeta_ratio = number(c, k, "zeta_ratio", "constants.zeta_ratio", 1.0);
      if (a.zeta_ratio < 1.0) c.fail("constants.zeta_ratio", "must be at least 1");
    }
    if (!(a.p > 1.0)) c.fail("constants.p", "p must exceed 1");
    if (k.contains("C_eps")) {
      const json& t = k["C_eps"];
      if (!t.is_array()) c.fail("constants.C_eps", "expected [{eps, C}]");
      for (std::size_t i = 0; i < t.size(); ++i) {
        const std::string f = "constants.C_eps[" + std::to_string(i) + "]";
        if (!t[i].is_object()) c.fail(f, "expected {eps, C}");
        check_keys(c, t[i], f, {"eps", "C"});
        if (!t[i].contains("eps") || !t[i].contains("C")) c.fail(f, "needs eps and C");
        const double e = number(c, t[i], "eps", f + ".eps", 0.0);
        const double cc = number(c, t[i], "C", f + ".C", 0.0);
        if (!(e > 0.0)) c.fail(f + ".eps", "must be positive");
        if (cc < 0.0) c.fail(f + ".C", "must be nonnegative");
        a.c_eps.emplace_back(e, cc);
      }
    }
  }

  if (doc.contains("f")) {
    const json& f = doc["f"];
    if (f.is_array()) {
      for (std::size_t i = 0; i < f.size(); ++i) p.f.push_back(parse_entry(c, f[i], "f[" + std::to_string(i) + "]", vs));
    } else {
      p.f.push_back(parse_entry(c, f, "f", vs));
    }
    const std::size_t want = p.connection.kind == ConnectionSpec::Kind::Tangent ? static_cast<std::size_t>(vs.count)
                                                                                 : static_cast<std::size_t>(p.fiber_dim());
    if (p.f.size() != want) c.fail("f", "expected " + std::to_string(want) + " components");
  }

  if (doc.contains("samples")) {
    const json& s = doc["samples"];
    if (!s.is_object()) c.fail("samples", "expected {count}");
    check_keys(c, s, "samples", {"count"});
    if (s.contains("count")) {
      if (!s["count"].is_number_integer() || s["count"].get<int>() < 1) c.fail("samples.count", "positive integer");
      out.samples = s["count"].get<int>();
    }
  }

  // pointwise validation on the sample set
  const auto pts = p.manifold->sample_points(out.samples, 1);
  if (p.X.div) {
    const double mis = divergence_mismatch(p, pts);
    if (mis > 1e-6) c.fail("X.div", "differs from the computed divergence by " + format_double(mis));
  }
  for (const auto& x : pts) {
    if (p.V.is_matrix) {
      const Eigen::MatrixXcd v = potential_matrix(p, x);
      if ((v - v.adjoint()).cwiseAbs().maxCoeff() > 1e-12) c.fail("V", "matrix potential is not Hermitian");
    }
    if (!p.connection.flat()) {
      const AMat e = p.manifold->frame(x);
      for (int a = 0; a < p.manifold->dim(); ++a) {
        const Eigen::MatrixXcd w = connection_form(p, x, AVec(e.col(a)));
        if ((w + w.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
          c.fail("connection.omega", "connection coefficients are not anti-Hermitian");
      }
    }
  }
  return out;
}

ProblemConfig load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "<file>", "cannot open config file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path, "<file>", std::string("invalid JSON: ") + e.what());
  }
  return parse_problem(doc, path);
}

}  // namespace oulab
