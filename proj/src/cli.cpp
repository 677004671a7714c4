#include "oulab/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "oulab/calculus.hpp"
#include "oulab/config.hpp"
#include "oulab/errors.hpp"
#include "oulab/feynman_kac.hpp"
#include "oulab/format.hpp"
#include "oulab/oracle.hpp"
#include "oulab/rng.hpp"
#include "oulab/stochastics.hpp"

namespace oulab {

using nlohmann::json;

namespace {

struct Opts {
  std::string config, output, format, x0, family = "all", rule = "all", manifold = "both",
                                               scheme = "heun_stratonovich", dump;
  std::uint64_t seed = 1;
  double dt = 1e-3, t = 1.0, rel_tol = 0.02;
  std::int64_t paths = 10000;
  std::optional<double> p, lambda, eps;
  bool force = false, no_timestamp = false, fk = false;
  int threads = 1, points = 8, oracle_n = 64, suite = 50, degree = -1, trials = 100, pairs = 20, samples = 0;
};

// A report is a JSON document and optionally a flat table for CSV output.
struct Report {
  json doc = json::object();
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  bool has_table = false;
};

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::string bool_str(bool b) { return b ? "true" : "false"; }

void emit(const Opts& o, Report& r, const std::string& default_format, std::ostream& out) {
  const std::string fmt = o.format.empty() ? default_format : o.format;
  std::ostringstream s;
  if (fmt == "csv") {
    if (!r.has_table) throw ModeError("this subcommand has no CSV form; use --format json");
    for (std::size_t i = 0; i < r.columns.size(); ++i) s << (i ? "," : "") << csv_field(r.columns[i]);
    s << '\n';
    for (const auto& row : r.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) s << (i ? "," : "") << csv_field(row[i]);
      s << '\n';
    }
  } else if (fmt == "json") {
    if (!o.no_timestamp) r.doc["timestamp"] = timestamp();
    s << r.doc.dump(2) << '\n';
  } else {
    throw ModeError("unknown format '" + fmt + "'");
  }
  if (o.output.empty()) {
    out << s.str();
  } else {
    std::ofstream f(o.output, std::ios::binary);
    if (!f) throw ModeError("cannot write " + o.output);
    f << s.str();
  }
}

ProblemConfig load(const Opts& o) {
  if (o.config.empty()) throw ConfigError("<none>", "--config", "a problem config is required");
  ProblemConfig pc = load_problem(o.config);
  if (o.p) {
    if (!(*o.p > 1.0)) throw ConfigError(o.config, "--p", "p must exceed 1");
    pc.problem.constants.p = *o.p;
  }
  if (o.samples > 0) pc.samples = o.samples;
  return pc;
}

AVec parse_point(const Manifold& m, const std::string& s) {
  std::vector<double> q;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t pos = 0;
      q.push_back(std::stod(tok, &pos));
      if (pos != tok.size() && tok.find_first_not_of(' ', pos) != std::string::npos) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ModeError("--x0: cannot read coordinate '" + tok + "'");
    }
  }
  const std::size_t want = static_cast<std::size_t>(m.dim());
  if (q.size() != want) throw ModeError("--x0 needs " + std::to_string(want) + " comma-separated coordinates");
  return point_from_coords(m, q);
}

SdeConfig sde(const Opts& o) {
  SdeConfig c;
  c.dt = o.dt;
  c.t_final = o.t;
  c.n_paths = o.paths;
  c.seed = o.seed;
  c.scheme = parse_scheme(o.scheme);
  c.threads = o.threads;
  c.validate();
  return c;
}

std::vector<AVec> evaluation_points(const Opts& o, const Manifold& m) {
  if (!o.x0.empty()) return {parse_point(m, o.x0)};
  if (o.points < 1) throw ModeError("--points must be positive");
  return m.sample_points(o.points, o.seed);
}

std::vector<std::string> coord_columns(const Manifold& m) {
  std::vector<std::string> c;
  const bool chart = m.name() == "circle" || m.name() == "torus2";
  if (chart)
    for (int i = 0; i < m.vars().count; ++i) c.push_back(m.vars().canonical(i));
  else
    for (int i = 0; i < m.ambient_dim(); ++i) c.push_back("x" + std::to_string(i + 1));
  return c;
}

std::vector<double> coords(const Manifold& m, const AVec& x) {
  if (m.name() == "circle" || m.name() == "torus2") {
    const ChartPoint c = m.chart(x);
    return std::vector<double>(c.q.data(), c.q.data() + c.q.size());
  }
  return std::vector<double>(x.data(), x.data() + x.size());
}

// ---------------------------------------------------------------------------

int cmd_assumptions(const Opts& o, Report& r) {
  const ProblemConfig pc = load(o);
  const ProblemSpec& p = pc.problem;
  double eps = 1.0;
  if (o.eps) {
    eps = *o.eps;
  } else {
    try {
      eps = compute_thresholds(p.constants).eps0;
    } catch (const InfeasibleConstantsError&) {
    }
  }
  if (!(eps > 0.0)) throw ModeError("--eps must be positive");
  AssumptionOptions ao;
  ao.feynman_kac = o.fk;
  const auto pts = p.manifold->sample_points(pc.samples, o.seed);
  const AssumptionReport rep = check_assumptions(p, pts, eps, ao);
  json conds = json::array();
  r.has_table = true;
  r.columns = {"id", "worst_margin", "pass", "detail"};
  for (const auto& c : rep.conditions) {
    conds.push_back({{"id", c.id}, {"worst_margin", num(c.worst_margin)}, {"pass", c.pass}, {"detail", c.detail}});
    r.rows.push_back({c.id, format_double(c.worst_margin), bool_str(c.pass), c.detail});
  }
  r.doc["conditions"] = conds;
  r.doc["n_samples"] = rep.n_samples;
  r.doc["eps"] = eps;
  r.doc["mode"] = o.fk ? "feynman_kac" : "analytic";
  r.doc["all_pass"] = rep.all_pass();
  r.doc["config"] = o.config;
  return rep.all_pass() ? kExitOk : kExitCheckFailed;
}

int cmd_thresholds(const Opts& o, Report& r) {
  const ProblemConfig pc = load(o);
  const Thresholds t = compute_thresholds(pc.problem.constants);
  r.doc = {{"eps0", t.eps0},         {"C_eps0", t.c_eps0}, {"lambda0", t.lambda0},
           {"rho0", t.rho0},         {"lambda1", t.lambda1}, {"C_coercive", t.c_coercive},
           {"C_Ueps", t.c_ueps},     {"a6_margin", t.a6},  {"p", pc.problem.constants.p},
           {"config", o.config}};
  const auto [first, second] = eps0_conditions(pc.problem.constants, t.eps0);
  r.doc["eps0_conditions"] = {num(first), num(second)};
  r.has_table = true;
  r.columns = {"quantity", "value"};
  for (const char* k : {"eps0", "C_eps0", "lambda0", "rho0", "lambda1", "C_coercive", "C_Ueps", "a6_margin"})
    r.rows.push_back({k, format_double(r.doc[k].get<double>())});
  return kExitOk;
}

int cmd_simulate(const Opts& o, Report& r) {
  const ProblemConfig pc = load(o);
  const ProblemSpec& p = pc.problem;
  const Manifold& m = *p.manifold;
  const AVec x0 = o.x0.empty() ? m.sample_points(1, o.seed).front() : parse_point(m, o.x0);
  const SdeConfig cfg = sde(o);
  const PathBatch batch = simulate_paths(p, x0, cfg);
  if (!o.dump.empty()) write_path_dump(o.dump, batch);
  r.has_table = true;
  r.columns = {"path"};
  for (int i = 0; i < m.ambient_dim(); ++i) r.columns.push_back("y" + std::to_string(i + 1));
  r.columns.push_back("alive");
  r.columns.push_back("exit_time");
  json paths = json::array();
  std::int64_t alive = 0;
  for (std::size_t i = 0; i < batch.paths.size(); ++i) {
    const PathRecord& pr = batch.paths[i];
    const AVec& y = pr.positions.back();
    std::vector<std::string> row{std::to_string(i)};
    json pos = json::array();
    for (Eigen::Index k = 0; k < y.size(); ++k) {
      row.push_back(format_double(y[k]));
      pos.push_back(y[k]);
    }
    row.push_back(bool_str(pr.alive));
    row.push_back(format_double(pr.exit_time));
    r.rows.push_back(row);
    paths.push_back({{"final", pos}, {"alive", pr.alive}, {"exit_time", num(pr.exit_time)}});
    alive += pr.alive;
  }
  r.doc = {{"paths", paths},       {"steps", batch.steps},     {"dt", batch.dt},
           {"t", cfg.t_final},     {"seed", cfg.seed},         {"scheme", scheme_name(cfg.scheme)},
           {"config", o.config},   {"surviving_fraction", static_cast<double>(alive) / batch.paths.size()}};
  return kExitOk;
}

std::vector<Section> sections(const ProblemConfig& pc) {
  if (pc.problem.f.empty()) throw ConfigError(pc.path, "f", "a section f is required for this subcommand");
  return {pc.problem.f};
}

int cmd_estimate(const Opts& o, Report& r) {
  const ProblemConfig pc = load(o);
  const ProblemSpec& p = pc.problem;
  const Manifold& m = *p.manifold;
  const auto pts = evaluation_points(o, m);
  EstimateOptions eo;
  eo.force = o.force;
  const auto est = estimate_field(p, sections(pc), pts, o.t, sde(o), eo);
  const int dim = static_cast<int>(est.front().front().value.size());
  r.has_table = true;
  r.columns = coord_columns(m);
  for (int c = 0; c < dim; ++c)
    for (const char* k : {"re_", "im_", "stderr_"}) r.columns.push_back(k + std::to_string(c));
  for (const char* k : {"n_paths", "t", "surviving_fraction", "forced"}) r.columns.push_back(k);
  json arr = json::array();
  for (const auto& row_est : est) {
    const SemigroupEstimate& e = row_est.front();
    std::vector<std::string> row;
    json pt = json::array();
    for (double q : coords(m, e.x)) {
      row.push_back(format_double(q));
      pt.push_back(q);
    }
    json val = json::array();
    for (int c = 0; c < dim; ++c) {
      row.push_back(format_double(e.value[c].real()));
      row.push_back(format_double(e.value[c].imag()));
      row.push_back(format_double(e.std_error[c]));
      val.push_back({{"re", e.value[c].real()}, {"im", e.value[c].imag()}, {"stderr", e.std_error[c]}});
    }
    row.push_back(std::to_string(e.n_paths));
    row.push_back(format_double(e.t));
    row.push_back(format_double(e.surviving_fraction));
    row.push_back(bool_str(e.forced));
    r.rows.push_back(row);
    arr.push_back({{"point", pt}, {"value", val}, {"n_paths", e.n_paths}, {"surviving_fraction", e.surviving_fraction},
                   {"forced", e.forced}});
  }
  r.doc = {{"estimates", arr}, {"t", o.t}, {"dt", o.dt}, {"seed", o.seed}, {"config", o.config}};
  return kExitOk;
}

int cmd_oracle_compare(const Opts& o, Report& r) {
  const ProblemConfig pc = load(o);
  const ProblemSpec& p = pc.problem;
  const auto secs = sections(pc);
  if (p.fiber_dim() != 1) throw ModeError("oracle-compare handles scalar problems only");
  const GridPtr g = make_grid(p.manifold, o.oracle_n);
  if (o.points < 1 || o.points > g->N) throw ModeError("--points must lie in [1, oracle-n]");
  const OperatorMatrix H = build_operator(p, g);
  const GridFunction exact = semigroup_apply(H, sample(g, secs.front().front()), o.t);
  std::vector<int> nodes;
  for (int k = 0; k < o.points; ++k) {
    const int i1 = k * g->N / o.points;
    nodes.push_back(g->dims == 1 ? i1 : i1 * g->N + (3 * i1) % g->N);
  }
  std::vector<AVec> pts;
  for (int i : nodes) pts.push_back(g->points[i]);
  EstimateOptions eo;
  eo.force = o.force;
  const auto est = estimate_field(p, secs, pts, o.t, sde(o), eo);
  r.has_table = true;
  r.columns = coord_columns(*p.manifold);
  for (const char* k : {"mc_re", "mc_im", "stderr", "oracle_re", "oracle_im", "abs_diff", "tolerance", "pass"})
    r.columns.push_back(k);
  json arr = json::array();
  bool all = true;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const SemigroupEstimate& e = est[k].front();
    const std::complex<double> mc = e.value[0], ex = exact.values[nodes[k]];
    const double diff = std::abs(mc - ex);
    const double tol = std::max(3.0 * e.std_error[0], o.rel_tol * std::abs(ex));
    const bool pass = diff <= tol;
    all = all && pass;
    std::vector<std::string> row;
    json pt = json::array();
    for (double q : coords(*p.manifold, pts[k])) {
      row.push_back(format_double(q));
      pt.push_back(q);
    }
    for (double v : {mc.real(), mc.imag(), e.std_error[0], ex.real(), ex.imag(), diff, tol}) row.push_back(format_double(v));
    row.push_back(bool_str(pass));
    r.rows.push_back(row);
    arr.push_back({{"point", pt},       {"mc_re", mc.real()},    {"mc_im", mc.imag()}, {"stderr", e.std_error[0]},
                   {"oracle_re", ex.real()}, {"oracle_im", ex.imag()}, {"abs_diff", diff}, {"tolerance", tol},
                   {"pass", pass}});
  }
  r.doc = {{"points", arr},        {"all_pass", all},          {"t", o.t},          {"dt", o.dt},
           {"n_paths", o.paths},   {"oracle_n", o.oracle_n},   {"seed", o.seed},    {"rel_tol", o.rel_tol},
           {"config", o.config}};
  return all ? kExitOk : kExitCheckFailed;
}

json report_json(const InequalityReport& rep) {
  json j = {{"family", rep.family},
            {"p", rep.p},
            {"lambda", num(rep.lambda)},
            {"paper_constant", rep.paper_constant ? num(*rep.paper_constant) : json(nullptr)},
            {"empirical_constant", num(rep.empirical_constant)},
            {"worst_ratio", num(rep.worst_ratio)},
            {"pass", rep.pass},
            {"forced", rep.forced},
            {"suite", {{"kind", rep.suite.kind}, {"size", rep.suite.size}, {"seed", rep.suite.seed},
                       {"degree", rep.suite.degree}}}};
  if (rep.lambda_star) j["lambda_star"] = num(*rep.lambda_star);
  if (!rep.domination.empty()) {
    json d = json::array();
    for (const auto& [e, c] : rep.domination) d.push_back({{"eps", e}, {"C_eps", num(c)}});
    j["domination"] = d;
  }
  return j;
}

int cmd_inequalities(const Opts& o, Report& r) {
  const ProblemConfig pc = load(o);
  const GridPtr g = make_grid(pc.problem.manifold, o.oracle_n);
  const Suite suite = random_trig_suite(g, o.suite, o.seed, o.degree);
  std::vector<Family> fams;
  if (o.family == "all") fams = all_families();
  else fams = {parse_family(o.family)};
  FamilyOptions fo;
  fo.lambda = o.lambda;
  fo.force = o.force;
  json arr = json::array();
  r.has_table = true;
  r.columns = {"family", "p", "lambda", "paper_constant", "empirical_constant", "worst_ratio", "lambda_star", "pass"};
  bool all = true;
  for (Family f : fams) {
    const InequalityReport rep = check_inequality_family(f, pc.problem, g, suite, fo);
    all = all && rep.pass;
    arr.push_back(report_json(rep));
    r.rows.push_back({rep.family, format_double(rep.p), format_double(rep.lambda),
                      rep.paper_constant ? format_double(*rep.paper_constant) : "",
                      format_double(rep.empirical_constant), format_double(rep.worst_ratio),
                      rep.lambda_star ? format_double(*rep.lambda_star) : "", bool_str(rep.pass)});
  }
  r.doc = {{"reports", arr}, {"all_pass", all}, {"oracle_n", o.oracle_n}, {"config", o.config}};
  return all ? kExitOk : kExitCheckFailed;
}

int cmd_ibp(const Opts& o, Report& r) {
  const ProblemConfig pc = load(o);
  const GridPtr g = make_grid(pc.problem.manifold, o.oracle_n);
  if (o.pairs < 1) throw ModeError("--pairs must be positive");
  const Suite s = random_trig_suite(g, 2 * o.pairs, o.seed, std::min(g->N / 4, 8));
  constexpr double tol = 1e-8;
  r.has_table = true;
  r.columns = {"pair", "residual1", "residual2", "pass"};
  double w1 = 0.0, w2 = 0.0;
  json arr = json::array();
  for (int k = 0; k < o.pairs; ++k) {
    GridFunction u = s.members[2 * k], w = s.members[2 * k + 1];
    // complex test data so both real and imaginary parts are exercised
    w.values = w.values + std::complex<double>(0.0, 1.0) * s.members[(2 * k + 2) % s.members.size()].values;
    const IbpResidual res = check_ibp(pc.problem, g, u, w);
    w1 = std::max(w1, res.first);
    w2 = std::max(w2, res.second);
    const bool pass = res.first <= tol && res.second <= tol;
    r.rows.push_back({std::to_string(k), format_double(res.first), format_double(res.second), bool_str(pass)});
    arr.push_back({{"residual1", res.first}, {"residual2", res.second}, {"pass", pass}});
  }
  const bool all = w1 <= tol && w2 <= tol;
  r.doc = {{"pairs", arr}, {"max_residual1", w1}, {"max_residual2", w2}, {"tolerance", tol},
           {"all_pass", all}, {"config", o.config}};
  return all ? kExitOk : kExitCheckFailed;
}

int cmd_calculus(const Opts& o, Report& r) {
  std::vector<std::string> mans;
  if (o.manifold == "both") mans = {"circle", "torus2"};
  else mans = {o.manifold};
  std::vector<RuleId> rules;
  if (o.rule == "all") rules = all_rules();
  else rules = {parse_rule(o.rule)};
  std::vector<RuleResult> rows;
  for (const auto& mn : mans) {
    const ManifoldPtr m = make_manifold(mn);
    for (RuleId rule : rules) rows.push_back(verify_rule(rule, m, o.trials, o.seed, o.oracle_n));
  }
  bool all = true;
  json arr = json::array();
  r.has_table = true;
  r.columns = {"rule", "manifold", "trials", "max_residual", "pass"};
  for (const auto& x : rows) {
    all = all && x.pass;
    r.rows.push_back({rule_name(x.rule), x.manifold, std::to_string(x.trials), format_double(x.max_residual),
                      bool_str(x.pass)});
    arr.push_back({{"rule", rule_name(x.rule)}, {"manifold", x.manifold}, {"trials", x.trials},
                   {"max_residual", num(x.max_residual)}, {"pass", x.pass}});
  }
  r.doc = {{"rules", arr}, {"all_pass", all}, {"seed", o.seed}, {"grid_n", o.oracle_n}};
  return all ? kExitOk : kExitCheckFailed;
}

int cmd_sc_check(const Opts& o, Report& r) {
  const ProblemConfig pc = load(o);
  const auto pts = pc.problem.manifold->sample_points(pc.samples, o.seed);
  const double v = sc_diagnostic(pc.problem, pts, o.seed);
  r.doc = {{"bakry_lower_bound", num(v)}, {"ricci_lower", pc.problem.manifold->ricci_lower()},
           {"finite", std::isfinite(v)},   {"n_samples", pts.size()},  {"config", o.config}};
  r.has_table = true;
  r.columns = {"bakry_lower_bound", "ricci_lower", "n_samples"};
  r.rows.push_back({format_double(v), format_double(pc.problem.manifold->ricci_lower()), std::to_string(pts.size())});
  return std::isfinite(v) ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Generalized Ornstein-Uhlenbeck operators: Monte Carlo, spectral oracle and estimate checks", "oulab"};
  app.require_subcommand(1);
  Opts o;

  auto common = [&](CLI::App* s, bool config) {
    if (config) s->add_option("--config", o.config, "problem config (JSON)")->required();
    s->add_option("--output", o.output, "write the report to this file");
    s->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    s->add_option("--seed", o.seed, "random seed");
    s->add_flag("--no-timestamp", o.no_timestamp, "omit the timestamp from JSON output");
  };
  auto sde_opts = [&](CLI::App* s) {
    s->add_option("--dt", o.dt, "time step");
    s->add_option("--t", o.t, "final time");
    s->add_option("--paths", o.paths, "number of paths");
    s->add_option("--threads", o.threads, "worker threads (0: all cores)");
    s->add_option("--scheme", o.scheme, "heun_stratonovich or projected_euler");
    s->add_option("--x0", o.x0, "start point: angles, (polar,azimuth) or coordinates");
  };

  auto* a = app.add_subcommand("assumptions", "check the hypotheses on sampled points");
  common(a, true);
  a->add_option("--eps", o.eps, "eps for (A2); default eps0");
  a->add_option("--p", o.p, "override p");
  a->add_option("--samples", o.samples, "number of sample points");
  a->add_flag("--feynman-kac", o.fk, "check the Feynman-Kac hypotheses instead");

  auto* th = app.add_subcommand("thresholds", "eps0, lambda0, lambda1 and the explicit constants");
  common(th, true);
  th->add_option("--p", o.p, "override p");

  auto* sim = app.add_subcommand("simulate", "simulate diffusion paths");
  common(sim, true);
  sde_opts(sim);
  sim->add_option("--dump-paths", o.dump, "binary dump of every path");

  auto* est = app.add_subcommand("estimate", "Monte Carlo Feynman-Kac estimate of e^{-tH} f");
  common(est, true);
  sde_opts(est);
  est->add_option("--points", o.points, "number of evaluation points when --x0 is absent");
  est->add_flag("--force", o.force, "run even if the hypotheses fail");

  auto* oc = app.add_subcommand("oracle-compare", "Monte Carlo against the spectral semigroup");
  common(oc, true);
  sde_opts(oc);
  oc->add_option("--points", o.points, "number of grid points compared");
  oc->add_option("--oracle-n", o.oracle_n, "oracle grid size");
  oc->add_option("--rel-tol", o.rel_tol, "relative tolerance");
  oc->add_flag("--force", o.force, "run even if the hypotheses fail");

  auto* iq = app.add_subcommand("inequalities", "empirical check of the coercive-type estimates");
  common(iq, true);
  iq->add_option("--family", o.family, "family id or all");
  iq->add_option("--p", o.p, "override p");
  iq->add_option("--lambda", o.lambda, "lambda (default lambda1)");
  iq->add_option("--oracle-n", o.oracle_n, "grid size");
  iq->add_option("--suite-size", o.suite, "number of test functions");
  iq->add_option("--degree", o.degree, "trigonometric degree of the suite (default N/4)");
  iq->add_flag("--force", o.force, "run even if the hypotheses fail");

  auto* ib = app.add_subcommand("ibp", "integration by parts residuals");
  common(ib, true);
  ib->add_option("--p", o.p, "override p");
  ib->add_option("--oracle-n", o.oracle_n, "grid size");
  ib->add_option("--pairs", o.pairs, "number of random pairs");

  auto* ca = app.add_subcommand("calculus", "product and chain rule battery");
  common(ca, false);
  ca->add_option("--rule", o.rule, "rule id or all");
  ca->add_option("--manifold", o.manifold, "circle, torus2 or both")->check(CLI::IsMember({"circle", "torus2", "both"}));
  ca->add_option("--trials", o.trials, "trials per rule");
  ca->add_option("--oracle-n", o.oracle_n, "grid size");

  auto* sc = app.add_subcommand("sc-check", "Bakry-Emery lower bound Ric + Hess phi");
  common(sc, true);
  sc->add_option("--samples", o.samples, "number of sample points");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  Report r;
  try {
    int code;
    std::string fmt = "json";
    if (a->parsed()) code = cmd_assumptions(o, r);
    else if (th->parsed()) code = cmd_thresholds(o, r);
    else if (sim->parsed()) code = cmd_simulate(o, r), fmt = "csv";
    else if (est->parsed()) code = cmd_estimate(o, r), fmt = "csv";
    else if (oc->parsed()) code = cmd_oracle_compare(o, r), fmt = "csv";
    else if (iq->parsed()) code = cmd_inequalities(o, r);
    else if (ib->parsed()) code = cmd_ibp(o, r), fmt = "csv";
    else if (ca->parsed()) code = cmd_calculus(o, r), fmt = "csv";
    else code = cmd_sc_check(o, r);
    emit(o, r, fmt, out);
    if (code == kExitCheckFailed) err << "check failed\n";
    return code;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const HypothesisError& e) {
    err << "hypothesis check failed: " << e.what() << "\n";
    return kExitCheckFailed;
  } catch (const InfeasibleConstantsError& e) {
    err << "infeasible constants: " << e.what() << "\n";
    return kExitCheckFailed;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace oulab
