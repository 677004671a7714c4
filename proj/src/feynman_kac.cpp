#include "oulab/feynman_kac.hpp"

#include <algorithm>
#include <cmath>

#include "oulab/errors.hpp"
#include "oulab/format.hpp"
#include "oulab/rng.hpp"

namespace oulab {

bool check_feynman_kac_mode(const ProblemSpec& prob, const EstimateOptions& opt) {
  const auto samples = prob.manifold->sample_points(opt.assumption_samples, 0x9C3D);
  bool nonneg;
  if (prob.V.nonnegative.has_value()) nonneg = *prob.V.nonnegative;
  else nonneg = min_potential_eigenvalue(prob, samples) >= -1e-12;
  if (!nonneg) throw ModeError("Feynman-Kac mode requires a potential flagged nonnegative (V >= 0)");

  AssumptionOptions ao;
  ao.feynman_kac = true;
  const AssumptionReport rep = check_assumptions(prob, samples, 1.0, ao);
  std::string failed;
  for (const auto& c : rep.conditions) {
    if (c.id == "F1") continue;  // governed by the flag above
    if (!c.pass) failed += (failed.empty() ? "" : ", ") + c.id;
  }
  if (failed.empty()) return false;
  if (!opt.force) throw HypothesisError("Feynman-Kac hypotheses fail (" + failed + "); rerun with --force to waive");
  return true;
}

namespace {

void validate_sections(const ProblemSpec& prob, const std::vector<Section>& f) {
  const bool tangent = prob.connection.kind == ConnectionSpec::Kind::Tangent;
  const std::size_t want = tangent ? static_cast<std::size_t>(prob.vars().count)
                                   : static_cast<std::size_t>(prob.fiber_dim());
  if (f.empty()) throw ModeError("no section f given");
  for (const auto& s : f)
    if (s.size() != want) throw ModeError("section needs " + std::to_string(want) + " components");
}

}  // namespace

std::vector<SemigroupEstimate> estimate_semigroup(const ProblemSpec& prob, const std::vector<Section>& f,
                                                  const AVec& x, double t, const SdeConfig& cfg_in,
                                                  const EstimateOptions& opt) {
  const Manifold& man = *prob.manifold;
  if (!man.on_manifold(x)) throw PointOffManifoldError("evaluation point is not on " + man.name());
  validate_sections(prob, f);
  if (cfg_in.n_paths < 2) throw ModeError("an estimate needs at least two paths");
  const bool forced = check_feynman_kac_mode(prob, opt);

  SdeConfig cfg = cfg_in;
  cfg.t_final = t;
  const PathEngine eng(prob, cfg);
  const bool tangent = prob.connection.kind == ConnectionSpec::Kind::Tangent;
  const int dim = prob.fiber_dim();
  const std::size_t ns = f.size();
  const std::size_t width = ns * static_cast<std::size_t>(dim);
  const std::int64_t np = cfg.n_paths;

  std::vector<std::complex<double>> vals(static_cast<std::size_t>(np) * width);
  std::vector<char> alive(static_cast<std::size_t>(np), 0);

  constexpr std::int64_t kBlock = 64;
  parallel_for((np + kBlock - 1) / kBlock, cfg.threads, [&](std::int64_t b) {
    const std::int64_t first = b * kBlock;
    const int count = static_cast<int>(std::min(kBlock, np - first));
    std::vector<PathEngine::Final> fins(count);
    eng.run_block(x, cfg.seed, static_cast<std::uint64_t>(first), count, fins.data());
    for (int j = 0; j < count; ++j) {
      const auto& fin = fins[j];
      const std::size_t i = static_cast<std::size_t>(first + j);
      std::complex<double>* out = vals.data() + i * width;
      if (!fin.alive) continue;  // killed paths contribute zero
      alive[i] = 1;
      for (std::size_t s = 0; s < ns; ++s) {
        const Eigen::VectorXcd fy = section_value(prob, f[s], fin.y);
        Eigen::VectorXcd v;
        if (tangent) v = fin.potential * (fin.frame.transpose().cast<std::complex<double>>() * fy);
        else v = fin.potential * (fin.transport.adjoint() * fy);
        for (int c = 0; c < dim; ++c) out[s * dim + c] = v[c];
      }
    }
  });

  std::int64_t survivors = 0;
  for (char a : alive) survivors += a;

  std::vector<SemigroupEstimate> res(ns);
  for (std::size_t s = 0; s < ns; ++s) {
    SemigroupEstimate& e = res[s];
    e.value = Eigen::VectorXcd::Zero(dim);
    e.std_error = Eigen::VectorXd::Zero(dim);
    e.n_paths = np;
    e.t = t;
    e.x = x;
    e.surviving_fraction = static_cast<double>(survivors) / static_cast<double>(np);
    e.forced = forced;
    for (int c = 0; c < dim; ++c) {
      // shifted by the first sample so identical samples average exactly
      const std::complex<double> pivot = vals[s * dim + c];
      std::complex<double> sum = 0.0;
      for (std::int64_t i = 0; i < np; ++i) sum += vals[static_cast<std::size_t>(i) * width + s * dim + c] - pivot;
      const std::complex<double> mean = pivot + sum / static_cast<double>(np);
      double ss = 0.0;
      for (std::int64_t i = 0; i < np; ++i) ss += std::norm(vals[static_cast<std::size_t>(i) * width + s * dim + c] - mean);
      e.value[c] = mean;
      e.std_error[c] = std::sqrt(ss / static_cast<double>(np - 1) / static_cast<double>(np));
    }
  }
  return res;
}

SemigroupEstimate estimate_semigroup(const ProblemSpec& prob, const Section& f, const AVec& x, double t,
                                     const SdeConfig& cfg, const EstimateOptions& opt) {
  return estimate_semigroup(prob, std::vector<Section>{f}, x, t, cfg, opt).front();
}

std::vector<std::vector<SemigroupEstimate>> estimate_field(const ProblemSpec& prob, const std::vector<Section>& f,
                                                           const std::vector<AVec>& grid, double t,
                                                           const SdeConfig& cfg, const EstimateOptions& opt) {
  std::vector<std::vector<SemigroupEstimate>> out;
  out.reserve(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    SdeConfig c = cfg;
    c.seed = derive_seed(cfg.seed, g);
    out.push_back(estimate_semigroup(prob, f, grid[g], t, c, opt));
  }
  return out;
}

namespace {

std::vector<double> chart_coords(const Manifold& m, const AVec& x) {
  if (m.name() == "circle" || m.name() == "torus2") {
    const ChartPoint c = m.chart(x);
    return std::vector<double>(c.q.data(), c.q.data() + c.q.size());
  }
  return std::vector<double>(x.data(), x.data() + x.size());
}

}  // namespace

void write_estimates_csv(std::ostream& os, const Manifold& m, const std::vector<SemigroupEstimate>& est) {
  const VarSpace& vs = m.vars();
  const int dim = est.empty() ? 1 : static_cast<int>(est.front().value.size());
  for (int i = 0; i < vs.count; ++i) os << csv_field(vs.canonical(i)) << ',';
  for (int c = 0; c < dim; ++c) os << "re_" << c << ",im_" << c << ",stderr_" << c << ',';
  os << "n_paths,t\n";
  for (const auto& e : est) {
    for (double q : chart_coords(m, e.x)) os << format_double(q) << ',';
    for (int c = 0; c < dim; ++c)
      os << format_double(e.value[c].real()) << ',' << format_double(e.value[c].imag()) << ','
         << format_double(e.std_error[c]) << ',';
    os << e.n_paths << ',' << format_double(e.t) << '\n';
  }
}

}  // namespace oulab
