#include "oulab/stochastics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "oulab/errors.hpp"
#include "oulab/linalg.hpp"
#include "oulab/rng.hpp"

namespace oulab {

Scheme parse_scheme(const std::string& s) {
  if (s == "heun_stratonovich" || s == "heun") return Scheme::HeunStratonovich;
  if (s == "projected_euler" || s == "euler") return Scheme::ProjectedEuler;
  throw ModeError("unknown scheme '" + s + "'");
}

std::string scheme_name(Scheme s) {
  return s == Scheme::HeunStratonovich ? "heun_stratonovich" : "projected_euler";
}

int SdeConfig::steps() const {
  validate();
  if (t_final == 0.0) return 0;
  return static_cast<int>(std::ceil(t_final / dt * (1.0 - 1e-12)));
}

double SdeConfig::step() const {
  const int k = steps();
  return k == 0 ? dt : t_final / k;
}

void SdeConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw StepSizeError("dt must be positive");
  if (!(t_final >= 0.0) || !std::isfinite(t_final)) throw StepSizeError("t must be nonnegative");
  if (t_final / dt > 1e8) throw StepSizeError("t / dt exceeds 1e8 steps");
  if (n_paths < 1) throw ModeError("at least one path is required");
}

// ---------------------------------------------------------------------------

PathEngine::PathEngine(const ProblemSpec& prob, const SdeConfig& cfg)
    : prob_(&prob), man_(prob.manifold.get()), cfg_(cfg), steps_(cfg.steps()), h_(cfg.step()) {
  sqrt2h_ = std::sqrt(2.0 * h_);
  l_ = man_->ambient_dim();
  n_ = man_->dim();
  zero_drift_ = prob.phi.is_constant() && prob.X.is_zero();
  compact_ = man_->is_compact();
  flat_ = man_->flat_chart();
  x_zero_ = prob.X.is_zero();
  phi_const_ = prob.phi.is_constant();
  raw_inputs_ = prob.phi.needs_raw_values();
  for (const auto& c : prob.X.components) raw_inputs_ = raw_inputs_ || c.needs_raw_values();
  if (!prob.V.is_matrix) {
    raw_inputs_ = raw_inputs_ || prob.V.scalar.needs_raw_values();
    v_const_ = prob.V.scalar.is_constant();
    if (v_const_) v_value_ = prob.V.scalar.eval(VarInputs{});
  }
  if (prob.V.is_matrix) {
    if (prob.connection.kind == ConnectionSpec::Kind::Tangent)
      throw ModeError("matrix potentials need a trivial bundle connection");
    if (prob.V.rank != prob.connection.rank) throw ModeError("potential rank differs from the bundle rank");
  }
}

bool PathEngine::trivial_transport() const {
  return prob_->connection.kind == ConnectionSpec::Kind::Trivial && prob_->connection.flat();
}

void PathEngine::drift(const double* y, double* z) const {
  for (int i = 0; i < l_; ++i) z[i] = 0.0;
  if (zero_drift_) return;
  double c[kMaxVars] = {};
  if (!prob_->X.is_zero()) man_->vector_field(y, prob_->X.components, c, nullptr);
  if (!prob_->phi.is_constant()) {
    const LocalJet j = man_->jet(y, prob_->phi, 1);
    for (int a = 0; a < n_; ++a) c[a] -= j.grad[a];
  }
  double e[kMaxVars * kMaxVars];
  man_->frame_raw(y, e);
  for (int a = 0; a < n_; ++a)
    for (int i = 0; i < l_; ++i) z[i] += c[a] * e[a * l_ + i];
}

void PathEngine::drift_potential(const double* y, double* z, double* v) const {
  if (!flat_) {
    drift(y, z);
    if (v) *v = potential_scalar(y);
    return;
  }
  if (zero_drift_ && (!v || v_const_)) {
    for (int i = 0; i < l_; ++i) z[i] = 0.0;
    if (v) *v = v_value_;
    return;
  }
  // flat charts: one input fill serves phi, X and V
  VarInputs in;
  man_->fill_inputs(y, in, raw_inputs_);
  if (v) *v = prob_->V.scalar.eval(in);
  for (int i = 0; i < l_; ++i) z[i] = 0.0;
  if (zero_drift_) return;
  double c[kMaxVars] = {};
  if (!x_zero_)
    for (int a = 0; a < n_; ++a) c[a] = prob_->X.components[a].eval(in);
  if (!phi_const_) {
    const Jet1 g = prob_->phi.eval1(in);
    for (int a = 0; a < n_; ++a) c[a] -= g.d[a];
  }
  double e[kMaxVars * kMaxVars];
  man_->frame_raw(y, e);
  for (int a = 0; a < n_; ++a)
    for (int i = 0; i < l_; ++i) z[i] += c[a] * e[a * l_ + i];
}

void PathEngine::increment(std::uint64_t seed, std::uint64_t path, int k, double* dw) const {
  const NormalStream ns(seed, path);
  const int blocks = (l_ + 1) / 2;
  for (int j = 0; j < blocks; ++j) {
    double z0, z1;
    ns.pair(static_cast<std::uint64_t>(k) * blocks + j, z0, z1);
    dw[2 * j] = sqrt2h_ * z0;
    if (2 * j + 1 < l_) dw[2 * j + 1] = sqrt2h_ * z1;
  }
}

namespace {
bool escaped(const double* y, int l) {
  double s = 0.0;
  for (int i = 0; i < l; ++i) s += y[i] * y[i];
  return !(s <= kBlowUpRadius * kBlowUpRadius);
}
}  // namespace

bool PathEngine::step(const double* y, const double* dw, double* out) const {
  double z0[kMaxVars];
  drift_potential(y, z0, nullptr);
  return step_from(y, z0, dw, out);
}

bool PathEngine::step_from(const double* y, const double* z0, const double* dw, double* out) const {
  double a[kMaxVars], ys[kMaxVars], z1[kMaxVars];
  const int r = predict(y, z0, dw, a, ys);
  if (r == 0) return false;
  if (r == 1) {
    for (int i = 0; i < l_; ++i) out[i] = ys[i];
    return true;
  }
  drift_potential(ys, z1, nullptr);
  return correct(y, z0, dw, a, ys, z1, out);
}

int PathEngine::predict(const double* y, const double* z0, const double* dw, double* a, double* ys) const {
  double pred[kMaxVars];
  man_->project_raw(y, dw, a);
  for (int i = 0; i < l_; ++i) pred[i] = y[i] + a[i] + z0[i] * h_;
  if (!compact_ && escaped(pred, l_)) return 0;
  man_->retract_raw(pred, ys);
  return cfg_.scheme == Scheme::ProjectedEuler ? 1 : 2;
}

bool PathEngine::correct(const double* y, const double* z0, const double* dw, const double* a, const double* ys,
                         const double* z1, double* out) const {
  double a2[kMaxVars], corr[kMaxVars];
  man_->project_raw(ys, dw, a2);
  for (int i = 0; i < l_; ++i) corr[i] = y[i] + 0.5 * (a[i] + a2[i]) + 0.5 * (z0[i] + z1[i]) * h_;
  if (!compact_ && escaped(corr, l_)) return false;
  man_->retract_raw(corr, out);
  return true;
}

template <int L, int N>
void PathEngine::drift_potential_batch(const double* y, int count, double* z, double* v, BatchScratch& w) const {
  const int l = L > 0 ? L : l_;
  const int n = N > 0 ? N : n_;
  if (!flat_ || (zero_drift_ && (!v || v_const_))) {
    for (int i = 0; i < count; ++i) drift_potential(y + i * l, z + i * l, v ? v + i : nullptr);
    return;
  }
  man_->fill_inputs_batch(y, w.in, raw_inputs_, count);
  auto eval = [&](const Expr& e, double* out) {
    w.dtmp.resize(static_cast<std::size_t>(e.max_stack()) * count);
    e.run_batch<double>(w.in, out, w.dtmp.data());
  };
  if (v) eval(prob_->V.scalar, v);
  if (zero_drift_) {
    for (int i = 0; i < count * l; ++i) z[i] = 0.0;
    return;
  }
  w.c.assign(static_cast<std::size_t>(count) * n, 0.0);
  if (!x_zero_) {
    w.d.resize(count);
    for (int a = 0; a < n; ++a) {
      eval(prob_->X.components[a], w.d.data());
      for (int i = 0; i < count; ++i) w.c[i * n + a] = w.d[i];
    }
  }
  if (!phi_const_) {
    w.j.resize(count);
    w.jtmp.resize(static_cast<std::size_t>(prob_->phi.max_stack()) * count);
    prob_->phi.run_batch<Jet1>(w.in, w.j.data(), w.jtmp.data());
    for (int i = 0; i < count; ++i)
      for (int a = 0; a < n; ++a) w.c[i * n + a] -= w.j[i].d[a];
  }
  w.e.resize(static_cast<std::size_t>(count) * l * n);
  man_->frame_batch(y, w.e.data(), count);
  for (int i = 0; i < count; ++i) {
    const double* e = w.e.data() + static_cast<std::size_t>(i) * l * n;
    const double* c = w.c.data() + i * n;
    double acc[kMaxVars] = {};
    for (int a = 0; a < n; ++a)
      for (int r = 0; r < l; ++r) acc[r] += c[a] * e[a * l + r];
    for (int r = 0; r < l; ++r) z[i * l + r] = acc[r];
  }
}

double PathEngine::potential_scalar(const double* y) const {
  const Expr& v = prob_->V.scalar;
  if (v.is_constant()) return v.eval(VarInputs{});
  VarInputs in;
  man_->fill_inputs(y, in, v.needs_raw_values());
  return v.eval(in);
}

void PathEngine::advance_trivial(const double* y0, const double* y1, Eigen::MatrixXcd& t) const {
  if (trivial_transport()) return;
  AVec sum(l_), mid(l_), dy(l_);
  for (int i = 0; i < l_; ++i) {
    sum[i] = 0.5 * (y0[i] + y1[i]);
    dy[i] = y1[i] - y0[i];
  }
  man_->retract_raw(sum.data(), mid.data());
  const Eigen::MatrixXcd w = connection_form(*prob_, mid, dy);
  if (w.rows() == 1) {
    t(0, 0) *= std::exp(std::complex<double>(0.0, -w(0, 0).imag()));
  } else {
    t = expm_antihermitian(-w) * t;
  }
}

void PathEngine::advance_tangent(const double* y1, Eigen::MatrixXd& e) const {
  Eigen::MatrixXd b(l_, n_);
  for (int a = 0; a < n_; ++a) man_->project_raw(y1, e.col(a).data(), b.col(a).data());
  e = polar_factor(b);
}

namespace {

Eigen::MatrixXcd frame_transport(const Manifold& m, const double* y, const Eigen::MatrixXd& e) {
  const int l = m.ambient_dim(), n = m.dim();
  Eigen::MatrixXd f(l, n);
  m.frame_raw(y, f.data());
  return (f.transpose() * e).cast<std::complex<double>>();
}

}  // namespace

PathEngine::Final PathEngine::run_path(const AVec& x0, std::uint64_t seed, std::uint64_t path,
                                       PathRecord* record) const {
  const bool tangent = prob_->connection.kind == ConnectionSpec::Kind::Tangent;
  const int m = prob_->fiber_dim();
  Final fin;
  double y[kMaxVars], yn[kMaxVars], dw[kMaxVars];
  for (int i = 0; i < l_; ++i) y[i] = x0[i];
  fin.transport = Eigen::MatrixXcd::Identity(tangent ? 1 : m, tangent ? 1 : m);
  if (tangent) {
    fin.frame.resize(l_, n_);
    man_->frame_raw(y, fin.frame.data());
  }
  const bool scalar_v = scalar_potential();
  const bool zero_v = scalar_v && prob_->V.scalar.is_zero();
  if (!scalar_v) fin.potential = Eigen::MatrixXcd::Identity(m, m);

  auto potential_now = [&]() -> Eigen::MatrixXcd {
    if (scalar_v) return Eigen::MatrixXcd::Identity(m, m) * std::exp(-h_ * fin.potential_sum);
    return fin.potential;
  };
  auto push = [&]() {
    if (!record) return;
    AVec p(l_);
    for (int i = 0; i < l_; ++i) p[i] = y[i];
    record->positions.push_back(p);
    record->transport.push_back(tangent ? frame_transport(*man_, y, fin.frame) : fin.transport);
    record->potential.push_back(potential_now());
  };
  push();

  for (int k = 0; k < steps_; ++k) {
    increment(seed, path, k, dw);
    double z0[kMaxVars];
    if (scalar_v) {
      double v = 0.0;
      drift_potential(y, z0, zero_v ? nullptr : &v);
      if (!zero_v) fin.potential_sum += v;
    } else {
      drift_potential(y, z0, nullptr);
      AVec p(l_);
      for (int i = 0; i < l_; ++i) p[i] = y[i];
      const Eigen::MatrixXcd v = potential_matrix(*prob_, p);
      const Eigen::MatrixXcd w = fin.transport.adjoint() * v * fin.transport;
      fin.potential = fin.potential * expm_hermitian((w + w.adjoint()) * 0.5, -h_);
    }
    if (!step_from(y, z0, dw, yn)) {
      fin.alive = false;
      fin.exit_time = (k + 1) * h_;
      break;
    }
    if (tangent) advance_tangent(yn, fin.frame);
    else advance_trivial(y, yn, fin.transport);
    for (int i = 0; i < l_; ++i) y[i] = yn[i];
    push();
  }
  if (record) {
    record->alive = fin.alive;
    record->exit_time = fin.exit_time;
  }
  fin.y.resize(l_);
  for (int i = 0; i < l_; ++i) fin.y[i] = y[i];
  if (scalar_v) fin.potential = Eigen::MatrixXcd::Identity(m, m) * std::exp(-h_ * fin.potential_sum);
  return fin;
}

void PathEngine::run_block(const AVec& x0, std::uint64_t seed, std::uint64_t first, int count, Final* out) const {
  if (prob_->connection.kind == ConnectionSpec::Kind::Tangent || !scalar_potential()) {
    for (int i = 0; i < count; ++i) out[i] = run_path(x0, seed, first + i, nullptr);
    return;
  }
  switch (l_ * 8 + n_) {
    case 1 * 8 + 1: return run_block_impl<1, 1>(x0, seed, first, count, out);
    case 2 * 8 + 1: return run_block_impl<2, 1>(x0, seed, first, count, out);
    case 3 * 8 + 2: return run_block_impl<3, 2>(x0, seed, first, count, out);
    case 4 * 8 + 2: return run_block_impl<4, 2>(x0, seed, first, count, out);
    default: return run_block_impl<0, 0>(x0, seed, first, count, out);
  }
}

template <int L, int N>
void PathEngine::run_block_impl(const AVec& x0, std::uint64_t seed, std::uint64_t first, int count, Final* out) const {
  const int l = L > 0 ? L : l_;
  const int m = prob_->fiber_dim();
  const bool zero_v = prob_->V.scalar.is_zero();
  const bool euler = cfg_.scheme == Scheme::ProjectedEuler;
  const bool moving_frame = !trivial_transport();
  const std::size_t len = static_cast<std::size_t>(count) * l;
  std::vector<double> y(len), ys(len), yn(len), pred(len), dw(len), a(len), a2(len), z0(len), z1(len);
  std::vector<double> v(count), vsum(count, 0.0);
  std::vector<int> lane(count);
  std::vector<std::uint64_t> path_id(count);
  std::vector<double> g0(count), g1(count);
  std::vector<char> dead(count, 0);
  for (int i = 0; i < count; ++i) {
    lane[i] = i;
    path_id[i] = first + i;
    for (int r = 0; r < l; ++r) y[i * l + r] = x0[r];
    out[i] = Final{};
    out[i].transport = Eigen::MatrixXcd::Identity(m, m);
  }
  auto finish = [&](int j) {
    Final& f = out[lane[j]];
    f.y.resize(l);
    for (int r = 0; r < l; ++r) f.y[r] = y[static_cast<std::size_t>(j) * l + r];
    f.potential_sum = vsum[j];
    f.potential = Eigen::MatrixXcd::Identity(m, m) * std::exp(-h_ * vsum[j]);
  };

  BatchScratch w;
  int live = count;
  for (int k = 0; k < steps_ && live > 0; ++k) {
    {
      const int blocks = (l + 1) / 2;
      for (int b = 0; b < blocks; ++b) {
        NormalStream::pairs(seed, static_cast<std::uint64_t>(k) * blocks + b, path_id.data(), live, g0.data(),
                            g1.data());
        for (int j = 0; j < live; ++j) {
          dw[j * l + 2 * b] = sqrt2h_ * g0[j];
          if (2 * b + 1 < l) dw[j * l + 2 * b + 1] = sqrt2h_ * g1[j];
        }
      }
    }
    drift_potential_batch<L, N>(y.data(), live, z0.data(), zero_v ? nullptr : v.data(), w);
    if (!zero_v)
      for (int j = 0; j < live; ++j) vsum[j] += v[j];
    man_->project_batch(y.data(), dw.data(), a.data(), live);
    for (int j = 0; j < live; ++j) {
      double* p = pred.data() + j * l;
      const double* yj = y.data() + j * l;
      for (int r = 0; r < l; ++r) p[r] = yj[r] + a[j * l + r] + z0[j * l + r] * h_;
      dead[j] = !compact_ && escaped(p, l);
      if (dead[j])
        for (int r = 0; r < l; ++r) p[r] = yj[r];
    }
    man_->retract_batch(pred.data(), ys.data(), live);
    if (euler) {
      std::copy(ys.begin(), ys.begin() + static_cast<std::ptrdiff_t>(live) * l, yn.begin());
    } else {
      man_->project_batch(ys.data(), dw.data(), a2.data(), live);
      drift_potential_batch<L, N>(ys.data(), live, z1.data(), nullptr, w);
      for (int j = 0; j < live; ++j) {
        double* p = pred.data() + j * l;
        const double* yj = y.data() + j * l;
        const std::size_t o = static_cast<std::size_t>(j) * l;
        for (int r = 0; r < l; ++r) p[r] = yj[r] + 0.5 * (a[o + r] + a2[o + r]) + 0.5 * (z0[o + r] + z1[o + r]) * h_;
        if (!dead[j] && !compact_ && escaped(p, l)) dead[j] = 1;
        if (dead[j])
          for (int r = 0; r < l; ++r) p[r] = yj[r];
      }
      man_->retract_batch(pred.data(), yn.data(), live);
    }
    int kept = 0;
    for (int j = 0; j < live; ++j) {
      const std::size_t o = static_cast<std::size_t>(j) * l;
      if (dead[j]) {
        out[lane[j]].alive = false;
        out[lane[j]].exit_time = (k + 1) * h_;
        finish(j);
        continue;
      }
      if (moving_frame) advance_trivial(y.data() + o, yn.data() + o, out[lane[j]].transport);
      const std::size_t d = static_cast<std::size_t>(kept) * l;
      for (int r = 0; r < l; ++r) y[d + r] = yn[o + r];
      vsum[kept] = vsum[j];
      lane[kept] = lane[j];
      path_id[kept] = path_id[j];
      ++kept;
    }
    live = kept;
  }
  for (int j = 0; j < live; ++j) finish(j);
}

// ---------------------------------------------------------------------------

void parallel_for(std::int64_t n, int threads, const std::function<void(std::int64_t)>& body) {
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  constexpr std::int64_t kChunk = 64;
  const std::int64_t chunks = (n + kChunk - 1) / kChunk;
  if (threads == 1 || chunks <= 1) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      const std::int64_t c = next.fetch_add(1);
      if (c >= chunks) return;
      try {
        const std::int64_t hi = std::min(n, (c + 1) * kChunk);
        for (std::int64_t i = c * kChunk; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!err) err = std::current_exception();
        next.store(chunks);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int nt = static_cast<int>(std::min<std::int64_t>(threads, chunks));
  for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

PathBatch simulate_paths(const ProblemSpec& prob, const AVec& x0, const SdeConfig& cfg) {
  const Manifold& m = *prob.manifold;
  if (!m.on_manifold(x0)) throw PointOffManifoldError("starting point is not on " + m.name());
  const PathEngine eng(prob, cfg);
  PathBatch batch;
  batch.ambient_dim = m.ambient_dim();
  batch.steps = eng.steps();
  batch.dt = eng.h();
  batch.paths.resize(static_cast<std::size_t>(cfg.n_paths));
  parallel_for(cfg.n_paths, cfg.threads, [&](std::int64_t i) {
    PathRecord rec;
    eng.run_path(x0, cfg.seed, static_cast<std::uint64_t>(i), &rec);
    rec.transport.clear();
    rec.potential.clear();
    batch.paths[static_cast<std::size_t>(i)] = std::move(rec);
  });
  return batch;
}

namespace {
SdeConfig batch_config(const PathBatch& b) {
  SdeConfig c;
  c.dt = b.dt;
  c.t_final = b.dt * b.steps;
  return c;
}
}  // namespace

void transport_path(const ProblemSpec& prob, PathBatch& batch) {
  const PathEngine eng(prob, batch_config(batch));
  const Manifold& m = *prob.manifold;
  const bool tangent = prob.connection.kind == ConnectionSpec::Kind::Tangent;
  for (auto& rec : batch.paths) {
    rec.transport.clear();
    if (rec.positions.empty()) continue;
    if (tangent) {
      Eigen::MatrixXd e(m.ambient_dim(), m.dim());
      m.frame_raw(rec.positions[0].data(), e.data());
      rec.transport.push_back(frame_transport(m, rec.positions[0].data(), e));
      for (std::size_t k = 1; k < rec.positions.size(); ++k) {
        eng.advance_tangent(rec.positions[k].data(), e);
        rec.transport.push_back(frame_transport(m, rec.positions[k].data(), e));
      }
    } else {
      Eigen::MatrixXcd t = Eigen::MatrixXcd::Identity(prob.fiber_dim(), prob.fiber_dim());
      rec.transport.push_back(t);
      for (std::size_t k = 1; k < rec.positions.size(); ++k) {
        eng.advance_trivial(rec.positions[k - 1].data(), rec.positions[k].data(), t);
        rec.transport.push_back(t);
      }
    }
  }
}

void potential_path(const ProblemSpec& prob, PathBatch& batch) {
  const PathEngine eng(prob, batch_config(batch));
  const int m = prob.fiber_dim();
  const double h = eng.h();
  const bool tangent = prob.connection.kind == ConnectionSpec::Kind::Tangent;
  for (auto& rec : batch.paths) {
    rec.potential.clear();
    if (rec.positions.empty()) continue;
    const std::size_t n = rec.positions.size();
    // A path that exits still pays the potential of its last recorded step.
    const std::size_t nsteps = rec.alive ? n - 1 : n;
    if (eng.scalar_potential()) {
      double sum = 0.0;
      rec.potential.push_back(Eigen::MatrixXcd::Identity(m, m) * std::exp(-h * sum));
      for (std::size_t k = 0; k < nsteps; ++k) {
        if (!prob.V.scalar.is_zero()) sum += eng.potential_scalar(rec.positions[k].data());
        if (k + 1 < n) rec.potential.push_back(Eigen::MatrixXcd::Identity(m, m) * std::exp(-h * sum));
      }
    } else {
      if (tangent || rec.transport.size() != n) throw ModeError("transport must be filled before the potential");
      Eigen::MatrixXcd v = Eigen::MatrixXcd::Identity(m, m);
      rec.potential.push_back(v);
      for (std::size_t k = 0; k + 1 < n; ++k) {
        const Eigen::MatrixXcd vk = potential_matrix(prob, rec.positions[k]);
        const Eigen::MatrixXcd w = rec.transport[k].adjoint() * vk * rec.transport[k];
        v = v * expm_hermitian((w + w.adjoint()) * 0.5, -h);
        rec.potential.push_back(v);
      }
    }
  }
}

std::vector<Eigen::MatrixXcd> transport_with_form(const Manifold& m, const std::vector<AVec>& path, int rank,
                                                  const ConnectionFormFn& omega) {
  std::vector<Eigen::MatrixXcd> out;
  Eigen::MatrixXcd t = Eigen::MatrixXcd::Identity(rank, rank);
  out.push_back(t);
  for (std::size_t k = 1; k < path.size(); ++k) {
    const AVec mid = m.retract(0.5 * (path[k - 1] + path[k]));
    const AVec dy = path[k] - path[k - 1];
    t = expm_antihermitian(-omega(mid, dy)) * t;
    out.push_back(t);
  }
  return out;
}

Eigen::MatrixXd transport_tangent_frame(const Manifold& m, const std::vector<AVec>& path, const Eigen::MatrixXd& e0) {
  Eigen::MatrixXd e = e0;
  for (std::size_t k = 1; k < path.size(); ++k) {
    Eigen::MatrixXd b(e.rows(), e.cols());
    for (Eigen::Index a = 0; a < e.cols(); ++a) m.project_raw(path[k].data(), e.col(a).data(), b.col(a).data());
    e = polar_factor(b);
  }
  return e;
}

void write_path_dump(const std::string& file, const PathBatch& batch) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw Error("cannot open path dump file '" + file + "'");
  for (const auto& rec : batch.paths) {
    const std::uint64_t count = rec.positions.size();
    os.write(reinterpret_cast<const char*>(&count), sizeof count);
    for (const auto& p : rec.positions)
      os.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(sizeof(double) * p.size()));
  }
}

}  // namespace oulab
