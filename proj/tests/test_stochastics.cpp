#include <doctest.h>

#include <cmath>
#include <complex>

#include "helpers.hpp"
#include "oulab/errors.hpp"
#include "oulab/stochastics.hpp"

using namespace oulab;
using testutil::kPi;
using testutil::problem;
using testutil::vec;

namespace {

struct Moments {
  double mean = 0, se = 0;
};

template <class F>
Moments final_moments(const ProblemSpec& p, const AVec& x0, const SdeConfig& cfg, F f) {
  const PathEngine eng(p, cfg);
  std::vector<PathEngine::Final> fin(static_cast<std::size_t>(cfg.n_paths));
  for (std::int64_t first = 0; first < cfg.n_paths; first += 64) {
    const int cnt = static_cast<int>(std::min<std::int64_t>(64, cfg.n_paths - first));
    eng.run_block(x0, cfg.seed, static_cast<std::uint64_t>(first), cnt, &fin[static_cast<std::size_t>(first)]);
  }
  double s = 0, s2 = 0;
  for (const auto& r : fin) {
    const double v = f(r.y);
    s += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(cfg.n_paths);
  Moments m;
  m.mean = s / n;
  m.se = std::sqrt(std::max(0.0, s2 / n - m.mean * m.mean) / (n - 1));
  return m;
}

// Gauss-Hermite rule for the weight exp(-x^2) by Golub-Welsch.
void gauss_hermite(int n, std::vector<double>& x, std::vector<double>& w) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(k / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    x[i] = es.eigenvalues()[i];
    w[i] = std::sqrt(kPi) * es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
  }
}

bool same(const PathEngine::Final& a, const PathEngine::Final& b) {
  if (a.alive != b.alive || a.y.size() != b.y.size()) return false;
  for (Eigen::Index i = 0; i < a.y.size(); ++i)
    if (a.y[i] != b.y[i]) return false;
  if (a.potential_sum != b.potential_sum) return false;
  if (!(a.exit_time == b.exit_time)) return false;
  if (a.transport.size() != b.transport.size() || a.potential.size() != b.potential.size()) return false;
  for (Eigen::Index i = 0; i < a.transport.size(); ++i)
    if (a.transport(i) != b.transport(i)) return false;
  for (Eigen::Index i = 0; i < a.potential.size(); ++i)
    if (a.potential(i) != b.potential(i)) return false;
  return true;
}

const char* kMatrixV = R"J({"manifold": "circle", "V": [["1", "cos(theta)"], ["cos(theta)", "2"]],
                           "connection": {"type": "trivial", "rank": 2}})J";

}  // namespace

TEST_SUITE("stochastics") {

TEST_CASE("config validation and step count") {
  SdeConfig c;
  c.dt = 0.3;
  c.t_final = 1.0;
  CHECK(c.steps() == 4);
  CHECK(c.step() == 0.25);
  c.dt = 0.0;
  CHECK_THROWS_AS(c.validate(), StepSizeError);
  c.dt = 1e-9;
  CHECK_THROWS_AS(c.validate(), StepSizeError);
  c.dt = 0.1;
  c.t_final = -1.0;
  CHECK_THROWS_AS(c.validate(), StepSizeError);
  c.t_final = 0.0;
  CHECK(c.steps() == 0);
  CHECK(parse_scheme("projected_euler") == Scheme::ProjectedEuler);
  CHECK(scheme_name(Scheme::HeunStratonovich) == "heun_stratonovich");
}

TEST_CASE("factor-two Brownian variance on the line") {
  ProblemSpec p = make_scalar_problem("euclidean:1", "0", {}, "0", "0");
  SdeConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_final = 1.0;
  cfg.n_paths = 100000;
  cfg.seed = 5;
  const double x0 = 0.7;
  const Moments m = final_moments(p, vec({x0}), cfg, [&](const AVec& y) { return y[0] * y[0] - x0 * x0; });
  CHECK(std::abs(m.mean - 2.0) <= 3 * m.se);
}

TEST_CASE("Ornstein-Uhlenbeck first moment") {
  ProblemSpec p = make_scalar_problem("euclidean:1", "0.5*x^2", {}, "0", "0");
  SdeConfig cfg;
  cfg.dt = 1e-2;
  cfg.t_final = 1.0;
  cfg.n_paths = 100000;
  cfg.seed = 6;
  const Moments m = final_moments(p, vec({1.0}), cfg, [](const AVec& y) { return y[0]; });
  CHECK(std::abs(m.mean - std::exp(-1.0)) <= 3 * m.se);
}

TEST_CASE("circle paths stay on the circle") {
  ProblemSpec p = make_scalar_problem("circle", "cos(theta)", {"sin(theta)"}, "0", "0");
  for (Scheme s : {Scheme::HeunStratonovich, Scheme::ProjectedEuler}) {
    SdeConfig cfg;
    cfg.dt = 1e-2;
    cfg.t_final = 2.0;
    cfg.n_paths = 200;
    cfg.scheme = s;
    const PathBatch b = simulate_paths(p, vec({1, 0}), cfg);
    double worst = 0.0;
    for (const auto& r : b.paths) {
      CHECK(r.positions.size() == 201);
      for (const auto& y : r.positions) worst = std::max(worst, std::abs(y.norm() - 1.0));
    }
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("flat trivial bundle transport is the identity") {
  ProblemSpec p = problem(R"J({"manifold": "euclidean:2", "V": "0", "connection": {"type": "trivial", "rank": 3}})J");
  SdeConfig cfg;
  cfg.dt = 1e-2;
  cfg.t_final = 0.5;
  cfg.n_paths = 20;
  PathBatch b = simulate_paths(p, vec({0.1, 0.2}), cfg);
  transport_path(p, b);
  for (const auto& r : b.paths)
    for (const auto& t : r.transport) CHECK((t - Eigen::MatrixXcd::Identity(3, 3)).norm() == 0.0);
}

TEST_CASE("tangent transport on the circle is one in the angle frame") {
  ProblemSpec p = problem(R"J({"manifold": "circle", "phi": "cos(theta)", "V": "0", "connection": "tangent"})J");
  SdeConfig cfg;
  cfg.dt = 1e-2;
  cfg.t_final = 1.0;
  cfg.n_paths = 30;
  PathBatch b = simulate_paths(p, vec({0, 1}), cfg);
  transport_path(p, b);
  for (const auto& r : b.paths) {
    CHECK(r.transport.size() == r.positions.size());
    for (const auto& t : r.transport) CHECK(std::abs(t(0, 0) - 1.0) <= 1e-12);
  }
}

TEST_CASE("transport stays unitary") {
  ProblemSpec tw = testutil::config("twisted_circle");
  ProblemSpec s2 = problem(R"J({"manifold": "sphere2", "V": "0", "connection": "tangent"})J");
  SdeConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_final = 1.0;
  cfg.n_paths = 20;
  for (ProblemSpec* p : {&tw, &s2}) {
    const AVec x0 = p->manifold->sample_points(1, 1)[0];
    PathBatch b = simulate_paths(*p, x0, cfg);
    transport_path(*p, b);
    double worst = 0.0;
    for (const auto& r : b.paths) {
      const auto& t = r.transport.back();
      worst = std::max(worst, (t.adjoint() * t - Eigen::MatrixXcd::Identity(t.rows(), t.cols())).norm());
    }
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("latitude holonomy on the sphere") {
  auto m = make_manifold("sphere2");
  const double alpha = kPi / 4;
  const double expect = 2 * kPi * (1 - std::cos(alpha));
  double prev = 0.0;
  for (int K : {100, 200, 400, 800}) {
    std::vector<AVec> path;
    for (int k = 0; k <= K; ++k) path.push_back(point_from_coords(*m, {alpha, 2 * kPi * k / K}));
    Eigen::MatrixXd e0(3, 2);
    m->frame_raw(path[0].data(), e0.data());
    const Eigen::MatrixXd e1 = transport_tangent_frame(*m, path, e0);
    const Eigen::MatrixXd r = e0.transpose() * e1;
    const double ang = std::abs(std::atan2(r(1, 0), r(0, 0)));
    // rotation by 2 pi (1 - cos alpha), either orientation
    const double err = std::min(std::abs(ang - expect), std::abs(ang - (2 * kPi - expect)));
    CHECK(err < 20.0 / K);
    if (prev > 0) CHECK(std::log2(prev / err) >= 0.8);
    prev = err;
  }
}

TEST_CASE("potential process examples") {
  SdeConfig cfg;
  cfg.dt = 1e-2;
  cfg.t_final = 0.7;
  cfg.n_paths = 10;
  ProblemSpec zero = make_scalar_problem("circle", "0", {"0"}, "0", "0");
  PathBatch b = simulate_paths(zero, vec({1, 0}), cfg);
  potential_path(zero, b);
  for (const auto& r : b.paths)
    for (const auto& v : r.potential) CHECK(v(0, 0) == 1.0);
  ProblemSpec c = make_scalar_problem("circle", "0", {"0"}, "1.5", "0");
  b = simulate_paths(c, vec({1, 0}), cfg);
  potential_path(c, b);
  for (const auto& r : b.paths) CHECK(r.potential.back()(0, 0).real() == doctest::Approx(std::exp(-1.5 * 0.7)).epsilon(1e-14));
}

TEST_CASE("matrix potential against a Runge-Kutta oracle") {
  ProblemSpec p = problem(kMatrixV);
  SdeConfig cfg;
  cfg.dt = 1e-2;
  cfg.t_final = 1.0;
  cfg.n_paths = 3;
  PathBatch b = simulate_paths(p, vec({1, 0}), cfg);
  transport_path(p, b);
  potential_path(p, b);
  for (const auto& r : b.paths) {
    // dW/ds = -W V(Y_k) on [k h, (k + 1) h], RK4 with step h / 100
    Eigen::Matrix2d w = Eigen::Matrix2d::Identity();
    for (std::size_t k = 0; k + 1 < r.positions.size(); ++k) {
      const double c = r.positions[k][0];  // cos(theta)
      Eigen::Matrix2d v;
      v << 1, c, c, 2;
      const double s = b.dt / 100;
      for (int i = 0; i < 100; ++i) {
        const Eigen::Matrix2d k1 = -w * v;
        const Eigen::Matrix2d k2 = -(w + 0.5 * s * k1) * v;
        const Eigen::Matrix2d k3 = -(w + 0.5 * s * k2) * v;
        const Eigen::Matrix2d k4 = -(w + s * k3) * v;
        w += s / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
      }
    }
    CHECK((r.potential.back().real() - w).norm() <= 1e-5);
    CHECK(r.potential.back().imag().norm() <= 1e-12);
  }
}

TEST_CASE("nonnegative matrix potentials contract") {
  ProblemSpec p = problem(kMatrixV);
  SdeConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_final = 1.0;
  cfg.n_paths = 10;
  PathBatch b = simulate_paths(p, vec({0, 1}), cfg);
  transport_path(p, b);
  potential_path(p, b);
  const double bound = 1 + 10 * b.steps * b.dt * b.dt;
  for (const auto& r : b.paths)
    for (const auto& v : r.potential) {
      Eigen::JacobiSVD<Eigen::MatrixXcd> svd(v);
      CHECK(svd.singularValues()[0] <= bound);
    }
}

TEST_CASE("Euclidean blow-up ends the path") {
  ProblemSpec p = make_scalar_problem("euclidean:1", "-x^4", {}, "0", "0");
  SdeConfig cfg;
  cfg.dt = 1e-2;
  cfg.t_final = 2.0;
  cfg.n_paths = 4;
  const PathBatch b = simulate_paths(p, vec({2.0}), cfg);
  for (const auto& r : b.paths) {
    CHECK_FALSE(r.alive);
    CHECK(r.exit_time < 2.0);
    CHECK(r.positions.size() < 201);
  }
}

TEST_CASE("heat bias on the circle shrinks linearly in dt") {
  // The step is rotation equivariant, so the angle increment is i.i.d. and
  // E cos(Y_K) = Re(e^{i x0} E[e^{i delta}]^K); E[e^{i delta}] by 2-D quadrature.
  ProblemSpec p = make_scalar_problem("circle", "0", {"0"}, "0", "0");
  std::vector<double> gx, gw;
  gauss_hermite(60, gx, gw);
  const double t = 0.5, x0 = 0.3;
  std::vector<double> bias;
  for (double dt : {4e-3, 2e-3, 1e-3}) {
    SdeConfig cfg;
    cfg.dt = dt;
    cfg.t_final = t;
    const PathEngine eng(p, cfg);
    const double sd = std::sqrt(2.0 * eng.h());
    std::complex<double> phi = 0.0;
    const double y[2] = {1.0, 0.0};
    for (std::size_t i = 0; i < gx.size(); ++i)
      for (std::size_t j = 0; j < gx.size(); ++j) {
        const double dw[2] = {sd * std::sqrt(2.0) * gx[i], sd * std::sqrt(2.0) * gx[j]};
        double out[2];
        REQUIRE(eng.step(y, dw, out));
        phi += gw[i] * gw[j] / kPi * std::polar(1.0, std::atan2(out[1], out[0]));
      }
    const double mean = (std::polar(1.0, x0) * std::pow(phi, eng.steps())).real();
    bias.push_back(std::abs(mean - std::exp(-t) * std::cos(x0)));
  }
  // least-squares slope of log bias against log dt
  const double lx[3] = {std::log(4e-3), std::log(2e-3), std::log(1e-3)};
  double mx = 0, my = 0;
  for (int i = 0; i < 3; ++i) {
    mx += lx[i] / 3;
    my += std::log(bias[i]) / 3;
  }
  double sxy = 0, sxx = 0;
  for (int i = 0; i < 3; ++i) {
    sxy += (lx[i] - mx) * (std::log(bias[i]) - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  MESSAGE("bias " << bias[0] << " " << bias[1] << " " << bias[2] << " slope " << sxy / sxx);
  CHECK(sxy / sxx >= 0.8);
}

TEST_CASE("lockstep blocks equal single paths bit for bit") {
  std::vector<ProblemSpec> probs;
  for (const char* c : {"fk_circle", "heat_circle", "ou_line", "torus", "sphere_heat", "twisted_circle", "coercive_circle"})
    probs.push_back(testutil::config(c));
  probs.push_back(make_scalar_problem("euclidean:2", "x^2*y^2", {"y", "-x"}, "x^2", "0"));
  probs.push_back(make_scalar_problem("euclidean:1", "-x^4", {}, "0", "0"));
  probs.push_back(problem(kMatrixV));
  probs.push_back(problem(R"J({"manifold": "sphere2", "phi": "z", "V": "1+x^2", "connection": "tangent"})J"));
  for (const auto& p : probs) {
    CAPTURE(p.manifold->name());
    SdeConfig cfg;
    cfg.dt = 2e-2;
    cfg.t_final = 1.0;
    const PathEngine eng(p, cfg);
    const AVec x0 = p.manifold->name() == "euclidean:1" ? vec({1.5}) : p.manifold->sample_points(3, 1)[2];
    std::vector<PathEngine::Final> blk(77);
    eng.run_block(x0, 9, 1000, 77, blk.data());
    for (int i = 0; i < 77; ++i) CHECK(same(blk[i], eng.run_path(x0, 9, 1000 + i, nullptr)));
  }
}

TEST_CASE("path batches do not depend on the worker count") {
  ProblemSpec p = testutil::config("fk_circle");
  SdeConfig cfg;
  cfg.dt = 1e-2;
  cfg.t_final = 0.5;
  cfg.n_paths = 300;
  cfg.threads = 1;
  const PathBatch a = simulate_paths(p, vec({1, 0}), cfg);
  cfg.threads = 4;
  const PathBatch b = simulate_paths(p, vec({1, 0}), cfg);
  REQUIRE(a.paths.size() == b.paths.size());
  bool equal = true;
  for (std::size_t i = 0; i < a.paths.size(); ++i) {
    equal = equal && a.paths[i].positions.size() == b.paths[i].positions.size();
    for (std::size_t k = 0; equal && k < a.paths[i].positions.size(); ++k)
      equal = (a.paths[i].positions[k] - b.paths[i].positions[k]).cwiseAbs().maxCoeff() == 0.0;
  }
  CHECK(equal);
}

}
