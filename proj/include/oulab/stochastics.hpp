#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "oulab/fields.hpp"
#include "oulab/geometry.hpp"

namespace oulab {

enum class Scheme { HeunStratonovich, ProjectedEuler };

Scheme parse_scheme(const std::string& s);
std::string scheme_name(Scheme s);

struct SdeConfig {
  double dt = 1e-3;
  double t_final = 1.0;
  std::int64_t n_paths = 1000;
  std::uint64_t seed = 1;
  Scheme scheme = Scheme::HeunStratonovich;
  int threads = 1;  // 0: hardware concurrency

  /// Number of steps K = ceil(t_final / dt); the step actually taken is t_final / K.
  int steps() const;
  double step() const;
  void validate() const;
};

inline constexpr double kBlowUpRadius = 1e6;

struct PathRecord {
  std::vector<AVec> positions;               // Y_0 .. Y_K (truncated at exit)
  std::vector<Eigen::MatrixXcd> transport;   // //_k: rank x rank, or n x n in the frame at Y_k
  std::vector<Eigen::MatrixXcd> potential;   // script V_k
  bool alive = true;
  double exit_time = std::numeric_limits<double>::infinity();
};

struct PathBatch {
  int ambient_dim = 0;
  int steps = 0;
  double dt = 0.0;
  std::vector<PathRecord> paths;
};

/// One-step integrator and per-path streaming state, shared by the batch
/// functions and the Feynman-Kac estimator so both follow identical arithmetic.
class PathEngine {
 public:
  PathEngine(const ProblemSpec& prob, const SdeConfig& cfg);

  const ProblemSpec& problem() const { return *prob_; }
  int steps() const { return steps_; }
  double h() const { return h_; }

  /// Ambient drift Z(y).
  void drift(const double* y, double* z) const;
  /// Gaussian increment with N(0, 2h) components for step k of a path.
  void increment(std::uint64_t seed, std::uint64_t path, int k, double* dw) const;
  /// Drift at y and, when `v` is non-null, the scalar potential at y.
  void drift_potential(const double* y, double* z, double* v) const;
  /// One integrator step; returns false when the path leaves the blow-up ball.
  bool step(const double* y, const double* dw, double* out) const;
  /// Same step with the drift at y already known.
  bool step_from(const double* y, const double* z0, const double* dw, double* out) const;

  bool scalar_potential() const { return !prob_->V.is_matrix; }
  bool trivial_transport() const;
  double potential_scalar(const double* y) const;

  /// Advance the fibre transport from y0 to y1 (unitary, trivial bundles).
  void advance_trivial(const double* y0, const double* y1, Eigen::MatrixXcd& t) const;
  /// Advance the ambient l x n frame to the tangent space at y1 (tangent bundle).
  void advance_tangent(const double* y1, Eigen::MatrixXd& e) const;

  /// Final state of a path: position, transport and potential.
  struct Final {
    AVec y;
    Eigen::MatrixXcd transport;  // rank x rank (trivial)
    Eigen::MatrixXd frame;       // l x n (tangent)
    Eigen::MatrixXcd potential;
    double potential_sum = 0.0;  // sum_k V(Y_k) in the scalar case
    bool alive = true;
    double exit_time = std::numeric_limits<double>::infinity();
  };
  Final run_path(const AVec& x0, std::uint64_t seed, std::uint64_t path, PathRecord* record) const;
  /// Paths first .. first + count - 1 advanced in lockstep; out[i] equals
  /// run_path(x0, seed, first + i, nullptr) bit for bit.
  void run_block(const AVec& x0, std::uint64_t seed, std::uint64_t first, int count, Final* out) const;

 private:
  struct BatchScratch {
    BatchInputs in;
    std::vector<double> d, dtmp, c, e;
    std::vector<Jet1> j, jtmp;
  };
  // predictor half: 0 = left the ball, 1 = `ys` is the next point, 2 = corrector needed
  int predict(const double* y, const double* z0, const double* dw, double* a, double* ys) const;
  bool correct(const double* y, const double* z0, const double* dw, const double* a, const double* ys,
               const double* z1, double* out) const;
  // L, N > 0 fix the ambient and intrinsic dimensions at compile time; 0 reads them at run time
  template <int L, int N>
  void drift_potential_batch(const double* y, int count, double* z, double* v, BatchScratch& w) const;
  template <int L, int N>
  void run_block_impl(const AVec& x0, std::uint64_t seed, std::uint64_t first, int count, Final* out) const;

  const ProblemSpec* prob_;
  const Manifold* man_;
  SdeConfig cfg_;
  int steps_;
  double h_;
  double sqrt2h_;
  int l_, n_;
  bool zero_drift_;
  bool compact_;
  bool flat_;
  bool x_zero_, phi_const_;
  bool raw_inputs_;
  bool v_const_ = false;
  double v_value_ = 0.0;
};

PathBatch simulate_paths(const ProblemSpec& prob, const AVec& x0, const SdeConfig& cfg);
void transport_path(const ProblemSpec& prob, PathBatch& batch);
void potential_path(const ProblemSpec& prob, PathBatch& batch);

/// Connection form omega(x)(v) supplied by the caller.
using ConnectionFormFn = std::function<Eigen::MatrixXcd(const AVec& x, const AVec& v)>;
/// //_{k+1} = exp(-omega(Y_mid)(Y_{k+1} - Y_k)) //_k with Y_mid the retracted midpoint.
std::vector<Eigen::MatrixXcd> transport_with_form(const Manifold& m, const std::vector<AVec>& path, int rank,
                                                  const ConnectionFormFn& omega);
/// Projection transport of an orthonormal frame along a recorded path.
Eigen::MatrixXd transport_tangent_frame(const Manifold& m, const std::vector<AVec>& path, const Eigen::MatrixXd& e0);

/// Runs body(i) for i in [0, n) on `threads` workers.  Work is split into
/// fixed chunks so per-index results never depend on the worker count.
void parallel_for(std::int64_t n, int threads, const std::function<void(std::int64_t)>& body);

/// Binary dump: per path, uint64 point count then count * l little-endian doubles.
void write_path_dump(const std::string& file, const PathBatch& batch);

}  // namespace oulab
