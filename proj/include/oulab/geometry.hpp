#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "oulab/expression.hpp"

namespace oulab {

/// Ambient vectors and matrices (ambient dimension is at most four).
using AVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 4, 1>;
using AMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4>;

inline constexpr double kOnManifoldTol = 1e-9;

struct ChartPoint {
  int patch = 0;
  AVec q;
};

/// Value, gradient and Hessian of a scalar field expressed in the orthonormal
/// tangent frame returned by Manifold::frame at the same point.
struct LocalJet {
  int n = 0;
  double value = 0.0;
  std::array<double, kMaxVars> grad{};
  std::array<double, kMaxVars * kMaxVars> hess{};

  double h(int a, int b) const { return hess[a * kMaxVars + b]; }
  double grad_norm2() const;
  double hess_norm() const;  // Hilbert-Schmidt
  double laplacian() const;  // nonnegative convention: -trace(Hess)
};

class Manifold {
 public:
  virtual ~Manifold() = default;

  virtual std::string name() const = 0;
  virtual int dim() const = 0;
  virtual int ambient_dim() const = 0;
  virtual double ricci_lower() const = 0;
  virtual bool is_compact() const = 0;
  /// Variables available to field expressions.
  virtual const VarSpace& vars() const = 0;

  // Unchecked kernels on raw ambient arrays, used inside integrator loops.
  virtual void retract_raw(const double* y, double* out) const = 0;
  virtual void project_raw(const double* x, const double* v, double* out) const = 0;
  /// Orthonormal tangent frame, column-major l x n.
  virtual void frame_raw(const double* x, double* e) const = 0;
  virtual void fill_inputs(const double* x, VarInputs& in, bool raw_values) const = 0;
  /// Differentials of the expression variables applied to a tangent vector.
  virtual void var_differential(const double* x, const double* v, double* out) const = 0;

  // The same kernels over `count` points stored back to back.
  virtual void retract_batch(const double* y, double* out, int count) const;
  virtual void project_batch(const double* x, const double* v, double* out, int count) const;
  virtual void frame_batch(const double* x, double* e, int count) const;
  virtual void fill_inputs_batch(const double* x, BatchInputs& in, bool raw_values, int count) const;

  virtual LocalJet jet(const double* x, const Expr& f, int order) const = 0;
  /// True when the frame is the coordinate basis of the expression variables,
  /// so variable derivatives are frame derivatives.
  virtual bool flat_chart() const { return false; }
  /// Frame components of the tangent field with the given variable-basis
  /// components; writes the divergence when `div` is non-null.
  virtual void vector_field(const double* x, const std::vector<Expr>& comps, double* frame_comps,
                            double* div) const = 0;

  virtual ChartPoint chart(const AVec& x) const = 0;
  virtual AVec chart_inverse(const ChartPoint& c) const = 0;

  /// Deterministic sample of `count` points (grid or low-discrepancy set).
  virtual std::vector<AVec> sample_points(int count, std::uint64_t seed) const = 0;

  // Checked API.
  AVec retract(const AVec& y) const;
  AMat projector(const AVec& x) const;
  AVec project_tangent(const AVec& x, const AVec& v) const;
  AMat frame(const AVec& x) const;
  double distance_to(const AVec& x) const;  // |retract(x) - x|
  bool on_manifold(const AVec& x, double tol = kOnManifoldTol) const;
  /// Throws ChartDomainError when x is not on the manifold.
  void require_chart_point(const AVec& x) const;
};

using ManifoldPtr = std::shared_ptr<const Manifold>;

/// "euclidean:n" (1 <= n <= 4), "circle", "sphere2", "torus2".
ManifoldPtr make_manifold(const std::string& name);

/// (sum_j A_j^2 f)(x) + (Z f)(x) = -Delta f + Z f, with Z given by its
/// variable-basis components.
double apply_generator(const Manifold& m, const Expr& f, const std::vector<Expr>& z, const AVec& x);

/// Point with the given angles (circle, torus; sphere as polar, azimuth) or
/// coordinates (Euclidean).
AVec point_from_coords(const Manifold& m, const std::vector<double>& q);

}  // namespace oulab
