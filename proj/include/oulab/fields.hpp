#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "oulab/expression.hpp"
#include "oulab/geometry.hpp"

namespace oulab {

struct ComplexExpr {
  Expr re;
  Expr im;
  bool is_zero() const { return re.is_zero() && im.is_zero(); }
  bool is_real() const { return im.is_zero(); }
};

/// Tangent field by its variable-basis components (angle frames on the circle
/// and torus, coordinate frame on R^n, ambient components on the sphere).
struct VectorFieldSpec {
  std::vector<Expr> components;
  std::optional<Expr> div;  // user-supplied divergence, validated on load

  bool is_zero() const;
};

struct PotentialSpec {
  bool is_matrix = false;
  Expr scalar;                        // scalar potential (times identity on the fibre)
  int rank = 1;                       // matrix size when is_matrix
  std::vector<ComplexExpr> entries;   // row-major rank x rank, Hermitian
  Expr h;                             // scalar minorant
  std::optional<bool> nonnegative;    // V >= 0 flag for Feynman-Kac mode
};

/// Metric connection on the fibre bundle: Levi-Civita on the tangent bundle,
/// or d + omega on a trivial bundle of rank m with anti-Hermitian omega.
struct ConnectionSpec {
  enum class Kind { Trivial, Tangent } kind = Kind::Trivial;
  int rank = 1;
  /// omega[slot] is the rank x rank coefficient of d(variable slot); empty
  /// when the connection is flat.
  std::vector<std::vector<ComplexExpr>> omega;

  bool flat() const { return omega.empty(); }
};

struct AssumptionConstants {
  double theta = 0.0;
  double beta1 = 0.0;
  double kappa = 0.0;
  double beta2 = 0.0;
  double gamma = 0.0;
  double beta3 = 0.0;
  double zeta_ratio = 1.0;
  double p = 2.0;
  std::vector<std::pair<double, double>> c_eps;  // (eps, C_eps)
  int n = 1;

  /// C for the largest tabulated eps' <= eps ((A2) at eps' implies (A2) at eps).
  std::optional<double> c_for(double eps) const;
};

struct ProblemSpec {
  ManifoldPtr manifold;
  Expr phi;
  VectorFieldSpec X;
  PotentialSpec V;
  ConnectionSpec connection;
  AssumptionConstants constants;
  std::vector<ComplexExpr> f;  // optional section: rank components, or n for the tangent bundle

  int fiber_dim() const;
  const VarSpace& vars() const { return manifold->vars(); }
};

/// Convenience constructor for scalar problems on the trivial line bundle.
ProblemSpec make_scalar_problem(const std::string& manifold, const std::string& phi,
                                const std::vector<std::string>& X, const std::string& V, const std::string& h);
ComplexExpr parse_complex(const std::string& re, const std::string& im, const VarSpace& vs);
std::vector<Expr> parse_components(const std::vector<std::string>& src, const VarSpace& vs);

// ---------------------------------------------------------------------------
// Pointwise evaluation

/// Fibre-valued potential at x (rank x rank; scalar potentials times I).
Eigen::MatrixXcd potential_matrix(const ProblemSpec& prob, const AVec& x);
/// omega(x)(v) for a tangent vector v (zero for flat connections).
Eigen::MatrixXcd connection_form(const ProblemSpec& prob, const AVec& x, const AVec& v);
/// Section f(x) as a fibre vector (ambient tangent components for TM).
Eigen::VectorXcd section_value(const ProblemSpec& prob, const std::vector<ComplexExpr>& f, const AVec& x);

/// Z = X - (d phi)^sharp as an ambient tangent vector.
AVec drift(const ProblemSpec& prob, const AVec& x);
/// 4 (|d phi|^2 + C_eps / eps).
double u_epsilon(const ProblemSpec& prob, double eps, const AVec& x);
/// Largest deviation between the supplied divergence of X and the computed one.
double divergence_mismatch(const ProblemSpec& prob, const std::vector<AVec>& samples);

// ---------------------------------------------------------------------------
// Assumptions and thresholds

struct ConditionRecord {
  std::string id;
  double worst_margin = 0.0;  // min over samples of (RHS - LHS)
  bool pass = false;
  std::string detail;
};

struct AssumptionReport {
  std::vector<ConditionRecord> conditions;
  int n_samples = 0;
  bool all_pass() const;
  const ConditionRecord* find(const std::string& id) const;
};

struct AssumptionOptions {
  /// Feynman-Kac mode: V >= 0, (A2) at every tabulated eps, (A3)/(A4) with h = 0.
  bool feynman_kac = false;
};

AssumptionReport check_assumptions(const ProblemSpec& prob, const std::vector<AVec>& samples, double eps,
                                   const AssumptionOptions& opt = {});

double a6_margin(const AssumptionConstants& c);

struct Thresholds {
  double eps0 = 0.0;
  double c_eps0 = 0.0;
  double lambda0 = 0.0;
  double rho0 = 0.0;
  double lambda1 = 0.0;
  double c_coercive = 0.0;
  double c_ueps = 0.0;
  double a6 = 0.0;
};

/// The two conditions defining eps0 evaluated at eps.
std::pair<double, double> eps0_conditions(const AssumptionConstants& c, double eps);
Thresholds compute_thresholds(const AssumptionConstants& c);

/// Minimum eigenvalue of V over the samples.
double min_potential_eigenvalue(const ProblemSpec& prob, const std::vector<AVec>& samples);

}  // namespace oulab
