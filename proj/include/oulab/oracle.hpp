#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "oulab/fields.hpp"
#include "oulab/geometry.hpp"

namespace oulab {

/// Uniform periodic grid on the circle (N nodes) or the flat torus (N x N
/// nodes, index i1 * N + i2).
struct PeriodicGrid {
  ManifoldPtr manifold;
  int dims = 1;
  int N = 0;
  double spacing = 0.0;
  std::vector<AVec> points;                 // ambient node positions
  std::vector<std::array<double, 2>> angles;
  Eigen::MatrixXd d1;                       // spectral first-derivative matrix, N x N

  int size() const { return static_cast<int>(points.size()); }
  double cell() const;
};

using GridPtr = std::shared_ptr<const PeriodicGrid>;

/// Throws UnsupportedManifoldError unless the manifold is the circle or torus2,
/// DegenerateInputError unless N is even and at least 8.
GridPtr make_grid(const ManifoldPtr& m, int N);

struct GridFunction {
  GridPtr grid;
  Eigen::VectorXcd values;

  GridFunction& operator+=(const GridFunction& o);
  GridFunction& operator-=(const GridFunction& o);
};
GridFunction operator+(GridFunction a, const GridFunction& b);
GridFunction operator-(GridFunction a, const GridFunction& b);
GridFunction operator*(const GridFunction& a, const GridFunction& b);
GridFunction operator*(std::complex<double> s, GridFunction a);

GridFunction sample(const GridPtr& g, const ComplexExpr& f);
GridFunction sample(const GridPtr& g, const Expr& f);
double sup_norm(const Eigen::VectorXcd& v);

/// Spectral derivative along one axis (0 or 1) and mixed second derivatives.
Eigen::VectorXcd spectral_d(const PeriodicGrid& g, const Eigen::VectorXcd& u, int axis);
/// Transpose of spectral_d (the formal adjoint up to sign).
Eigen::VectorXcd spectral_dt(const PeriodicGrid& g, const Eigen::VectorXcd& u, int axis);
Eigen::VectorXcd spectral_dd(const PeriodicGrid& g, const Eigen::VectorXcd& u, int a, int b);
/// Nonnegative Laplacian sum_a D_a^T D_a.
Eigen::VectorXcd spectral_laplacian(const PeriodicGrid& g, const Eigen::VectorXcd& u);

/// (sum |m|^p w cell)^{1/p} for pointwise magnitudes m and weights w.
double lp_norm(const PeriodicGrid& g, const Eigen::VectorXd& mag, double p, const Eigen::VectorXd* weight = nullptr);
double weighted_norm(const GridFunction& u, double p, const Expr& phi);
double weighted_norm(const GridFunction& u, double p, const Eigen::VectorXd& phi_nodes);

/// Matrix-free discretisation of H = Delta^nabla + nabla_{(d phi)^#} - nabla_X + V
/// on a rank-one bundle.  Field data (phi, d phi, Delta phi, X, div X, V, h) are
/// evaluated analytically at the nodes.
class DiscreteOperator {
 public:
  DiscreteOperator(const ProblemSpec& prob, GridPtr grid);

  const PeriodicGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const ProblemSpec& problem() const { return *prob_; }

  /// Covariant derivative nabla_a u = D_a u + omega_a u.
  Eigen::VectorXcd nabla(const Eigen::VectorXcd& u, int a) const;
  /// nabla^dagger of a one-form with components psi_a.
  Eigen::VectorXcd nabla_adjoint(const std::vector<Eigen::VectorXcd>& psi) const;
  Eigen::VectorXcd rough_laplacian(const Eigen::VectorXcd& u) const;
  /// nabla_Y u for Y given by nodal frame components.
  Eigen::VectorXcd nabla_along(const std::vector<Eigen::VectorXd>& y, const Eigen::VectorXcd& u) const;
  Eigen::VectorXcd apply(const Eigen::VectorXcd& u) const;

  Eigen::MatrixXcd dense() const;

  int dims() const { return grid_->dims; }
  const Eigen::VectorXd& phi() const { return phi_; }
  const Eigen::VectorXd& lap_phi() const { return lap_phi_; }
  const std::vector<Eigen::VectorXd>& dphi() const { return dphi_; }
  const std::vector<Eigen::VectorXd>& x() const { return x_; }
  const Eigen::VectorXd& div_x() const { return div_x_; }
  const Eigen::VectorXd& v() const { return v_; }
  const Eigen::VectorXd& h() const { return h_; }
  Eigen::VectorXd dphi_norm2() const;
  bool flat() const { return omega_.empty(); }

 private:
  const ProblemSpec* prob_;
  GridPtr grid_;
  Eigen::VectorXd phi_, lap_phi_, div_x_, v_, h_;
  std::vector<Eigen::VectorXd> dphi_, x_;
  std::vector<Eigen::VectorXcd> omega_;  // omega_a at nodes (purely imaginary)
};

struct OperatorMatrix {
  Eigen::MatrixXcd H;
  double p = 2.0;
  std::string phi;
  GridPtr grid;
  double gershgorin = 0.0;  // max row sum of |H_ij|
};

/// Dense H on grids with at most kMaxDenseNodes nodes.
inline constexpr int kMaxDenseNodes = 2048;
OperatorMatrix build_operator(const ProblemSpec& prob, const GridPtr& grid);

enum class SemigroupBackend { Expm, Rk4 };

/// e^{-tH} f.  Rk4 uses the step min(t, 1/rho) unless rk4_step is given;
/// a step with step * rho > 2.78 throws StepSizeError.
GridFunction semigroup_apply(const OperatorMatrix& H, const GridFunction& f, double t,
                             SemigroupBackend backend = SemigroupBackend::Expm,
                             std::optional<double> rk4_step = std::nullopt);

/// Closed form e^{-tH} for H = nabla^dagger nabla with nabla = d + i a d theta
/// on the circle, applied to sum_k c_k e^{ik theta}.
std::complex<double> twisted_heat_value(double a, const std::vector<std::pair<int, std::complex<double>>>& coeffs,
                                        double t, double theta);

// ---------------------------------------------------------------------------
// Inequality harness

struct SuiteInfo {
  std::string kind = "trig_random";
  int size = 0;
  std::uint64_t seed = 0;
  int degree = 0;
};

struct Suite {
  SuiteInfo info;
  std::vector<GridFunction> members;
};

/// Random real trigonometric polynomials of degree <= degree (N / 4 by default).
Suite random_trig_suite(const GridPtr& g, int size = 50, std::uint64_t seed = 1, int degree = -1);
/// cos(k theta) for k = 0..kmax on the circle.
Suite cosine_suite(const GridPtr& g, int kmax);

enum class Family {
  Coercive,
  Ueps,
  GradCoercive,
  HessCoercive,
  Domination,
  Separation,
  MultiplierGrad,
  MultiplierSq,
  Cz
};

Family parse_family(const std::string& s);
std::string family_name(Family f);
const std::vector<Family>& all_families();

struct InequalityReport {
  std::string family;
  double p = 2.0;
  double lambda = 0.0;
  std::optional<double> paper_constant;
  double empirical_constant = 0.0;
  double worst_ratio = 0.0;
  std::vector<double> ratios;
  bool pass = false;
  SuiteInfo suite;
  std::optional<double> lambda_star;                  // smallest swept lambda still passing
  std::vector<std::pair<double, double>> domination;  // (eps, minimal C_eps)
  bool forced = false;
};

struct FamilyOptions {
  std::optional<double> lambda;  // default lambda_1
  bool force = false;
  bool sweep = true;
  std::vector<double> eps_list{1.0, 0.5, 0.1, 0.05, 0.01};
};

InequalityReport check_inequality_family(Family family, const ProblemSpec& prob, const GridPtr& grid,
                                         const Suite& suite, const FamilyOptions& opt = {});

struct IbpResidual {
  double first = 0.0;
  double second = 0.0;
};

/// Both integration-by-parts identities with unweighted volume quadrature.
IbpResidual check_ibp(const ProblemSpec& prob, const GridPtr& grid, const GridFunction& u, const GridFunction& w);

/// min over samples and 16 random unit directions W of Ric_lower + Hess phi(W, W).
double sc_diagnostic(const ProblemSpec& prob, const std::vector<AVec>& samples, std::uint64_t seed = 1);

}  // namespace oulab
