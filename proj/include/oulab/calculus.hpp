#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "oulab/oracle.hpp"

namespace oulab {

enum class RuleId { P1, P2, P3, P4, P5, P6, P7, P8, P9, C1, C2, C3, LapHess };

RuleId parse_rule(const std::string& s);
std::string rule_name(RuleId r);
const std::vector<RuleId>& all_rules();
/// lap_hess is a signed margin that must stay <= 0; the rest are residuals.
bool rule_is_inequality(RuleId r);

/// Fibre connection used by (p6)-(p9): omega_a at the nodes, rank x rank,
/// anti-Hermitian.
struct GridConnection {
  int rank = 1;
  std::vector<std::vector<Eigen::MatrixXcd>> omega;  // [axis][node]
};

/// The default rank-two test connection on the circle (and its torus analogue).
GridConnection default_connection(const PeriodicGrid& g);
/// omega = i diag(c_1, ..., c_m) d theta on the circle.
GridConnection diagonal_connection(const PeriodicGrid& g, const std::vector<double>& c);

struct RuleResult {
  RuleId rule;
  std::string manifold;
  int trials = 0;
  double max_residual = 0.0;
  bool pass = false;
};

inline constexpr double kRuleTolerance = 1e-7;
inline constexpr double kLapHessTolerance = 1e-10;

/// Random seeded data of trigonometric degree <= 3 on an N-point grid; the
/// maximum over trials of the sup-norm residual (or signed margin).
RuleResult verify_rule(RuleId rule, const ManifoldPtr& m, int trials, std::uint64_t seed, int N = 64);
RuleResult verify_rule(RuleId rule, const ManifoldPtr& m, int trials, std::uint64_t seed, int N,
                       const GridConnection& conn);

/// Residual of (p9) for given data, exposed for fixed examples.
double p9_residual(const PeriodicGrid& g, const GridConnection& conn, const Eigen::VectorXcd& f,
                   const std::vector<Eigen::VectorXcd>& u);

void write_rules_csv(std::ostream& os, const std::vector<RuleResult>& rows);

}  // namespace oulab
