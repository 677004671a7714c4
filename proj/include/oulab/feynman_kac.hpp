#pragma once

#include <Eigen/Dense>
#include <ostream>
#include <string>
#include <vector>

#include "oulab/fields.hpp"
#include "oulab/stochastics.hpp"

namespace oulab {

struct SemigroupEstimate {
  Eigen::VectorXcd value;
  Eigen::VectorXd std_error;  // componentwise standard error
  std::int64_t n_paths = 0;
  double t = 0.0;
  AVec x;
  double surviving_fraction = 1.0;
  bool forced = false;  // hypotheses (F2)/(F3) failed and the run was forced
};

using Section = std::vector<ComplexExpr>;

struct EstimateOptions {
  bool force = false;
  int assumption_samples = 256;
};

/// Throws ModeError / HypothesisError when the problem is not admissible for
/// the Feynman-Kac representation; returns true when hypotheses were waived.
bool check_feynman_kac_mode(const ProblemSpec& prob, const EstimateOptions& opt);

/// Monte Carlo estimates of (e^{-tH} f_j)(x) for several sections sharing one
/// path ensemble.
std::vector<SemigroupEstimate> estimate_semigroup(const ProblemSpec& prob, const std::vector<Section>& f,
                                                  const AVec& x, double t, const SdeConfig& cfg,
                                                  const EstimateOptions& opt = {});
SemigroupEstimate estimate_semigroup(const ProblemSpec& prob, const Section& f, const AVec& x, double t,
                                     const SdeConfig& cfg, const EstimateOptions& opt = {});

/// One estimate per grid point, each from an independent ensemble keyed by
/// (seed, grid index).  Result is indexed [point][section].
std::vector<std::vector<SemigroupEstimate>> estimate_field(const ProblemSpec& prob, const std::vector<Section>& f,
                                                           const std::vector<AVec>& grid, double t,
                                                           const SdeConfig& cfg, const EstimateOptions& opt = {});

void write_estimates_csv(std::ostream& os, const Manifold& m, const std::vector<SemigroupEstimate>& est);

}  // namespace oulab
