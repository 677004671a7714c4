#pragma once

#include <Eigen/Dense>
#include <complex>

#include "oulab/errors.hpp"

namespace oulab {

/// exp(s H) for Hermitian H.
inline Eigen::MatrixXcd expm_hermitian(const Eigen::MatrixXcd& h, double s) {
  if (h.rows() == 1) return Eigen::MatrixXcd::Constant(1, 1, std::exp(s * h(0, 0).real()));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  const Eigen::VectorXd ev = (s * es.eigenvalues().array()).exp();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

/// exp(A) for anti-Hermitian A (a unitary matrix).
inline Eigen::MatrixXcd expm_antihermitian(const Eigen::MatrixXcd& a) {
  const std::complex<double> i(0.0, 1.0);
  if (a.rows() == 1) return Eigen::MatrixXcd::Constant(1, 1, std::exp(std::complex<double>(0.0, a(0, 0).imag())));
  // A = -i H with H = i A Hermitian.
  const Eigen::MatrixXcd h = (i * a + (i * a).adjoint()) * 0.5;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  Eigen::VectorXcd ph(h.rows());
  for (Eigen::Index k = 0; k < h.rows(); ++k) ph[k] = std::exp(-i * es.eigenvalues()[k]);
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

/// Orthonormal polar factor B (B^T B)^{-1/2} of a full-column-rank l x n matrix.
template <class Mat>
Mat polar_factor(const Mat& b) {
  using Real = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;
  const Real g = b.transpose() * b;
  Eigen::SelfAdjointEigenSolver<Real> es(g);
  const double lo = es.eigenvalues().minCoeff();
  if (!(lo > 1e-20 * std::max(1.0, es.eigenvalues().maxCoeff())))
    throw RankDeficiencyError("projected frame is rank deficient; reduce the step size");
  const Real inv_sqrt = es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                        es.eigenvectors().transpose();
  return b * inv_sqrt;
}

}  // namespace oulab
