#pragma once

#include "tmfm/lagcov.hpp"
#include "tmfm/series.hpp"

namespace tmfm {

/// Full symmetric eigendecomposition, eigenvalues in non-increasing order.
/// Each eigenvector is signed so its largest-magnitude entry is positive
/// (lowest index wins ties), which makes serialized output reproducible.
struct EigenDecomposition {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

/// p x k matrix with orthonormal columns standing for a loading space
/// (or its orthogonal complement).
struct LoadingSpace {
  Eigen::MatrixXd basis;
  Orientation orientation = Orientation::Row;
  Regime regime = Regime::One;

  Index ambient_dim() const { return basis.rows(); }
  Index dim() const { return basis.cols(); }

  /// Orthonormal basis of span(columns of m) via Householder QR. m must have
  /// full column rank.
  static LoadingSpace span_of(const Eigen::MatrixXd& m, Orientation s = Orientation::Row,
                              Regime i = Regime::One);
};

/// Errors: NotSymmetric (asymmetry above 1e-12 * ||M||_F), NoConvergence.
EigenDecomposition sym_eigen(const Eigen::MatrixXd& m);

/// Leading k eigenvectors. Errors: KOutOfRange unless 1 <= k <= p.
LoadingSpace top_k(const LagCovKernel& kernel, int k);
LoadingSpace top_k(const EigenDecomposition& eig, int k, Orientation s, Regime i);

/// Eigenvectors k+1..p. Errors: KOutOfRange unless 1 <= k < p.
LoadingSpace complement(const LagCovKernel& kernel, int k);
LoadingSpace complement(const EigenDecomposition& eig, int k, Orientation s, Regime i);

/// sqrt(1 - tr(O1 O1' O2 O2') / min(q1, q2)), clamped to [0, 1]. Both bases must have
/// orthonormal columns.
/// Errors: AmbientDimMismatch.
double space_distance(const LoadingSpace& a, const LoadingSpace& b);
double space_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Largest absolute eigenvalue of a symmetric matrix.
double spectral_norm_sym(const Eigen::MatrixXd& m);

/// V diag(sqrt(max(lambda, 0))) V' for a symmetric PSD matrix.
Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& m);

}  // namespace tmfm
