#include "tmfm/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tmfm/error.hpp"

namespace tmfm {

EigenDecomposition sym_eigen(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw Error(ErrorCode::NotSymmetric, "matrix is not square");
  const Index p = m.rows();
  if (p == 0) return {};
  const double scale = m.norm();
  if ((m - m.transpose()).norm() > 1e-12 * scale) {
    throw Error(ErrorCode::NotSymmetric, "matrix is not symmetric within 1e-12 relative Frobenius");
  }

  // Householder tridiagonalisation + implicit QL (Eigen caps this at 30 p
  // iterations).
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::NoConvergence, "symmetric eigensolver did not converge");
  }

  // Solver returns ascending values; reorder descending, ties by solver index.
  std::vector<Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), Index{0});
  const auto& ev = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return ev[a] > ev[b]; });

  EigenDecomposition out{Eigen::VectorXd(p), Eigen::MatrixXd(p, p)};
  for (Index k = 0; k < p; ++k) {
    const Index src = order[static_cast<std::size_t>(k)];
    out.values[k] = ev[src];
    auto v = solver.eigenvectors().col(src);
    Index arg = 0;
    double best = -1.0;
    for (Index r = 0; r < p; ++r) {
      if (std::abs(v[r]) > best) {
        best = std::abs(v[r]);
        arg = r;
      }
    }
    out.vectors.col(k) = v[arg] < 0 ? Eigen::VectorXd(-v) : Eigen::VectorXd(v);
  }
  return out;
}

LoadingSpace LoadingSpace::span_of(const Eigen::MatrixXd& m, Orientation s, Regime i) {
  if (m.cols() < 1 || m.cols() > m.rows()) {
    throw Error(ErrorCode::KOutOfRange, "span_of needs 1 <= columns <= rows");
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
  return LoadingSpace{std::move(q), s, i};
}

LoadingSpace top_k(const EigenDecomposition& eig, int k, Orientation s, Regime i) {
  const Index p = eig.vectors.cols();
  if (k < 1 || k > p) {
    throw Error(ErrorCode::KOutOfRange,
                "k = " + std::to_string(k) + " outside 1.." + std::to_string(p));
  }
  return LoadingSpace{eig.vectors.leftCols(k), s, i};
}

LoadingSpace top_k(const LagCovKernel& kernel, int k) {
  return top_k(sym_eigen(kernel.m), k, kernel.orientation, kernel.regime);
}

LoadingSpace complement(const EigenDecomposition& eig, int k, Orientation s, Regime i) {
  const Index p = eig.vectors.cols();
  if (k < 1 || k >= p) {
    throw Error(ErrorCode::KOutOfRange,
                "complement needs 1 <= k < p, got k = " + std::to_string(k) + ", p = " + std::to_string(p));
  }
  return LoadingSpace{eig.vectors.rightCols(p - k), s, i};
}

LoadingSpace complement(const LagCovKernel& kernel, int k) {
  return complement(sym_eigen(kernel.m), k, kernel.orientation, kernel.regime);
}

double space_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows()) {
    throw Error(ErrorCode::AmbientDimMismatch, "loading spaces live in different ambient dimensions");
  }
  if (a.cols() == 0 || b.cols() == 0) throw Error(ErrorCode::KOutOfRange, "space_distance of an empty space");
  // 1 - tr(O1 O1' O2 O2') / q1 equals ||(I - O2 O2') O1||_F^2 / q1 for the
  // smaller basis O1. The residual form keeps full precision near D = 0.
  const Eigen::MatrixXd& small = a.cols() <= b.cols() ? a : b;
  const Eigen::MatrixXd& large = a.cols() <= b.cols() ? b : a;
  const Eigen::MatrixXd residual = small - large * (large.transpose() * small);
  const double d = residual.norm() / std::sqrt(static_cast<double>(small.cols()));
  return std::clamp(d, 0.0, 1.0);
}

double space_distance(const LoadingSpace& a, const LoadingSpace& b) {
  return space_distance(a.basis, b.basis);
}

double spectral_norm_sym(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::NoConvergence, "symmetric eigensolver did not converge");
  }
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& m) {
  const EigenDecomposition eig = sym_eigen(m);
  const Eigen::VectorXd root = eig.values.cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd out = eig.vectors * root.asDiagonal() * eig.vectors.transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace tmfm
