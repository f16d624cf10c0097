#pragma once

// Reference implementations used only by tests. They follow the textbook
// definitions literally (explicit loops, no shared products) so they stay
// independent of the optimized library code.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "tmfm/rng.hpp"
#include "tmfm/series.hpp"

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline std::vector<MatrixXd> random_series(int p1, int p2, int T, std::uint64_t seed) {
  tmfm::Rng rng(seed, 99);
  std::vector<MatrixXd> xs;
  for (int t = 0; t < T; ++t) {
    MatrixXd x(p1, p2);
    for (int c = 0; c < p2; ++c)
      for (int r = 0; r < p1; ++r) x(r, c) = rng.normal();
    xs.push_back(x);
  }
  return xs;
}

inline VectorXd random_z(int T, std::uint64_t seed) {
  tmfm::Rng rng(seed, 98);
  VectorXd z(T);
  for (int t = 0; t < T; ++t) z[t] = rng.normal();
  return z;
}

// I_{t,1}(r1) = 1{z_t < r1}, I_{t,2}(r2) = 1{z_t >= r2}
inline double indicator(double z, int regime, double r1, double r2) {
  return regime == 1 ? (z < r1 ? 1.0 : 0.0) : (z >= r2 ? 1.0 : 0.0);
}

// Omega_{ij,ml}(h) with 1-based t in the sum, m and l 0-based columns.
inline MatrixXd omega(const std::vector<MatrixXd>& x, const VectorXd& z, int h, int i, int j, int m, int l,
                      double r1, double r2) {
  const int T = static_cast<int>(x.size());
  const int p = static_cast<int>(x[0].rows());
  MatrixXd out = MatrixXd::Zero(p, p);
  for (int t = 0; t + h < T; ++t) {
    const double w = indicator(z[t], i, r1, r2) * indicator(z[t + h], j, r1, r2);
    if (w == 0.0) continue;
    for (int a = 0; a < p; ++a)
      for (int b = 0; b < p; ++b) out(a, b) += x[t](a, m) * x[t + h](b, l);
  }
  return out / static_cast<double>(T);
}

// M_i = sum_h sum_j sum_{m,l} Omega Omega'; the quadruple loop over (h, j, m, l).
inline MatrixXd kernel(const std::vector<MatrixXd>& x, const VectorXd& z, int i, double r1, double r2, int h0) {
  const int p = static_cast<int>(x[0].rows());
  const int q = static_cast<int>(x[0].cols());
  MatrixXd out = MatrixXd::Zero(p, p);
  for (int h = 1; h <= h0; ++h)
    for (int j = 1; j <= 2; ++j)
      for (int m = 0; m < q; ++m)
        for (int l = 0; l < q; ++l) {
          const MatrixXd o = omega(x, z, h, i, j, m, l, r1, r2);
          out += o * o.transpose();
        }
  return out;
}

inline std::vector<MatrixXd> transposed(const std::vector<MatrixXd>& x) {
  std::vector<MatrixXd> out;
  for (const auto& m : x) out.push_back(m.transpose());
  return out;
}

// E = sum_{t >= t0} sum_l || B1' x_{t,l} ||^2 + sum_l || B2' x_{t,l.} ||^2 with
// explicit loops over columns and rows.
inline double residual(const std::vector<MatrixXd>& x, const VectorXd& z, double r, const MatrixXd B[2][2], int t0) {
  double e = 0.0;
  for (int t = t0; t < static_cast<int>(x.size()); ++t) {
    const int i = z[t] < r ? 0 : 1;
    for (int l = 0; l < x[t].cols(); ++l) {
      const VectorXd v = B[0][i].transpose() * x[t].col(l);
      e += v.dot(v);
    }
    for (int l = 0; l < x[t].rows(); ++l) {
      const VectorXd v = B[1][i].transpose() * x[t].row(l).transpose();
      e += v.dot(v);
    }
  }
  return e;
}

inline double rel_frobenius(const MatrixXd& a, const MatrixXd& b) {
  const double scale = std::max(b.norm(), 1e-300);
  return (a - b).norm() / scale;
}

// Subspace distance from the projection matrices, independent of the library.
inline double projector_distance(const MatrixXd& a, const MatrixXd& b) {
  const MatrixXd pa = a * (a.transpose() * a).inverse() * a.transpose();
  const MatrixXd pb = b * (b.transpose() * b).inverse() * b.transpose();
  const double q = static_cast<double>(std::min(a.cols(), b.cols()));
  return std::sqrt(std::max(0.0, 1.0 - (pa * pb).trace() / q));
}

}  // namespace oracle
