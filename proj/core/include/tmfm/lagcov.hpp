#pragma once

// Lagged cross-covariance blocks and the symmetric kernels built from them.
//
// For orientation Row, regime i and thresholds (r1, r2):
//
//   Omega_{ij,ml}(h) = (1/T) sum_{t=1}^{T-h} x_{t,m} x_{t+h,l}' I_{t,i}(r_i) I_{t+h,j}(r_j)
//   M_i(r1, r2)      = sum_{h=1}^{h0} sum_{j=1,2} sum_{m,l} Omega_{ij,ml}(h) Omega_{ij,ml}(h)'
//
// where x_{t,m} is column m of X_t. The second indicator is evaluated at the
// lead time t+h. The divisor is T for every lag. Column orientation applies the
// same formula to X_t'.

#include <functional>
#include <span>
#include <vector>

#include "tmfm/series.hpp"

namespace tmfm {

struct OmegaBlock {
  Eigen::MatrixXd omega;
  int h = 1;
  Regime i = Regime::One;
  Regime j = Regime::One;
  Index m = 0;  // 0-based column index of X_t (orientation-relative)
  Index l = 0;
  double r1 = 0.0;
  double r2 = 0.0;
};

struct LagCovKernel {
  Eigen::MatrixXd m;
  Orientation orientation = Orientation::Row;
  Regime regime = Regime::One;
  double r1 = 0.0;
  double r2 = 0.0;
  int h0 = 1;
};

/// A single Omega block. Errors: LagTooLarge (h >= T), IndexOutOfRange.
OmegaBlock omega_hat(const MatrixSeries& x, const ThresholdSeries& z, int h, Regime i, Regime j,
                     Index m, Index l, double r1, double r2,
                     Orientation orientation = Orientation::Row);

/// Kernel for one (orientation, regime). Errors: LagTooLarge.
LagCovKernel m_hat(const MatrixSeries& x, const ThresholdSeries& z, Orientation orientation,
                   Regime regime, double r1, double r2, int h0);

/// All four kernels at once; both orientations share the same cross-covariance
/// products so this costs about as much as a single orientation.
Quad<LagCovKernel> m_hat_all(const MatrixSeries& x, const ThresholdSeries& z, double r1,
                             double r2, int h0);

using SweepVisitor =
    std::function<void(std::size_t index, double r, const Quad<Eigen::MatrixXd>& kernels)>;

/// Visits the four kernels M_{s,i}(r, r) for each r of a strictly increasing
/// grid. Moving between consecutive grid points only changes the regime of
/// time indices whose z_t lies between them, so each step applies rank-one
/// updates instead of recomputing the kernels.
/// Errors: EmptyGrid, InvalidArgument (grid not strictly increasing), LagTooLarge.
void sweep_kernels(const MatrixSeries& x, const ThresholdSeries& z, std::span<const double> grid,
                   int h0, const SweepVisitor& visit);

/// Kernels for one (orientation, regime) at every grid point.
std::vector<LagCovKernel> m_hat_sweep(const MatrixSeries& x, const ThresholdSeries& z,
                                      Orientation orientation, Regime regime,
                                      std::span<const double> grid, int h0);

}  // namespace tmfm
