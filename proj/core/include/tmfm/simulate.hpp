#pragma once

// Data-generating processes for the two-regime threshold matrix factor model.

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "tmfm/rng.hpp"
#include "tmfm/series.hpp"

namespace tmfm {

enum class LoadingMode {
  /// Every loading matrix drawn independently (factor-strength experiments).
  Independent,
  /// Regime-2 loadings are a partially resampled copy of regime 1
  /// (threshold-strength experiments).
  Paired,
};

struct DgpSpec {
  Index p1 = 20;
  Index p2 = 20;
  Index T = 1200;
  int k1 = 3;
  int k2 = 3;
  double r0 = 0.0;
  std::vector<double> ar_diag{-0.8, 0.8, 0.9, -0.7, -0.9, 0.8, 0.7, 0.8, 0.7};
  double noise_offdiag = 0.2;
  /// Multiplies E_t; 0 gives noiseless data.
  double noise_scale = 1.0;
  /// (delta_11, delta_12, delta_21, delta_22): row regime 1, row regime 2,
  /// column regime 1, column regime 2.
  std::array<double, 4> delta{0.0, 0.0, 0.0, 0.0};
  /// (beta_1, beta_2): row and column threshold strength, Paired mode only.
  std::array<double, 2> beta{1.0, 1.0};
  LoadingMode loading_mode = LoadingMode::Independent;
  std::uint64_t seed = 0;
  int burn_in = 200;

  double delta_of(Orientation s, Regime i) const {
    return delta[Quad<int>::slot(s, i)];
  }

  /// Errors: InvalidArgument, NonStationaryAR, NotPositiveDefinite.
  void validate() const;
};

struct SimulationTruth {
  Eigen::MatrixXd R1, R2, C1, C2;
  MatrixSeries factors;
  /// Scaled noise actually added to the signal.
  MatrixSeries noise;
  double r0 = 0.0;
  DgpSpec spec;

  const Eigen::MatrixXd& loading(Orientation s, Regime i) const;
};

struct SimulatedDataset {
  MatrixSeries x;
  ThresholdSeries z;
  SimulationTruth truth;
};

/// p x k matrix with iid Unif[-p^{-delta/2}, p^{-delta/2}] entries.
Eigen::MatrixXd gen_loading(Index p, int k, double delta, Rng& rng);

/// Base matrix of Unif[-1,1] entries; L1 = p^{-delta1/2} base. round(k p^beta)
/// distinct positions are redrawn and L2 = p^{-delta2/2} of the result.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> gen_loading_pair(Index p, int k, double delta1,
                                                             double delta2, double beta, Rng& rng);

/// vec(F_t) = A vec(F_{t-1}) + e_t with A = diag(ar_diag), after a burn-in
/// that starts from the stationary variance. Errors: NonStationaryAR.
MatrixSeries gen_factors_var1(Index T, int k1, int k2, std::span<const double> ar_diag, Rng& rng,
                              int burn_in = 200);

/// Gamma_s = (1 - offdiag) I + offdiag 11'. Errors: NotPositiveDefinite.
Eigen::MatrixXd equicorrelation(Index p, double offdiag);

/// E_t = Gamma_1^{1/2} Z_t Gamma_2^{1/2} with Z_t iid standard normal.
MatrixSeries gen_noise_kronecker(Index T, Index p1, Index p2, double offdiag, Rng& rng);

/// Substreams of rng: 1 loadings, 2 threshold variable, 3 factors, 4 noise.
/// Settings that share (seed, stream) therefore share every draw they can.
SimulatedDataset simulate_dataset(const DgpSpec& spec, const Rng& rng);
/// Uses Rng(spec.seed, 0).
SimulatedDataset simulate_dataset(const DgpSpec& spec);

}  // namespace tmfm
