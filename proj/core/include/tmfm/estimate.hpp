#pragma once

// Estimators for the two-regime threshold matrix factor model: loading spaces
// for a given partition, factor counts by eigenvalue ratios, the threshold via
// the projected-kernel objective G(r), the full unknown-k pipeline and
// out-of-sample threshold-variable selection.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tmfm/error.hpp"
#include "tmfm/lagcov.hpp"
#include "tmfm/series.hpp"
#include "tmfm/spectral.hpp"

namespace tmfm {

struct FactorCountEstimate {
  FactorCounts k_hat;
  /// Regime whose kernel has the larger spectral norm, per orientation
  /// (index 0 = row, 1 = column).
  std::array<Regime, 2> chosen_regime{Regime::One, Regime::One};
  /// Per-space estimate argmin_k lambda_{k+1}/lambda_k.
  Quad<int> k_per_space;
  /// lambda_{k+1}/lambda_k for k = 1..R_s, R_s = floor(p_s/2). +inf from the
  /// first numerically zero lambda_k on (at or below max(eigen_floor,
  /// 64 p eps lambda_1)).
  Quad<std::vector<double>> ratio_curves;
  Quad<Eigen::VectorXd> eigenvalues;
  Quad<double> kernel_norms;
  bool degenerate_spectrum = false;
  double eta1 = 0.0;
  double eta2 = 0.0;
};

struct ThresholdEstimate {
  double r_hat = 0.0;
  FactorCounts k;
  double eta1 = 0.0;
  double eta2 = 0.0;
  std::vector<double> grid;
  std::vector<double> g_values;
};

struct FittedModel {
  FactorCounts k;
  double r_tilde = 0.0;
  double eta1 = 0.0;
  double eta2 = 0.0;
  /// Leading k_s eigenvectors of M_{s,i}(r_tilde).
  Quad<LoadingSpace> loadings;
  /// Full decompositions of M_{s,i}(r_tilde); the complements used by the
  /// residual criterion are their trailing columns.
  Quad<EigenDecomposition> decompositions;
  std::optional<FactorCountEstimate> counts;
  ThresholdEstimate threshold;
  EstimationConfig config;
};

/// Q_{s,i}(r1, r2) for all four spaces.
/// Errors: InvalidArgument (r1 > r2), EmptyRegime, KOutOfRange.
Quad<LoadingSpace> estimate_loadings(const MatrixSeries& x, const ThresholdSeries& z, double r1,
                                     double r2, FactorCounts k, int h0);

/// Ratio estimator on M_{s,i}(eta1, eta2). Ties in the ratio argmin go to the
/// smaller k; ties in the regime-strength argmax go to regime 1.
/// Errors: InvalidArgument (eta1 >= eta2), EmptyRegime.
FactorCountEstimate estimate_factor_counts(const MatrixSeries& x, const ThresholdSeries& z,
                                           double eta1, double eta2, int h0,
                                           double eigen_floor = 1e-300);

/// Orthogonal complements B_{s,i} estimated from the (eta1, eta2) partition.
Quad<LoadingSpace> estimate_complements(const MatrixSeries& x, const ThresholdSeries& z,
                                        double eta1, double eta2, FactorCounts k, int h0);

/// G(r) = sum_{s,i} || B_{s,i}' M_{s,i}(r) B_{s,i} ||_2 at a single threshold.
/// Errors: ShapeMismatch.
double g_hat(const MatrixSeries& x, const ThresholdSeries& z, const Quad<LoadingSpace>& b, double r,
             int h0);
double g_hat(const Quad<Eigen::MatrixXd>& kernels, const Quad<LoadingSpace>& b);

/// Candidate thresholds: sorted distinct z_t strictly inside (eta1, eta2),
/// keeping every stride-th one.
std::vector<double> threshold_grid(const ThresholdSeries& z, double eta1, double eta2,
                                   int stride = 1);

/// r_hat = argmin over the grid of G(r); ties go to the smallest r.
/// Errors: EmptyGrid, EmptyRegime, KOutOfRange.
ThresholdEstimate estimate_threshold(const MatrixSeries& x, const ThresholdSeries& z, double eta1,
                                     double eta2, FactorCounts k, int h0, int stride = 1);

/// Same as estimate_threshold for several factor counts, sharing one kernel
/// sweep. Failures are per entry.
struct ThresholdAttempt {
  std::optional<ThresholdEstimate> estimate;
  std::optional<Error> error;
};
std::vector<ThresholdAttempt> estimate_thresholds(const MatrixSeries& x, const ThresholdSeries& z,
                                                  double eta1, double eta2,
                                                  std::span<const FactorCounts> ks, int h0,
                                                  int stride = 1);

/// Full pipeline: eta from quantiles, factor counts (unless overridden),
/// threshold, final loadings. Errors carry the failing stage.
FittedModel fit(const MatrixSeries& x, const ThresholdSeries& z, const EstimationConfig& config);

/// Pipeline run for several fixed factor counts on one dataset (one sweep).
struct FitAttempt {
  std::optional<FittedModel> model;
  std::optional<Error> error;
};
std::vector<FitAttempt> fit_variants(const MatrixSeries& x, const ThresholdSeries& z,
                                     const EstimationConfig& config,
                                     std::span<const FactorCounts> ks);

/// Out-of-sample residual sum of squares over 0-based times t0..T-1 (the
/// 1-based times t0+1..T), projecting columns on B_{1,i} and rows on B_{2,i}
/// for the regime selected by the model's threshold.
/// Errors: IndexOutOfRange, ShapeMismatch.
double residual_e(const MatrixSeries& x, const ThresholdSeries& z, const FittedModel& model,
                  Index t0);

struct CandidateScore {
  std::string name;
  std::optional<double> e;
  std::optional<FactorCounts> k;
  std::optional<double> r_tilde;
  std::string error;
};

struct NamedThreshold {
  std::string name;
  ThresholdSeries z;
};

/// Fits on t <= t0 = ceil(t0_fraction * T) for each candidate and ranks by
/// the residual criterion on the rest, ascending. All candidates share one k:
/// config.k_override, or else the componentwise minimum of the candidates'
/// ratio estimates on the training slice. Failing candidates are ranked
/// last, in input order.
std::vector<CandidateScore> select_threshold_variable(const MatrixSeries& x,
                                                      std::span<const NamedThreshold> candidates,
                                                      const EstimationConfig& config);

}  // namespace tmfm
