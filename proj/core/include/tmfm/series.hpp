#pragma once

// Core data model: matrix-valued series, the paired threshold variable,
// regime indicator masks and the shared estimation configuration.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tmfm {

using Index = Eigen::Index;

/// Which side of X_t a loading space lives on: Row uses X_t, Column uses X_t'.
enum class Orientation { Row = 1, Column = 2 };

/// Regime 1 is active when z_t < r, regime 2 when z_t >= r.
enum class Regime { One = 1, Two = 2 };

inline constexpr std::array<Orientation, 2> kOrientations{Orientation::Row, Orientation::Column};
inline constexpr std::array<Regime, 2> kRegimes{Regime::One, Regime::Two};

/// One value per (orientation, regime) pair, i.e. per loading space Q_{s,i}.
/// Iteration order is Q11, Q12, Q21, Q22 (orientation-major).
template <class T>
struct Quad {
  std::array<T, 4> items{};

  static constexpr std::size_t slot(Orientation s, Regime i) {
    return (static_cast<std::size_t>(s) - 1) * 2 + (static_cast<std::size_t>(i) - 1);
  }
  T& at(Orientation s, Regime i) { return items[slot(s, i)]; }
  const T& at(Orientation s, Regime i) const { return items[slot(s, i)]; }
};

/// Short label "Q{s}{i}" used in serialized outputs.
std::string space_label(Orientation s, Regime i);

/// Number of factors along the row (k1) and column (k2) directions.
struct FactorCounts {
  int row = 0;
  int col = 0;

  int along(Orientation s) const { return s == Orientation::Row ? row : col; }
  friend bool operator==(const FactorCounts&, const FactorCounts&) = default;
  friend auto operator<=>(const FactorCounts&, const FactorCounts&) = default;
};

std::string to_string(const FactorCounts& k);  // "3x3"
FactorCounts parse_factor_counts(const std::string& text);

/// T observations of a p1 x p2 matrix. Stored as a (p1*p2) x T matrix whose
/// column t is vec(X_t) in column-major order, which is what every kernel
/// computation consumes.
class MatrixSeries {
 public:
  MatrixSeries() = default;
  MatrixSeries(Index rows, Index cols, Eigen::MatrixXd vectorized,
               std::vector<std::string> labels = {});

  static MatrixSeries from_matrices(std::span<const Eigen::MatrixXd> matrices,
                                    std::vector<std::string> labels = {});

  Index length() const { return data_.cols(); }
  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index rows(Orientation s) const { return s == Orientation::Row ? rows_ : cols_; }

  Eigen::Map<const Eigen::MatrixXd> at(Index t) const {
    return {data_.col(t).data(), rows_, cols_};
  }
  const Eigen::MatrixXd& vectorized() const { return data_; }
  const std::vector<std::string>& labels() const { return labels_; }

  MatrixSeries transposed() const;
  MatrixSeries scaled(double c) const;
  /// Time slice [begin, end) with 0-based indices.
  MatrixSeries slice(Index begin, Index end) const;
  /// Apply the same row permutation to every X_t: new row a = old row perm[a].
  MatrixSeries permute_rows(std::span<const Index> perm) const;

  /// X_t for Row orientation, X_t' for Column orientation.
  MatrixSeries oriented(Orientation s) const {
    return s == Orientation::Row ? *this : transposed();
  }

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  Eigen::MatrixXd data_;
  std::vector<std::string> labels_;
};

class ThresholdSeries {
 public:
  ThresholdSeries() = default;
  explicit ThresholdSeries(Eigen::VectorXd z);
  ThresholdSeries(std::initializer_list<double> z);

  Index length() const { return z_.size(); }
  double operator[](Index t) const { return z_[t]; }
  const Eigen::VectorXd& values() const { return z_; }
  ThresholdSeries slice(Index begin, Index end) const;

 private:
  Eigen::VectorXd z_;
};

struct Dataset {
  MatrixSeries x;
  ThresholdSeries z;
};

/// Validates shapes and finiteness and pairs the series.
/// Errors: DimensionMismatch, NonFiniteValue (index = 1-based t).
Dataset build_dataset(std::span<const Eigen::MatrixXd> x, const Eigen::VectorXd& z);
Dataset build_dataset(MatrixSeries x, ThresholdSeries z);

struct RegimeMask {
  std::vector<std::uint8_t> mask;
  Regime regime = Regime::One;
  double threshold = 0.0;

  Index count() const;
};

/// I(z_t < r) for regime 1, I(z_t >= r) for regime 2.
inline bool in_regime(double z, double r, Regime regime) {
  return regime == Regime::One ? z < r : z >= r;
}

RegimeMask regime_mask(const ThresholdSeries& z, double r, Regime regime);

/// Type-7 order-statistic quantile (linear interpolation between adjacent
/// order statistics). Errors: InvalidQuantile when q is outside (0,1),
/// EmptySeries when z is empty.
double quantile(std::span<const double> z, double q);
double quantile(const ThresholdSeries& z, double q);

struct EstimationConfig {
  int h0 = 2;
  double q_lo = 0.25;
  double q_hi = 0.75;
  std::optional<FactorCounts> k_override;
  double t0_fraction = 0.75;
  /// Eigenvalues at or below this floor end the usable range of the
  /// eigenvalue-ratio curve.
  double ridge_tol = 1e-300;
  /// Evaluate every n-th threshold candidate; 1 evaluates all of them.
  int grid_stride = 1;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument naming the violated constraint. T = 0 skips the
  /// h0 < T check.
  void validate(Index T = 0) const;
};

}  // namespace tmfm
