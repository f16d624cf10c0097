#include "tmfm/series.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tmfm/error.hpp"

namespace tmfm {

std::string space_label(Orientation s, Regime i) {
  return "Q" + std::to_string(static_cast<int>(s)) + std::to_string(static_cast<int>(i));
}

std::string to_string(const FactorCounts& k) {
  return std::to_string(k.row) + "x" + std::to_string(k.col);
}

FactorCounts parse_factor_counts(const std::string& text) {
  const auto x = text.find_first_of("xX,");
  if (x == std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "factor counts must look like K1xK2, got '" + text + "'");
  }
  try {
    std::size_t used1 = 0;
    std::size_t used2 = 0;
    const std::string a = text.substr(0, x);
    const std::string b = text.substr(x + 1);
    FactorCounts k{std::stoi(a, &used1), std::stoi(b, &used2)};
    if (used1 != a.size() || used2 != b.size() || k.row < 1 || k.col < 1) throw std::invalid_argument(text);
    return k;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, "factor counts must look like K1xK2 with K >= 1, got '" + text + "'");
  }
}

// ---------------------------------------------------------------------------

MatrixSeries::MatrixSeries(Index rows, Index cols, Eigen::MatrixXd vectorized,
                           std::vector<std::string> labels)
    : rows_(rows), cols_(cols), data_(std::move(vectorized)), labels_(std::move(labels)) {
  if (rows_ < 1 || cols_ < 1) {
    throw Error(ErrorCode::DimensionMismatch, "matrix dimensions must be at least 1x1");
  }
  if (data_.rows() != rows_ * cols_) {
    throw Error(ErrorCode::DimensionMismatch, "vectorized storage has " + std::to_string(data_.rows()) +
                                                  " rows, expected p1*p2 = " + std::to_string(rows_ * cols_));
  }
  if (data_.cols() < 2) {
    throw Error(ErrorCode::DimensionMismatch, "a matrix series needs T >= 2 observations");
  }
  if (!labels_.empty() && static_cast<Index>(labels_.size()) != data_.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "t_index labels must have length T");
  }
  for (Index t = 0; t < data_.cols(); ++t) {
    if (!data_.col(t).allFinite()) {
      throw Error(ErrorCode::NonFiniteValue, "non-finite value in X at t=" + std::to_string(t + 1), t + 1);
    }
  }
}

MatrixSeries MatrixSeries::from_matrices(std::span<const Eigen::MatrixXd> matrices,
                                         std::vector<std::string> labels) {
  if (matrices.empty()) {
    throw Error(ErrorCode::DimensionMismatch, "a matrix series needs T >= 2 observations");
  }
  const Index p1 = matrices.front().rows();
  const Index p2 = matrices.front().cols();
  Eigen::MatrixXd data(p1 * p2, static_cast<Index>(matrices.size()));
  for (std::size_t t = 0; t < matrices.size(); ++t) {
    const auto& m = matrices[t];
    if (m.rows() != p1 || m.cols() != p2) {
      throw Error(ErrorCode::DimensionMismatch,
                  "X_t dimensions change at t=" + std::to_string(t + 1), static_cast<long long>(t + 1));
    }
    data.col(static_cast<Index>(t)) = m.reshaped();
  }
  return MatrixSeries(p1, p2, std::move(data), std::move(labels));
}

MatrixSeries MatrixSeries::transposed() const {
  Eigen::MatrixXd out(data_.rows(), data_.cols());
  for (Index t = 0; t < data_.cols(); ++t) {
    out.col(t) = at(t).transpose().reshaped();
  }
  return MatrixSeries(cols_, rows_, std::move(out), labels_);
}

MatrixSeries MatrixSeries::scaled(double c) const {
  return MatrixSeries(rows_, cols_, data_ * c, labels_);
}

MatrixSeries MatrixSeries::slice(Index begin, Index end) const {
  if (begin < 0 || end > length() || end - begin < 2) {
    throw Error(ErrorCode::IndexOutOfRange, "invalid time slice [" + std::to_string(begin) + ", " +
                                                std::to_string(end) + ")");
  }
  std::vector<std::string> labels;
  if (!labels_.empty()) labels.assign(labels_.begin() + begin, labels_.begin() + end);
  return MatrixSeries(rows_, cols_, data_.middleCols(begin, end - begin), std::move(labels));
}

MatrixSeries MatrixSeries::permute_rows(std::span<const Index> perm) const {
  if (static_cast<Index>(perm.size()) != rows_) {
    throw Error(ErrorCode::ShapeMismatch, "row permutation has wrong length");
  }
  Eigen::MatrixXd out(data_.rows(), data_.cols());
  for (Index t = 0; t < length(); ++t) {
    const auto xt = at(t);
    Eigen::Map<Eigen::MatrixXd> dst(out.col(t).data(), rows_, cols_);
    for (Index a = 0; a < rows_; ++a) dst.row(a) = xt.row(perm[a]);
  }
  return MatrixSeries(rows_, cols_, std::move(out), labels_);
}

// ---------------------------------------------------------------------------

ThresholdSeries::ThresholdSeries(Eigen::VectorXd z) : z_(std::move(z)) {
  for (Index t = 0; t < z_.size(); ++t) {
    if (!std::isfinite(z_[t])) {
      throw Error(ErrorCode::NonFiniteValue, "non-finite threshold value at t=" + std::to_string(t + 1), t + 1);
    }
  }
}

ThresholdSeries::ThresholdSeries(std::initializer_list<double> z)
    : ThresholdSeries(Eigen::Map<const Eigen::VectorXd>(z.begin(), static_cast<Index>(z.size()))) {}

ThresholdSeries ThresholdSeries::slice(Index begin, Index end) const {
  if (begin < 0 || end > length() || end < begin) {
    throw Error(ErrorCode::IndexOutOfRange, "invalid threshold slice");
  }
  return ThresholdSeries(Eigen::VectorXd(z_.segment(begin, end - begin)));
}

Dataset build_dataset(MatrixSeries x, ThresholdSeries z) {
  if (z.length() != x.length()) {
    throw Error(ErrorCode::DimensionMismatch, "threshold series has length " + std::to_string(z.length()) +
                                                  " but X has T = " + std::to_string(x.length()));
  }
  return Dataset{std::move(x), std::move(z)};
}

Dataset build_dataset(std::span<const Eigen::MatrixXd> x, const Eigen::VectorXd& z) {
  if (static_cast<Index>(x.size()) != z.size()) {
    throw Error(ErrorCode::DimensionMismatch, "threshold series has length " + std::to_string(z.size()) +
                                                  " but X has T = " + std::to_string(x.size()));
  }
  return build_dataset(MatrixSeries::from_matrices(x), ThresholdSeries(z));
}

// ---------------------------------------------------------------------------

Index RegimeMask::count() const {
  return std::count(mask.begin(), mask.end(), std::uint8_t{1});
}

RegimeMask regime_mask(const ThresholdSeries& z, double r, Regime regime) {
  RegimeMask out;
  out.regime = regime;
  out.threshold = r;
  out.mask.resize(static_cast<std::size_t>(z.length()));
  for (Index t = 0; t < z.length(); ++t) {
    out.mask[static_cast<std::size_t>(t)] = in_regime(z[t], r, regime) ? 1 : 0;
  }
  return out;
}

double quantile(std::span<const double> z, double q) {
  if (!(q > 0.0 && q < 1.0)) {
    std::ostringstream msg;
    msg << "quantile level must lie in (0,1), got " << q;
    throw Error(ErrorCode::InvalidQuantile, msg.str());
  }
  if (z.empty()) throw Error(ErrorCode::EmptySeries, "quantile of an empty series");
  std::vector<double> sorted(z.begin(), z.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(const ThresholdSeries& z, double q) {
  return quantile(std::span<const double>(z.values().data(), static_cast<std::size_t>(z.length())), q);
}

void EstimationConfig::validate(Index T) const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (h0 < 1) fail("h0 must be a positive integer (h0 >= 1 violated)");
  if (T > 0 && h0 >= T) fail("h0 must be smaller than T (h0 < T violated)");
  if (!(q_lo > 0.0 && q_lo < 1.0) || !(q_hi > 0.0 && q_hi < 1.0)) {
    fail("eta quantiles must lie in (0,1) (0 < q_lo, q_hi < 1 violated)");
  }
  if (!(q_lo < q_hi)) {
    std::ostringstream msg;
    msg << "eta quantiles must be increasing (q_lo<q_hi violated: q_lo=" << q_lo << ", q_hi=" << q_hi << ")";
    fail(msg.str());
  }
  if (!(t0_fraction > 0.0 && t0_fraction < 1.0)) fail("t0_fraction must lie in (0,1)");
  if (!(ridge_tol >= 0.0)) fail("ridge_tol must be non-negative");
  if (grid_stride < 1) fail("grid_stride must be >= 1");
  if (k_override && (k_override->row < 1 || k_override->col < 1)) fail("k_override entries must be >= 1");
}

}  // namespace tmfm
