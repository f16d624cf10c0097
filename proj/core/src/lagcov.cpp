#include "tmfm/lagcov.hpp"

#include <algorithm>
#include <numeric>

#include "tmfm/error.hpp"

namespace tmfm {
namespace {

void check_lag(int h0, Index T) {
  if (h0 < 1) throw Error(ErrorCode::InvalidArgument, "lag horizon must be >= 1");
  if (h0 >= T) {
    throw Error(ErrorCode::LagTooLarge,
                "lag " + std::to_string(h0) + " is not smaller than T = " + std::to_string(T));
  }
}

void check_aligned(const MatrixSeries& x, const ThresholdSeries& z) {
  if (x.length() != z.length()) {
    throw Error(ErrorCode::DimensionMismatch, "threshold series and X have different lengths");
  }
}

double threshold_for(Regime i, double r1, double r2) { return i == Regime::One ? r1 : r2; }

// S = (1/T) sum_{t active} vec(X_t) vec(X_{t+h})'
Eigen::MatrixXd cross_product(const Eigen::MatrixXd& v, std::span<const Index> active, int h) {
  const Index n = v.rows();
  const auto T = static_cast<double>(v.cols());
  const auto count = static_cast<Index>(active.size());
  if (count == 0) return Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd lag(n, count);
  Eigen::MatrixXd lead(n, count);
  for (Index c = 0; c < count; ++c) {
    lag.col(c) = v.col(active[static_cast<std::size_t>(c)]);
    lead.col(c) = v.col(active[static_cast<std::size_t>(c)] + h);
  }
  Eigen::MatrixXd s(n, n);
  s.noalias() = lag * lead.transpose();
  s /= T;
  return s;
}

// Row kernel contribution: sum_m S_m S_m' with S_m the p1 x N block of rows
// belonging to column m of X_t. Viewing S's storage as p1 x (p2 N) turns this
// into one symmetric product.
void add_row_gram(const Eigen::MatrixXd& s, Index p1, Index p2, Eigen::MatrixXd& g) {
  Eigen::Map<const Eigen::MatrixXd> wide(s.data(), p1, p2 * s.cols());
  g.noalias() += wide * wide.transpose();
}

// Column kernel contribution: entry (m, m') is the Frobenius inner product of
// the row blocks m and m', i.e. sum over lead coordinates of B_c' B_c with B_c
// column c of S reshaped to p1 x p2.
void add_col_gram(const Eigen::MatrixXd& s, Index p1, Index p2, Eigen::MatrixXd& g) {
  for (Index c = 0; c < s.cols(); ++c) {
    Eigen::Map<const Eigen::MatrixXd> b(s.col(c).data(), p1, p2);
    g.noalias() += b.transpose() * b;
  }
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

std::vector<Index> active_times(const ThresholdSeries& z, int h, Regime i, Regime j, double r1,
                                double r2) {
  std::vector<Index> active;
  const double ri = threshold_for(i, r1, r2);
  const double rj = threshold_for(j, r1, r2);
  for (Index t = 0; t + h < z.length(); ++t) {
    if (in_regime(z[t], ri, i) && in_regime(z[t + h], rj, j)) active.push_back(t);
  }
  return active;
}

struct GramPair {
  Eigen::MatrixXd row;
  Eigen::MatrixXd col;
};

GramPair kernels_for_regime(const MatrixSeries& x, const ThresholdSeries& z, Regime i, double r1,
                            double r2, int h0, bool want_row, bool want_col) {
  const Index p1 = x.rows();
  const Index p2 = x.cols();
  GramPair out{Eigen::MatrixXd::Zero(p1, p1), Eigen::MatrixXd::Zero(p2, p2)};
  for (int h = 1; h <= h0; ++h) {
    for (Regime j : kRegimes) {
      const auto active = active_times(z, h, i, j, r1, r2);
      if (active.empty()) continue;
      const Eigen::MatrixXd s = cross_product(x.vectorized(), active, h);
      if (want_row) add_row_gram(s, p1, p2, out.row);
      if (want_col) add_col_gram(s, p1, p2, out.col);
    }
  }
  out.row = symmetrized(out.row);
  out.col = symmetrized(out.col);
  return out;
}

}  // namespace

OmegaBlock omega_hat(const MatrixSeries& x, const ThresholdSeries& z, int h, Regime i, Regime j,
                     Index m, Index l, double r1, double r2, Orientation orientation) {
  check_aligned(x, z);
  check_lag(h, x.length());
  const MatrixSeries xs = x.oriented(orientation);
  if (m < 0 || l < 0 || m >= xs.cols() || l >= xs.cols()) {
    throw Error(ErrorCode::IndexOutOfRange, "column index out of range for omega_hat");
  }
  const Index T = xs.length();
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(xs.rows(), xs.rows());
  for (const Index t : active_times(z, h, i, j, r1, r2)) {
    omega.noalias() += xs.at(t).col(m) * xs.at(t + h).col(l).transpose();
  }
  omega /= static_cast<double>(T);
  return OmegaBlock{std::move(omega), h, i, j, m, l, r1, r2};
}

LagCovKernel m_hat(const MatrixSeries& x, const ThresholdSeries& z, Orientation orientation,
                   Regime regime, double r1, double r2, int h0) {
  check_aligned(x, z);
  check_lag(h0, x.length());
  const bool row = orientation == Orientation::Row;
  GramPair g = kernels_for_regime(x, z, regime, r1, r2, h0, row, !row);
  return LagCovKernel{row ? std::move(g.row) : std::move(g.col), orientation, regime, r1, r2, h0};
}

Quad<LagCovKernel> m_hat_all(const MatrixSeries& x, const ThresholdSeries& z, double r1, double r2,
                             int h0) {
  check_aligned(x, z);
  check_lag(h0, x.length());
  Quad<LagCovKernel> out;
  for (Regime i : kRegimes) {
    GramPair g = kernels_for_regime(x, z, i, r1, r2, h0, true, true);
    out.at(Orientation::Row, i) = LagCovKernel{std::move(g.row), Orientation::Row, i, r1, r2, h0};
    out.at(Orientation::Column, i) = LagCovKernel{std::move(g.col), Orientation::Column, i, r1, r2, h0};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Incremental sweep.
//
// State per (h, i, j): S = (1/T) sum_t c_t vec(X_t) vec(X_{t+h})' with
// c_t = I_{t,i}(r) I_{t+h,j}(r). A term toggling by delta changes S by
// d y x' (d = delta / T, y = vec(X_t), x = vec(X_{t+h})). Writing the row
// kernel as A A' where A is S's storage viewed as p1 x (p2 N):
//
//   dG_row = d (W Y' + Y W') + d^2 |x|^2 Y Y'
//
// with w = S x (before the update) and W, Y the p1 x p2 reshapes of w, y. The
// column kernel uses the same w with W', Y' in place of W, Y.

namespace {

class SweepState {
 public:
  SweepState(const MatrixSeries& x, const ThresholdSeries& z, int h0, double r_start)
      : v_(x.vectorized()), z_(z), p1_(x.rows()), p2_(x.cols()), T_(x.length()), h0_(h0) {
    const Index n = v_.rows();
    lead_sq_norm_.resize(T_);
    for (Index t = 0; t < T_; ++t) lead_sq_norm_[t] = v_.col(t).squaredNorm();

    in_one_.resize(static_cast<std::size_t>(T_));
    for (Index t = 0; t < T_; ++t) in_one_[static_cast<std::size_t>(t)] = z_[t] < r_start ? 1 : 0;

    order_.resize(static_cast<std::size_t>(T_));
    std::iota(order_.begin(), order_.end(), Index{0});
    std::stable_sort(order_.begin(), order_.end(), [&](Index a, Index b) { return z_[a] < z_[b]; });
    while (next_ < order_.size() && in_one_[static_cast<std::size_t>(order_[next_])]) ++next_;

    cross_.resize(static_cast<std::size_t>(h0_) * 4);
    for (Regime i : kRegimes) {
      gram_.at(Orientation::Row, i) = Eigen::MatrixXd::Zero(p1_, p1_);
      gram_.at(Orientation::Column, i) = Eigen::MatrixXd::Zero(p2_, p2_);
    }
    for (int h = 1; h <= h0_; ++h) {
      for (Regime i : kRegimes) {
        for (Regime j : kRegimes) {
          auto active = active_times(z_, h, i, j, r_start, r_start);
          Eigen::MatrixXd& s = cross(h, i, j);
          s = cross_product(v_, active, h);
          if (s.rows() != n) s = Eigen::MatrixXd::Zero(n, n);
          add_row_gram(s, p1_, p2_, gram_.at(Orientation::Row, i));
          add_col_gram(s, p1_, p2_, gram_.at(Orientation::Column, i));
        }
      }
    }
    w_.resize(n);
  }

  // Moves every t with z_t < r into regime 1.
  void advance_to(double r) {
    while (next_ < order_.size() && z_[order_[next_]] < r) {
      flip(order_[next_]);
      ++next_;
    }
  }

  Quad<Eigen::MatrixXd> kernels() const {
    Quad<Eigen::MatrixXd> out;
    for (std::size_t k = 0; k < 4; ++k) out.items[k] = symmetrized(gram_.items[k]);
    return out;
  }

 private:
  Eigen::MatrixXd& cross(int h, Regime i, Regime j) {
    const auto slot = static_cast<std::size_t>(h - 1) * 4 + (static_cast<std::size_t>(i) - 1) * 2 +
                      (static_cast<std::size_t>(j) - 1);
    return cross_[slot];
  }

  Regime regime_of(Index t) const {
    return in_one_[static_cast<std::size_t>(t)] ? Regime::One : Regime::Two;
  }

  // Time index u moves from regime 2 to regime 1.
  void flip(Index u) {
    for (int h = 1; h <= h0_; ++h) {
      if (u + h < T_) {
        // term t = u: first indicator changes, lead regime is fixed
        const Regime j = regime_of(u + h);
        toggle(u, h, Regime::One, j, +1.0);
        toggle(u, h, Regime::Two, j, -1.0);
      }
      if (u - h >= 0) {
        // term t = u - h: lead indicator changes
        const Regime i = regime_of(u - h);
        toggle(u - h, h, i, Regime::One, +1.0);
        toggle(u - h, h, i, Regime::Two, -1.0);
      }
    }
    in_one_[static_cast<std::size_t>(u)] = 1;
  }

  void toggle(Index t, int h, Regime i, Regime j, double delta) {
    Eigen::MatrixXd& s = cross(h, i, j);
    const auto y = v_.col(t);
    const auto x = v_.col(t + h);
    const double d = delta / static_cast<double>(T_);

    // w = S x with the old S, then S += d y x', in one pass over S.
    w_.setZero();
    for (Index c = 0; c < s.cols(); ++c) {
      const double xc = x[c];
      auto sc = s.col(c);
      w_.noalias() += xc * sc;
      sc.noalias() += (d * xc) * y;
    }

    const Eigen::Map<const Eigen::MatrixXd> wm(w_.data(), p1_, p2_);
    const Eigen::Map<const Eigen::MatrixXd> ym(y.data(), p1_, p2_);
    const double quad = d * d * lead_sq_norm_[t + h];

    Eigen::MatrixXd cross_term(p1_, p1_);
    cross_term.noalias() = wm * ym.transpose();
    Eigen::MatrixXd& gr = gram_.at(Orientation::Row, i);
    gr += d * (cross_term + cross_term.transpose());
    gr.noalias() += quad * (ym * ym.transpose());

    Eigen::MatrixXd cross_col(p2_, p2_);
    cross_col.noalias() = wm.transpose() * ym;
    Eigen::MatrixXd& gc = gram_.at(Orientation::Column, i);
    gc += d * (cross_col + cross_col.transpose());
    gc.noalias() += quad * (ym.transpose() * ym);
  }

  const Eigen::MatrixXd& v_;
  const ThresholdSeries& z_;
  Index p1_, p2_, T_;
  int h0_;
  Eigen::VectorXd lead_sq_norm_;
  std::vector<std::uint8_t> in_one_;
  std::vector<Index> order_;
  std::size_t next_ = 0;
  std::vector<Eigen::MatrixXd> cross_;
  Quad<Eigen::MatrixXd> gram_;
  Eigen::VectorXd w_;
};

}  // namespace

void sweep_kernels(const MatrixSeries& x, const ThresholdSeries& z, std::span<const double> grid,
                   int h0, const SweepVisitor& visit) {
  check_aligned(x, z);
  check_lag(h0, x.length());
  if (grid.empty()) throw Error(ErrorCode::EmptyGrid, "threshold grid is empty");
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (!(grid[g] > grid[g - 1])) {
      throw Error(ErrorCode::InvalidArgument, "threshold grid must be strictly increasing");
    }
  }
  SweepState state(x, z, h0, grid[0]);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    state.advance_to(grid[g]);
    visit(g, grid[g], state.kernels());
  }
}

std::vector<LagCovKernel> m_hat_sweep(const MatrixSeries& x, const ThresholdSeries& z,
                                      Orientation orientation, Regime regime,
                                      std::span<const double> grid, int h0) {
  std::vector<LagCovKernel> out;
  out.reserve(grid.size());
  sweep_kernels(x, z, grid, h0, [&](std::size_t, double r, const Quad<Eigen::MatrixXd>& k) {
    out.push_back(LagCovKernel{k.at(orientation, regime), orientation, regime, r, r, h0});
  });
  return out;
}

}  // namespace tmfm
