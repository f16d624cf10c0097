#include "tmfm/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tmfm/error.hpp"
#include "tmfm/spectral.hpp"

namespace tmfm {

void DgpSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (p1 < 1 || p2 < 1) fail("p1 and p2 must be >= 1");
  if (T < 2) fail("T must be >= 2");
  if (k1 < 1 || k1 > p1) fail("k1 must satisfy 1 <= k1 <= p1");
  if (k2 < 1 || k2 > p2) fail("k2 must satisfy 1 <= k2 <= p2");
  if (static_cast<Index>(ar_diag.size()) != static_cast<Index>(k1) * k2) {
    fail("ar_diag must have k1*k2 = " + std::to_string(k1 * k2) + " entries");
  }
  for (double a : ar_diag) {
    if (!(std::abs(a) < 1.0)) {
      throw Error(ErrorCode::NonStationaryAR, "AR coefficient " + std::to_string(a) + " is not inside (-1, 1)");
    }
  }
  for (double d : delta) {
    if (!(d >= 0.0 && d <= 1.0)) fail("factor strengths delta must lie in [0, 1]");
  }
  for (double b : beta) {
    if (!(b >= 0.0 && b <= 1.0)) fail("threshold strengths beta must lie in [0, 1]");
  }
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) fail("noise_scale must be finite and >= 0");
  if (!std::isfinite(r0)) fail("r0 must be finite");
  if (burn_in < 0) fail("burn_in must be >= 0");
  equicorrelation(p1, noise_offdiag);
  equicorrelation(p2, noise_offdiag);
}

const Eigen::MatrixXd& SimulationTruth::loading(Orientation s, Regime i) const {
  if (s == Orientation::Row) return i == Regime::One ? R1 : R2;
  return i == Regime::One ? C1 : C2;
}

Eigen::MatrixXd gen_loading(Index p, int k, double delta, Rng& rng) {
  const double half = std::pow(static_cast<double>(p), -delta / 2.0);
  Eigen::MatrixXd out(p, k);
  for (Index c = 0; c < k; ++c) {
    for (Index r = 0; r < p; ++r) out(r, c) = rng.uniform(-half, half);
  }
  return out;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> gen_loading_pair(Index p, int k, double delta1,
                                                             double delta2, double beta, Rng& rng) {
  Eigen::MatrixXd base = gen_loading(p, k, 0.0, rng);
  const double pd = static_cast<double>(p);
  Eigen::MatrixXd first = std::pow(pd, -delta1 / 2.0) * base;

  const Index cells = p * k;
  auto n = static_cast<Index>(std::llround(static_cast<double>(k) * std::pow(pd, beta)));
  n = std::clamp<Index>(n, 0, cells);
  // Partial Fisher-Yates: the first n slots become a uniform sample of
  // distinct positions.
  std::vector<Index> pos(static_cast<std::size_t>(cells));
  std::iota(pos.begin(), pos.end(), Index{0});
  for (Index a = 0; a < n; ++a) {
    const auto b = a + static_cast<Index>(rng.below(static_cast<std::uint64_t>(cells - a)));
    std::swap(pos[static_cast<std::size_t>(a)], pos[static_cast<std::size_t>(b)]);
  }
  for (Index a = 0; a < n; ++a) base.data()[pos[static_cast<std::size_t>(a)]] = rng.uniform(-1.0, 1.0);
  Eigen::MatrixXd second = std::pow(pd, -delta2 / 2.0) * base;
  return {std::move(first), std::move(second)};
}

MatrixSeries gen_factors_var1(Index T, int k1, int k2, std::span<const double> ar_diag, Rng& rng,
                              int burn_in) {
  const Index n = static_cast<Index>(k1) * k2;
  if (static_cast<Index>(ar_diag.size()) != n) {
    throw Error(ErrorCode::InvalidArgument, "ar_diag must have k1*k2 entries");
  }
  for (double a : ar_diag) {
    if (!(std::abs(a) < 1.0)) {
      throw Error(ErrorCode::NonStationaryAR, "AR coefficient " + std::to_string(a) + " is not inside (-1, 1)");
    }
  }
  Eigen::VectorXd state(n);
  for (Index j = 0; j < n; ++j) state[j] = rng.normal() / std::sqrt(1.0 - ar_diag[j] * ar_diag[j]);
  auto step = [&] {
    for (Index j = 0; j < n; ++j) state[j] = ar_diag[j] * state[j] + rng.normal();
  };
  for (int b = 0; b < burn_in; ++b) step();
  Eigen::MatrixXd out(n, T);
  for (Index t = 0; t < T; ++t) {
    step();
    out.col(t) = state;
  }
  return MatrixSeries(k1, k2, std::move(out));
}

Eigen::MatrixXd equicorrelation(Index p, double offdiag) {
  // eigenvalues: 1 - offdiag (multiplicity p-1) and 1 + (p-1) offdiag
  const double lo = p > 1 ? std::min(1.0 - offdiag, 1.0 + static_cast<double>(p - 1) * offdiag) : 1.0;
  if (!(lo > 0.0)) {
    throw Error(ErrorCode::NotPositiveDefinite,
                "noise correlation with off-diagonal " + std::to_string(offdiag) + " is not positive definite for p = " +
                    std::to_string(p));
  }
  Eigen::MatrixXd g = Eigen::MatrixXd::Constant(p, p, offdiag);
  g.diagonal().setOnes();
  return g;
}

MatrixSeries gen_noise_kronecker(Index T, Index p1, Index p2, double offdiag, Rng& rng) {
  const Eigen::MatrixXd g1 = sym_sqrt(equicorrelation(p1, offdiag));
  const Eigen::MatrixXd g2 = sym_sqrt(equicorrelation(p2, offdiag));
  Eigen::MatrixXd out(p1 * p2, T);
  Eigen::MatrixXd z(p1, p2);
  for (Index t = 0; t < T; ++t) {
    for (Index k = 0; k < z.size(); ++k) z.data()[k] = rng.normal();
    Eigen::Map<Eigen::MatrixXd>(out.col(t).data(), p1, p2).noalias() = g1 * z * g2;
  }
  return MatrixSeries(p1, p2, std::move(out));
}

SimulatedDataset simulate_dataset(const DgpSpec& spec, const Rng& rng) {
  spec.validate();
  Rng loadings = rng.substream(1);
  Rng threshold = rng.substream(2);
  Rng factors = rng.substream(3);
  Rng noise = rng.substream(4);

  SimulationTruth truth;
  truth.spec = spec;
  truth.r0 = spec.r0;
  if (spec.loading_mode == LoadingMode::Independent) {
    truth.R1 = gen_loading(spec.p1, spec.k1, spec.delta[0], loadings);
    truth.R2 = gen_loading(spec.p1, spec.k1, spec.delta[1], loadings);
    truth.C1 = gen_loading(spec.p2, spec.k2, spec.delta[2], loadings);
    truth.C2 = gen_loading(spec.p2, spec.k2, spec.delta[3], loadings);
  } else {
    std::tie(truth.R1, truth.R2) =
        gen_loading_pair(spec.p1, spec.k1, spec.delta[0], spec.delta[1], spec.beta[0], loadings);
    std::tie(truth.C1, truth.C2) =
        gen_loading_pair(spec.p2, spec.k2, spec.delta[2], spec.delta[3], spec.beta[1], loadings);
  }

  Eigen::VectorXd z(spec.T);
  for (Index t = 0; t < spec.T; ++t) z[t] = threshold.normal();

  truth.factors = gen_factors_var1(spec.T, spec.k1, spec.k2, spec.ar_diag, factors, spec.burn_in);
  const Index n = spec.p1 * spec.p2;
  if (spec.noise_scale > 0.0) {
    truth.noise = gen_noise_kronecker(spec.T, spec.p1, spec.p2, spec.noise_offdiag, noise)
                      .scaled(spec.noise_scale);
  } else {
    truth.noise = MatrixSeries(spec.p1, spec.p2, Eigen::MatrixXd::Zero(n, spec.T));
  }

  Eigen::MatrixXd x(n, spec.T);
  for (Index t = 0; t < spec.T; ++t) {
    const bool one = in_regime(z[t], spec.r0, Regime::One);
    const Eigen::MatrixXd& r = one ? truth.R1 : truth.R2;
    const Eigen::MatrixXd& c = one ? truth.C1 : truth.C2;
    Eigen::Map<Eigen::MatrixXd> xt(x.col(t).data(), spec.p1, spec.p2);
    xt.noalias() = r * truth.factors.at(t) * c.transpose();
    xt += truth.noise.at(t);
  }
  return SimulatedDataset{MatrixSeries(spec.p1, spec.p2, std::move(x)), ThresholdSeries(std::move(z)),
                          std::move(truth)};
}

SimulatedDataset simulate_dataset(const DgpSpec& spec) { return simulate_dataset(spec, Rng(spec.seed, 0)); }

}  // namespace tmfm
