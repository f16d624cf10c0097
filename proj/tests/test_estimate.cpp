#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "oracles.hpp"
#include "tmfm/error.hpp"
#include "tmfm/estimate.hpp"
#include "tmfm/simulate.hpp"

using namespace tmfm;
using Eigen::MatrixXd;

namespace {

SimulatedDataset strong(Index p, Index T, std::uint64_t seed, double noise = 1.0) {
  DgpSpec spec;
  spec.p1 = p;
  spec.p2 = p;
  spec.T = T;
  spec.noise_scale = noise;
  spec.seed = seed;
  return simulate_dataset(spec);
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a tmfm::Error");
  return ErrorCode::InvalidArgument;
}

double max_distance(const Quad<LoadingSpace>& a, const Quad<LoadingSpace>& b) {
  double d = 0.0;
  for (std::size_t q = 0; q < 4; ++q) d = std::max(d, space_distance(a.items[q], b.items[q]));
  return d;
}

}  // namespace

TEST_CASE("estimate_loadings recovers noiseless loadings at the true threshold") {
  const auto d = strong(20, 800, 1, 0.0);
  const auto q = estimate_loadings(d.x, d.z, 0.0, 0.0, {3, 3}, 2);
  CHECK(space_distance(q.at(Orientation::Row, Regime::One), LoadingSpace::span_of(d.truth.R1)) <= 0.05);
  CHECK(space_distance(q.at(Orientation::Column, Regime::Two), LoadingSpace::span_of(d.truth.C2)) <= 0.05);
  for (const auto& s : q.items) {
    CHECK((s.basis.transpose() * s.basis - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("estimate_loadings errors and scale invariance") {
  const auto d = strong(8, 200, 2);
  const double lo = d.z.values().minCoeff();
  try {
    estimate_loadings(d.x, d.z, lo - 1.0, 0.0, {2, 2}, 2);
    FAIL("expected EmptyRegime");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyRegime);
    CHECK(std::string(e.what()).find("regime 1") != std::string::npos);
  }
  CHECK(code_of([&] { estimate_loadings(d.x, d.z, 0.5, 0.0, {2, 2}, 2); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { estimate_loadings(d.x, d.z, 0.0, 0.0, {9, 2}, 2); }) == ErrorCode::KOutOfRange);

  const auto a = estimate_loadings(d.x, d.z, -0.2, 0.3, {3, 3}, 2);
  const auto b = estimate_loadings(d.x.scaled(5.0), d.z, -0.2, 0.3, {3, 3}, 2);
  CHECK(max_distance(a, b) <= 1e-9);
}

TEST_CASE("factor counts on noiseless rank-(2,2) one-regime data") {
  DgpSpec spec;
  spec.p1 = 10;
  spec.p2 = 8;
  spec.T = 400;
  spec.k1 = 2;
  spec.k2 = 2;
  spec.ar_diag = {0.8, -0.7, 0.6, 0.9};
  spec.noise_scale = 0.0;
  auto d = simulate_dataset(spec);
  // one regime: regime-2 loadings equal regime-1 loadings
  Eigen::MatrixXd x(80, 400);
  for (Index t = 0; t < 400; ++t) {
    const MatrixXd xt = d.truth.R1 * d.truth.factors.at(t) * d.truth.C1.transpose();
    x.col(t) = Eigen::Map<const Eigen::VectorXd>(xt.data(), 80);
  }
  const MatrixSeries series(10, 8, x);
  const auto est = estimate_factor_counts(series, d.z, quantile(d.z, 0.25), quantile(d.z, 0.75), 2);
  CHECK(est.k_hat == FactorCounts{2, 2});
  CHECK(est.ratio_curves.at(Orientation::Row, Regime::One).size() == 5);
  CHECK(est.ratio_curves.at(Orientation::Column, Regime::Two).size() == 4);
  for (Orientation s : kOrientations) {
    const auto q = est.chosen_regime[static_cast<std::size_t>(s) - 1];
    const auto other = q == Regime::One ? Regime::Two : Regime::One;
    CHECK(est.kernel_norms.at(s, q) >= est.kernel_norms.at(s, other));
    if (est.kernel_norms.at(s, Regime::One) == est.kernel_norms.at(s, Regime::Two)) CHECK(q == Regime::One);
    for (Regime i : kRegimes) {
      const int k = est.k_per_space.at(s, i);
      CHECK(k >= 1);
      CHECK(k <= static_cast<int>(est.ratio_curves.at(s, i).size()));
    }
  }
}

TEST_CASE("factor counts: degenerate spectrum and argument checks") {
  const auto d = strong(6, 100, 3);
  const MatrixSeries zero(6, 6, Eigen::MatrixXd::Zero(36, 100));
  const auto est = estimate_factor_counts(zero, d.z, -0.5, 0.5, 2);
  CHECK(est.degenerate_spectrum);
  CHECK(est.k_hat == FactorCounts{1, 1});
  CHECK(std::isinf(est.ratio_curves.at(Orientation::Row, Regime::One).front()));
  CHECK(code_of([&] { estimate_factor_counts(d.x, d.z, 0.5, -0.5, 2); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { estimate_factor_counts(d.x, d.z, 5.0, 6.0, 2); }) == ErrorCode::EmptyRegime);
}

TEST_CASE("G vanishes at the true threshold on noiseless data") {
  const auto d = strong(10, 3000, 4, 0.0);
  const double eta1 = quantile(d.z, 0.25), eta2 = quantile(d.z, 0.75);
  const auto b = estimate_complements(d.x, d.z, eta1, eta2, {3, 3}, 2);
  const double at_r0 = g_hat(d.x, d.z, b, 0.0, 2);
  const auto th = estimate_threshold(d.x, d.z, eta1, eta2, {3, 3}, 2);
  const double peak = *std::max_element(th.g_values.begin(), th.g_values.end());
  CHECK(at_r0 <= 1e-6 * peak);
  CHECK(std::abs(th.r_hat) < 0.05);
}

TEST_CASE("g_hat: projection annihilates the kept direction; shape checks") {
  Eigen::VectorXd a(3);
  a << 1, 0.5, -1;
  const MatrixXd rank1 = a * a.transpose();
  Quad<MatrixXd> kernels;
  Quad<LoadingSpace> b;
  for (std::size_t q = 0; q < 4; ++q) {
    kernels.items[q] = rank1;
    b.items[q] = complement(sym_eigen(rank1), 2, Orientation::Row, Regime::One);
  }
  CHECK(g_hat(kernels, b) <= 1e-12);
  b.items[2].basis = MatrixXd::Identity(4, 1);
  CHECK(code_of([&] { g_hat(kernels, b); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("G curve scales by c^4 and keeps its argmin") {
  const auto d = strong(8, 300, 5);
  const double eta1 = quantile(d.z, 0.25), eta2 = quantile(d.z, 0.75);
  const auto a = estimate_threshold(d.x, d.z, eta1, eta2, {3, 3}, 2);
  const auto b = estimate_threshold(d.x.scaled(5.0), d.z, eta1, eta2, {3, 3}, 2);
  CHECK(a.r_hat == b.r_hat);
  REQUIRE(a.g_values.size() == b.g_values.size());
  for (std::size_t g = 0; g < a.g_values.size(); ++g) {
    CHECK(b.g_values[g] == doctest::Approx(625.0 * a.g_values[g]).epsilon(1e-9));
    CHECK(a.g_values[g] >= 0.0);
  }
  // r_hat is the first minimiser and lies inside (eta1, eta2)
  const auto best = std::min_element(a.g_values.begin(), a.g_values.end()) - a.g_values.begin();
  CHECK(a.r_hat == a.grid[static_cast<std::size_t>(best)]);
  CHECK(a.r_hat > eta1);
  CHECK(a.r_hat < eta2);
}

TEST_CASE("threshold search grid edge cases") {
  const auto d = strong(6, 41, 6);
  // sorted z: ten -1, ten 0, a single 1, ten 2, ten 3, so eta = (0, 2)
  Eigen::VectorXd zv(41);
  for (Index t = 0; t < 41; ++t) zv[t] = t < 10 ? -1.0 : t < 20 ? 0.0 : t == 20 ? 1.0 : t < 31 ? 2.0 : 3.0;
  const ThresholdSeries z(zv);
  CHECK(quantile(z, 0.25) == 0.0);
  CHECK(quantile(z, 0.75) == 2.0);
  const auto th = estimate_threshold(d.x, z, 0.0, 2.0, {2, 2}, 2);
  REQUIRE(th.grid.size() == 1);
  CHECK(th.r_hat == 1.0);

  Eigen::VectorXd flat = zv;
  flat[20] = 0.0;
  const ThresholdSeries zf(flat);
  CHECK(code_of([&] { estimate_threshold(d.x, zf, 0.0, 2.0, {2, 2}, 2); }) == ErrorCode::EmptyGrid);

  // all-zero data: G is identically zero, so the smallest candidate wins
  const MatrixSeries zero(6, 6, Eigen::MatrixXd::Zero(36, 41));
  const auto tie = estimate_threshold(zero, d.z, quantile(d.z, 0.25), quantile(d.z, 0.75), {2, 2}, 2);
  CHECK(tie.r_hat == tie.grid.front());
}

TEST_CASE("estimate_thresholds shares the sweep across factor counts") {
  const auto d = strong(8, 300, 7);
  const double eta1 = quantile(d.z, 0.25), eta2 = quantile(d.z, 0.75);
  const std::vector<FactorCounts> ks{{3, 3}, {2, 2}, {8, 1}, {4, 4}};
  const auto all = estimate_thresholds(d.x, d.z, eta1, eta2, ks, 2);
  REQUIRE(all.size() == 4);
  CHECK(all[2].error);
  CHECK(all[2].error->code() == ErrorCode::KOutOfRange);
  for (std::size_t v : {0u, 1u, 3u}) {
    const auto single = estimate_threshold(d.x, d.z, eta1, eta2, ks[v], 2);
    REQUIRE(all[v].estimate);
    CHECK(all[v].estimate->r_hat == single.r_hat);
    for (std::size_t g = 0; g < single.g_values.size(); ++g) {
      CHECK(all[v].estimate->g_values[g] == doctest::Approx(single.g_values[g]).epsilon(1e-12));
    }
  }
}

TEST_CASE("fit with k_override matches estimate_threshold; stages are tagged") {
  const auto d = strong(10, 400, 8);
  EstimationConfig config;
  config.k_override = FactorCounts{3, 3};
  const auto model = fit(d.x, d.z, config);
  const auto th = estimate_threshold(d.x, d.z, quantile(d.z, 0.25), quantile(d.z, 0.75), {3, 3}, 2);
  CHECK(model.r_tilde == th.r_hat);
  CHECK(!model.counts);
  CHECK(model.threshold.g_values == th.g_values);
  const auto direct = estimate_loadings(d.x, d.z, model.r_tilde, model.r_tilde, {3, 3}, 2);
  CHECK(max_distance(model.loadings, direct) <= 1e-12);

  const ThresholdSeries flat(Eigen::VectorXd::Zero(400));
  try {
    fit(d.x, flat, EstimationConfig{});
    FAIL("expected a staged error");
  } catch (const Error& e) {
    CHECK(e.stage() == "factor_counts");
  }
  try {
    fit(d.x, flat, config);
    FAIL("expected a staged error");
  } catch (const Error& e) {
    CHECK(e.stage() == "threshold");
  }
}

TEST_CASE("fit is deterministic, scale invariant and row-permutation equivariant") {
  const auto d = strong(10, 500, 9);
  const EstimationConfig config;
  const auto a = fit(d.x, d.z, config);
  const auto again = fit(d.x, d.z, config);
  CHECK(max_distance(a.loadings, again.loadings) <= 1e-12);
  CHECK(a.r_tilde == again.r_tilde);

  const auto scaled = fit(d.x.scaled(5.0), d.z, config);
  CHECK(scaled.r_tilde == a.r_tilde);
  CHECK(scaled.k == a.k);
  CHECK(max_distance(a.loadings, scaled.loadings) <= 1e-9);

  std::vector<Index> perm(10);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[2], perm[7]);
  const auto permuted = fit(d.x.permute_rows(perm), d.z, config);
  CHECK(permuted.r_tilde == a.r_tilde);
  CHECK(permuted.k == a.k);
  for (Regime i : kRegimes) {
    CHECK(space_distance(permuted.loadings.at(Orientation::Column, i), a.loadings.at(Orientation::Column, i)) <= 1e-9);
    MatrixXd unpermuted(10, a.k.row);
    const auto& q = permuted.loadings.at(Orientation::Row, i).basis;
    for (Index r = 0; r < 10; ++r) unpermuted.row(perm[static_cast<std::size_t>(r)]) = q.row(r);
    CHECK(space_distance(unpermuted, a.loadings.at(Orientation::Row, i).basis) <= 1e-9);
  }
}

TEST_CASE("overestimated k keeps the leading columns close to the true-k fit") {
  const auto d = strong(20, 1200, 10);
  EstimationConfig exact;
  exact.k_override = FactorCounts{3, 3};
  EstimationConfig over;
  over.k_override = FactorCounts{4, 4};
  const auto a = fit(d.x, d.z, exact);
  const auto b = fit(d.x, d.z, over);
  for (Orientation s : kOrientations) {
    for (Regime i : kRegimes) {
      const auto truth = LoadingSpace::span_of(d.truth.loading(s, i));
      const double base = space_distance(a.loadings.at(s, i), truth);
      const MatrixXd lead = b.loadings.at(s, i).basis.leftCols(3);
      CHECK(space_distance(lead, truth.basis) <= 2.0 * base + 1e-12);
    }
  }
}

TEST_CASE("residual E: oracle, perfect projection and homogeneity") {
  const auto d = strong(6, 200, 11);
  EstimationConfig config;
  config.k_override = FactorCounts{2, 3};
  const auto model = fit(d.x.slice(0, 150), d.z.slice(0, 150), config);
  MatrixXd B[2][2];
  for (Orientation s : kOrientations) {
    for (Regime i : kRegimes) {
      const auto& v = model.decompositions.at(s, i).vectors;
      B[static_cast<int>(s) - 1][static_cast<int>(i) - 1] = v.rightCols(6 - model.k.along(s));
    }
  }
  std::vector<MatrixXd> xs;
  for (Index t = 0; t < 200; ++t) xs.push_back(d.x.at(t));
  const double e = residual_e(d.x, d.z, model, 150);
  CHECK(e == doctest::Approx(oracle::residual(xs, d.z.values(), model.r_tilde, B, 150)).epsilon(1e-10));

  // held-out X_t inside the fitted spaces, plus noise living only in the complements
  tmfm::Rng rng(3, 3);
  auto draw = [&](Index r, Index c) {
    MatrixXd m(r, c);
    for (Index k = 0; k < m.size(); ++k) m.data()[k] = rng.normal();
    return m;
  };
  Eigen::MatrixXd signal(36, 200), noisy(36, 200), louder(36, 200);
  for (Index t = 0; t < 200; ++t) {
    const Regime i = d.z[t] < model.r_tilde ? Regime::One : Regime::Two;
    const auto& q1 = model.loadings.at(Orientation::Row, i).basis;
    const auto& q2 = model.loadings.at(Orientation::Column, i).basis;
    const MatrixXd s = q1 * draw(2, 3) * q2.transpose();
    const MatrixXd n = draw(6, 6);
    const MatrixXd a = s + n, b = s + 2.0 * n;
    signal.col(t) = Eigen::Map<const Eigen::VectorXd>(s.data(), 36);
    noisy.col(t) = Eigen::Map<const Eigen::VectorXd>(a.data(), 36);
    louder.col(t) = Eigen::Map<const Eigen::VectorXd>(b.data(), 36);
  }
  const double scale = MatrixSeries(6, 6, signal).vectorized().squaredNorm();
  CHECK(residual_e(MatrixSeries(6, 6, signal), d.z, model, 150) <= 1e-20 * scale);
  const double e1 = residual_e(MatrixSeries(6, 6, noisy), d.z, model, 150);
  const double e2 = residual_e(MatrixSeries(6, 6, louder), d.z, model, 150);
  CHECK(e2 == doctest::Approx(4.0 * e1).epsilon(1e-10));

  CHECK(code_of([&] { residual_e(d.x, d.z, model, 0); }) == ErrorCode::IndexOutOfRange);
  CHECK(code_of([&] { residual_e(d.x, d.z, model, 200); }) == ErrorCode::IndexOutOfRange);
}

TEST_CASE("threshold-variable selection prefers the true threshold variable") {
  int first = 0;
  for (std::uint64_t rep = 0; rep < 50; ++rep) {
    const auto d = strong(10, 400, 100 + rep);
    const ThresholdSeries noise(oracle::random_z(400, 500 + rep));
    const std::vector<NamedThreshold> candidates{{"noise", noise}, {"z", d.z}};
    const auto ranking = select_threshold_variable(d.x, candidates, EstimationConfig{});
    REQUIRE(ranking.size() == 2);
    if (ranking.front().name == "z") ++first;
  }
  CHECK(first >= 45);
}

TEST_CASE("threshold-variable selection: single and failing candidates") {
  const auto d = strong(6, 120, 12);
  const std::vector<NamedThreshold> one{{"z", d.z}};
  const auto single = select_threshold_variable(d.x, one, EstimationConfig{});
  REQUIRE(single.size() == 1);
  CHECK(single[0].e);
  CHECK(*single[0].e >= 0.0);

  const std::vector<NamedThreshold> mixed{{"short", d.z.slice(0, 60)}, {"z", d.z}};
  const auto ranked = select_threshold_variable(d.x, mixed, EstimationConfig{});
  REQUIRE(ranked.size() == 2);
  CHECK(ranked[0].name == "z");
  CHECK(ranked[1].name == "short");
  CHECK(!ranked[1].e);
  CHECK(ranked[1].error.find("DimensionMismatch") != std::string::npos);
}
