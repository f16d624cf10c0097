#include "tmfm/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "tmfm/error.hpp"

namespace tmfm {
namespace {

void require_partitions(const ThresholdSeries& z, double r1, double r2, int h0) {
  const Index n1 = regime_mask(z, r1, Regime::One).count();
  const Index n2 = regime_mask(z, r2, Regime::Two).count();
  const auto need = static_cast<Index>(h0) + 1;
  if (n1 < need) {
    throw Error(ErrorCode::EmptyRegime, "regime 1 partition (z < " + std::to_string(r1) + ") has " +
                                            std::to_string(n1) + " points, needs at least " +
                                            std::to_string(need));
  }
  if (n2 < need) {
    throw Error(ErrorCode::EmptyRegime, "regime 2 partition (z >= " + std::to_string(r2) + ") has " +
                                            std::to_string(n2) + " points, needs at least " +
                                            std::to_string(need));
  }
}

Quad<EigenDecomposition> decompose(const Quad<LagCovKernel>& kernels) {
  Quad<EigenDecomposition> out;
  for (std::size_t k = 0; k < 4; ++k) out.items[k] = sym_eigen(kernels.items[k].m);
  return out;
}

Quad<LoadingSpace> leading_spaces(const Quad<EigenDecomposition>& eig, FactorCounts k) {
  Quad<LoadingSpace> out;
  for (Orientation s : kOrientations) {
    for (Regime i : kRegimes) out.at(s, i) = top_k(eig.at(s, i), k.along(s), s, i);
  }
  return out;
}

Quad<LoadingSpace> trailing_spaces(const Quad<EigenDecomposition>& eig, FactorCounts k) {
  Quad<LoadingSpace> out;
  for (Orientation s : kOrientations) {
    for (Regime i : kRegimes) out.at(s, i) = complement(eig.at(s, i), k.along(s), s, i);
  }
  return out;
}

template <class F>
auto staged(const char* stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw e.with_stage(stage);
  }
}

}  // namespace

Quad<LoadingSpace> estimate_loadings(const MatrixSeries& x, const ThresholdSeries& z, double r1,
                                     double r2, FactorCounts k, int h0) {
  if (r1 > r2) throw Error(ErrorCode::InvalidArgument, "estimate_loadings needs r1 <= r2");
  require_partitions(z, r1, r2, h0);
  return leading_spaces(decompose(m_hat_all(x, z, r1, r2, h0)), k);
}

FactorCountEstimate estimate_factor_counts(const MatrixSeries& x, const ThresholdSeries& z,
                                           double eta1, double eta2, int h0, double eigen_floor) {
  if (!(eta1 < eta2)) throw Error(ErrorCode::InvalidArgument, "factor counts need eta1 < eta2");
  require_partitions(z, eta1, eta2, h0);
  const auto eig = decompose(m_hat_all(x, z, eta1, eta2, h0));

  FactorCountEstimate out;
  out.eta1 = eta1;
  out.eta2 = eta2;
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (Orientation s : kOrientations) {
    for (Regime i : kRegimes) {
      const Eigen::VectorXd& lambda = eig.at(s, i).values;
      const Index p = lambda.size();
      const Index R = p / 2;
      // Past the effective rank the eigenvalues are solver roundoff, of order
      // p * eps * lambda_1, and their ratios carry no information.
      const double zero = p > 0 ? std::max(eigen_floor, 64.0 * static_cast<double>(p) *
                                                            std::numeric_limits<double>::epsilon() * lambda[0])
                                : eigen_floor;
      std::vector<double> ratios;
      bool degenerate = false;
      for (Index k = 1; k <= R; ++k) {
        const double lk = lambda[k - 1];
        if (degenerate || lk <= zero) {
          degenerate = true;
          ratios.push_back(inf);
          continue;
        }
        ratios.push_back(std::max(lambda[k], 0.0) / lk);
      }
      int best = 1;
      for (std::size_t k = 1; k < ratios.size(); ++k) {
        if (ratios[k] < ratios[static_cast<std::size_t>(best - 1)]) best = static_cast<int>(k) + 1;
      }
      out.degenerate_spectrum = out.degenerate_spectrum || degenerate;
      out.k_per_space.at(s, i) = best;
      out.ratio_curves.at(s, i) = std::move(ratios);
      out.eigenvalues.at(s, i) = lambda;
      out.kernel_norms.at(s, i) = p > 0 ? lambda.cwiseAbs().maxCoeff() : 0.0;
    }
  }
  for (Orientation s : kOrientations) {
    const Regime q = out.kernel_norms.at(s, Regime::Two) > out.kernel_norms.at(s, Regime::One)
                         ? Regime::Two
                         : Regime::One;
    out.chosen_regime[static_cast<std::size_t>(s) - 1] = q;
    const int k = out.k_per_space.at(s, q);
    if (s == Orientation::Row) {
      out.k_hat.row = k;
    } else {
      out.k_hat.col = k;
    }
  }
  return out;
}

Quad<LoadingSpace> estimate_complements(const MatrixSeries& x, const ThresholdSeries& z,
                                        double eta1, double eta2, FactorCounts k, int h0) {
  if (!(eta1 < eta2)) throw Error(ErrorCode::InvalidArgument, "complements need eta1 < eta2");
  require_partitions(z, eta1, eta2, h0);
  return trailing_spaces(decompose(m_hat_all(x, z, eta1, eta2, h0)), k);
}

double g_hat(const Quad<Eigen::MatrixXd>& kernels, const Quad<LoadingSpace>& b) {
  double total = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    const Eigen::MatrixXd& m = kernels.items[k];
    const Eigen::MatrixXd& basis = b.items[k].basis;
    if (basis.rows() != m.rows()) {
      throw Error(ErrorCode::ShapeMismatch, "complement basis has " + std::to_string(basis.rows()) +
                                                " rows but the kernel is " + std::to_string(m.rows()) +
                                                " x " + std::to_string(m.cols()));
    }
    if (basis.cols() == 0) continue;
    const Eigen::MatrixXd projected = basis.transpose() * m * basis;
    total += spectral_norm_sym(0.5 * (projected + projected.transpose()));
  }
  return total;
}

double g_hat(const MatrixSeries& x, const ThresholdSeries& z, const Quad<LoadingSpace>& b, double r,
             int h0) {
  const auto kernels = m_hat_all(x, z, r, r, h0);
  Quad<Eigen::MatrixXd> m;
  for (std::size_t k = 0; k < 4; ++k) m.items[k] = kernels.items[k].m;
  return g_hat(m, b);
}

std::vector<double> threshold_grid(const ThresholdSeries& z, double eta1, double eta2, int stride) {
  if (stride < 1) throw Error(ErrorCode::InvalidArgument, "grid stride must be >= 1");
  std::vector<double> values;
  for (Index t = 0; t < z.length(); ++t) {
    if (z[t] > eta1 && z[t] < eta2) values.push_back(z[t]);
  }
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  if (stride == 1) return values;
  std::vector<double> strided;
  for (std::size_t g = 0; g < values.size(); g += static_cast<std::size_t>(stride)) {
    strided.push_back(values[g]);
  }
  return strided;
}

std::vector<ThresholdAttempt> estimate_thresholds(const MatrixSeries& x, const ThresholdSeries& z,
                                                  double eta1, double eta2,
                                                  std::span<const FactorCounts> ks, int h0,
                                                  int stride) {
  if (!(eta1 < eta2)) throw Error(ErrorCode::InvalidArgument, "threshold search needs eta1 < eta2");
  require_partitions(z, eta1, eta2, h0);
  const std::vector<double> grid = threshold_grid(z, eta1, eta2, stride);
  if (grid.empty()) {
    throw Error(ErrorCode::EmptyGrid, "no threshold candidates strictly inside (eta1, eta2)");
  }

  const auto eig = decompose(m_hat_all(x, z, eta1, eta2, h0));
  std::vector<ThresholdAttempt> out(ks.size());
  std::vector<std::optional<Quad<LoadingSpace>>> complements(ks.size());
  for (std::size_t v = 0; v < ks.size(); ++v) {
    try {
      complements[v] = trailing_spaces(eig, ks[v]);
      ThresholdEstimate est;
      est.k = ks[v];
      est.eta1 = eta1;
      est.eta2 = eta2;
      est.grid = grid;
      est.g_values.reserve(grid.size());
      out[v].estimate = std::move(est);
    } catch (const Error& e) {
      out[v].error = e;
    }
  }

  sweep_kernels(x, z, grid, h0, [&](std::size_t, double, const Quad<Eigen::MatrixXd>& kernels) {
    for (std::size_t v = 0; v < ks.size(); ++v) {
      if (complements[v]) out[v].estimate->g_values.push_back(g_hat(kernels, *complements[v]));
    }
  });

  for (auto& attempt : out) {
    if (!attempt.estimate) continue;
    auto& est = *attempt.estimate;
    std::size_t best = 0;
    for (std::size_t g = 1; g < est.g_values.size(); ++g) {
      if (est.g_values[g] < est.g_values[best]) best = g;
    }
    est.r_hat = est.grid[best];
  }
  return out;
}

ThresholdEstimate estimate_threshold(const MatrixSeries& x, const ThresholdSeries& z, double eta1,
                                     double eta2, FactorCounts k, int h0, int stride) {
  const FactorCounts ks[] = {k};
  auto attempts = estimate_thresholds(x, z, eta1, eta2, ks, h0, stride);
  if (attempts.front().error) throw *attempts.front().error;
  return std::move(*attempts.front().estimate);
}

std::vector<FitAttempt> fit_variants(const MatrixSeries& x, const ThresholdSeries& z,
                                     const EstimationConfig& config,
                                     std::span<const FactorCounts> ks) {
  staged("config", [&] {
    if (x.length() != z.length()) {
      throw Error(ErrorCode::DimensionMismatch, "threshold series and X have different lengths");
    }
    config.validate(x.length());
  });
  const double eta1 = staged("eta", [&] { return quantile(z, config.q_lo); });
  const double eta2 = staged("eta", [&] { return quantile(z, config.q_hi); });
  auto thresholds = staged("threshold", [&] {
    return estimate_thresholds(x, z, eta1, eta2, ks, config.h0, config.grid_stride);
  });

  std::vector<FitAttempt> out(ks.size());
  std::map<double, Quad<EigenDecomposition>> final_kernels;
  for (std::size_t v = 0; v < ks.size(); ++v) {
    if (thresholds[v].error) {
      out[v].error = thresholds[v].error->stage().empty() ? thresholds[v].error->with_stage("threshold")
                                                          : *thresholds[v].error;
      continue;
    }
    try {
      const ThresholdEstimate& th = *thresholds[v].estimate;
      auto it = final_kernels.find(th.r_hat);
      if (it == final_kernels.end()) {
        it = final_kernels
                 .emplace(th.r_hat, staged("loadings", [&] {
                            return decompose(m_hat_all(x, z, th.r_hat, th.r_hat, config.h0));
                          }))
                 .first;
      }
      FittedModel model;
      model.k = ks[v];
      model.r_tilde = th.r_hat;
      model.eta1 = eta1;
      model.eta2 = eta2;
      model.decompositions = it->second;
      model.loadings = staged("loadings", [&] { return leading_spaces(it->second, ks[v]); });
      model.threshold = th;
      model.config = config;
      out[v].model = std::move(model);
    } catch (const Error& e) {
      out[v].error = e;
    }
  }
  return out;
}

FittedModel fit(const MatrixSeries& x, const ThresholdSeries& z, const EstimationConfig& config) {
  staged("config", [&] {
    if (x.length() != z.length()) {
      throw Error(ErrorCode::DimensionMismatch, "threshold series and X have different lengths");
    }
    config.validate(x.length());
  });
  std::optional<FactorCountEstimate> counts;
  FactorCounts k;
  if (config.k_override) {
    k = *config.k_override;
  } else {
    const double eta1 = staged("eta", [&] { return quantile(z, config.q_lo); });
    const double eta2 = staged("eta", [&] { return quantile(z, config.q_hi); });
    counts = staged("factor_counts", [&] {
      return estimate_factor_counts(x, z, eta1, eta2, config.h0, config.ridge_tol);
    });
    k = counts->k_hat;
  }
  const FactorCounts ks[] = {k};
  auto attempts = fit_variants(x, z, config, ks);
  if (attempts.front().error) throw *attempts.front().error;
  FittedModel model = std::move(*attempts.front().model);
  model.counts = std::move(counts);
  return model;
}

double residual_e(const MatrixSeries& x, const ThresholdSeries& z, const FittedModel& model,
                  Index t0) {
  const Index T = x.length();
  if (z.length() != T) throw Error(ErrorCode::DimensionMismatch, "threshold series and X have different lengths");
  if (t0 < 1 || t0 >= T) {
    throw Error(ErrorCode::IndexOutOfRange,
                "t0 must satisfy 1 <= t0 < T, got t0 = " + std::to_string(t0));
  }
  Quad<Eigen::MatrixXd> b;
  for (Orientation s : kOrientations) {
    for (Regime i : kRegimes) {
      const Eigen::MatrixXd& v = model.decompositions.at(s, i).vectors;
      if (v.rows() != x.rows(s)) {
        throw Error(ErrorCode::ShapeMismatch, "fitted model dimensions do not match X");
      }
      const int k = model.k.along(s);
      if (k < 1 || k > v.cols()) throw Error(ErrorCode::KOutOfRange, "fitted k outside 1..p");
      b.at(s, i) = v.rightCols(v.cols() - k);
    }
  }
  double e = 0.0;
  for (Index t = t0; t < T; ++t) {
    const Regime i = in_regime(z[t], model.r_tilde, Regime::One) ? Regime::One : Regime::Two;
    const auto xt = x.at(t);
    // columns x_{t,l} projected on B_{1,i}; rows x_{t,l.} projected on B_{2,i}
    e += (b.at(Orientation::Row, i).transpose() * xt).squaredNorm();
    e += (b.at(Orientation::Column, i).transpose() * xt.transpose()).squaredNorm();
  }
  return e;
}

std::vector<CandidateScore> select_threshold_variable(const MatrixSeries& x,
                                                      std::span<const NamedThreshold> candidates,
                                                      const EstimationConfig& config) {
  if (candidates.empty()) throw Error(ErrorCode::InvalidArgument, "no threshold candidates given");
  config.validate();
  const Index T = x.length();
  const auto t0 = static_cast<Index>(std::ceil(config.t0_fraction * static_cast<double>(T)));
  if (t0 < 2 || t0 >= T) {
    throw Error(ErrorCode::IndexOutOfRange, "t0 = ceil(t0_fraction * T) = " + std::to_string(t0) +
                                                " leaves no training or hold-out data");
  }
  const MatrixSeries train = x.slice(0, t0);

  auto check_length = [&](const NamedThreshold& cand) {
    if (cand.z.length() != T) {
      throw Error(ErrorCode::DimensionMismatch, "candidate '" + cand.name + "' has length " +
                                                    std::to_string(cand.z.length()) + ", expected " +
                                                    std::to_string(T));
    }
  };
  auto describe = [](const Error& e) { return std::string(to_string(e.code())) + ": " + e.what(); };

  // E shrinks as k grows, and a threshold variable that does not separate the
  // regimes inflates k_hat, so every candidate is scored at one common k: the
  // componentwise minimum of the per-candidate estimates.
  std::vector<std::string> count_errors(candidates.size());
  EstimationConfig common = config;
  if (!common.k_override) {
    std::optional<FactorCounts> k_min;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      try {
        check_length(candidates[c]);
        const ThresholdSeries z = candidates[c].z.slice(0, t0);
        const double eta1 = staged("eta", [&] { return quantile(z, config.q_lo); });
        const double eta2 = staged("eta", [&] { return quantile(z, config.q_hi); });
        const FactorCounts k = staged("factor_counts", [&] {
          return estimate_factor_counts(train, z, eta1, eta2, config.h0, config.ridge_tol).k_hat;
        });
        k_min = k_min ? FactorCounts{std::min(k_min->row, k.row), std::min(k_min->col, k.col)} : k;
      } catch (const Error& e) {
        count_errors[c] = describe(e);
      }
    }
    common.k_override = k_min;
  }

  std::vector<CandidateScore> ok;
  std::vector<CandidateScore> failed;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto& cand = candidates[c];
    CandidateScore score{cand.name, std::nullopt, std::nullopt, std::nullopt, count_errors[c]};
    if (!score.error.empty()) {
      failed.push_back(std::move(score));
      continue;
    }
    try {
      check_length(cand);
      const FittedModel model = fit(train, cand.z.slice(0, t0), common);
      score.k = model.k;
      score.r_tilde = model.r_tilde;
      score.e = residual_e(x, cand.z, model, t0);
      ok.push_back(std::move(score));
    } catch (const Error& e) {
      score.error = describe(e);
      failed.push_back(std::move(score));
    }
  }
  std::stable_sort(ok.begin(), ok.end(),
                   [](const CandidateScore& a, const CandidateScore& b) { return *a.e < *b.e; });
  ok.insert(ok.end(), failed.begin(), failed.end());
  return ok;
}

}  // namespace tmfm
