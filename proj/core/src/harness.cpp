#include "tmfm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "tmfm/error.hpp"

namespace tmfm {

KVariant KVariant::parse(const std::string& text) {
  if (text == "est" || text == "estimated") return estimated();
  return fixed(parse_factor_counts(text));
}

std::vector<Setting> expand_sweep(const DgpSpec& base, const SweepAxes& axes) {
  auto or_base = [](const auto& axis, auto value) {
    using T = std::decay_t<decltype(value)>;
    return axis.empty() ? std::vector<T>{value} : axis;
  };
  const auto deltas = or_base(axes.delta, base.delta);
  const auto betas = or_base(axes.beta, base.beta);
  const auto dims = or_base(axes.dims, std::pair<Index, Index>{base.p1, base.p2});
  const auto lengths = or_base(axes.T, base.T);

  std::vector<Setting> out;
  for (const auto& d : deltas) {
    for (const auto& b : betas) {
      for (const auto& [p1, p2] : dims) {
        for (Index T : lengths) {
          DgpSpec spec = base;
          spec.delta = d;
          spec.beta = b;
          spec.p1 = p1;
          spec.p2 = p2;
          spec.T = T;
          out.push_back({"setting " + std::to_string(out.size() + 1), spec});
        }
      }
    }
  }
  return out;
}

void ExperimentGrid::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (n_reps < 1) fail("n_reps must be >= 1");
  if (settings.empty()) fail("experiment grid has no settings");
  if (k_variants.empty()) fail("experiment grid has no k variants");
  if (threads < 0) fail("threads must be >= 0");
  if (!(histogram.lo < histogram.hi) || histogram.bins < 1) fail("histogram needs lo < hi and bins >= 1");
  for (const auto& v : k_variants) {
    if (v.k && (v.k->row < 1 || v.k->col < 1)) fail("k variant " + v.label + " has a count below 1");
  }
  for (const auto& s : settings) {
    try {
      s.spec.validate();
      estimation.validate(s.spec.T);
    } catch (const Error& e) {
      throw Error(e.code(), s.name + ": " + e.what());
    }
  }
}

namespace {

std::string describe(const Error& e) {
  std::string out(to_string(e.code()));
  if (!e.stage().empty()) out += " [" + e.stage() + "]";
  return out + ": " + e.what();
}

}  // namespace

ReplicateResult run_replicate(const ExperimentGrid& grid, std::size_t setting, int replicate) {
  ReplicateResult out;
  out.setting = setting;
  out.replicate = replicate;
  const DgpSpec& spec = grid.settings.at(setting).spec;
  out.r0 = spec.r0;
  for (const auto& v : grid.k_variants) out.variants.push_back({v.label, v.k, {}, {}, {}});

  std::optional<SimulatedDataset> data;
  try {
    DgpSpec seeded = spec;
    seeded.seed = grid.master_seed;
    data = simulate_dataset(seeded, Rng(grid.master_seed, static_cast<std::uint64_t>(replicate)));
    const double eta1 = quantile(data->z, grid.estimation.q_lo);
    const double eta2 = quantile(data->z, grid.estimation.q_hi);
    out.k_hat = estimate_factor_counts(data->x, data->z, eta1, eta2, grid.estimation.h0,
                                       grid.estimation.ridge_tol)
                    .k_hat;
  } catch (const Error& e) {
    out.error = describe(e.stage().empty() ? e.with_stage(data ? "factor_counts" : "simulate") : e);
  }
  if (!data) {
    for (auto& v : out.variants) v.error = out.error;
    return out;
  }

  // Distinct factor counts share one threshold sweep.
  std::vector<FactorCounts> ks;
  std::vector<std::optional<std::size_t>> slot(out.variants.size());
  for (std::size_t v = 0; v < out.variants.size(); ++v) {
    auto& var = out.variants[v];
    if (!var.k) var.k = out.k_hat;
    if (!var.k) {
      var.error = out.error;
      continue;
    }
    auto it = std::find(ks.begin(), ks.end(), *var.k);
    slot[v] = static_cast<std::size_t>(it - ks.begin());
    if (it == ks.end()) ks.push_back(*var.k);
  }
  if (ks.empty()) return out;

  std::vector<FitAttempt> fits;
  try {
    fits = fit_variants(data->x, data->z, grid.estimation, ks);
  } catch (const Error& e) {
    for (std::size_t v = 0; v < out.variants.size(); ++v) {
      if (slot[v]) out.variants[v].error = describe(e);
    }
    return out;
  }
  for (std::size_t v = 0; v < out.variants.size(); ++v) {
    if (!slot[v]) continue;
    auto& var = out.variants[v];
    const FitAttempt& fit = fits[*slot[v]];
    if (fit.error) {
      var.error = describe(*fit.error);
      continue;
    }
    var.r_hat = fit.model->r_tilde;
    Quad<double> d;
    for (Orientation s : kOrientations) {
      for (Regime i : kRegimes) {
        const LoadingSpace truth = LoadingSpace::span_of(data->truth.loading(s, i), s, i);
        d.at(s, i) = space_distance(fit.model->loadings.at(s, i), truth);
      }
    }
    var.distance = d;
  }
  return out;
}

namespace {

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

MetricsTable aggregate(const ExperimentGrid& grid, std::vector<ReplicateResult> replicates) {
  std::sort(replicates.begin(), replicates.end(), [](const ReplicateResult& a, const ReplicateResult& b) {
    return std::tie(a.setting, a.replicate) < std::tie(b.setting, b.replicate);
  });
  MetricsTable table;
  table.grid = grid.name;
  table.histogram = grid.histogram;
  const auto& hist = grid.histogram;

  for (std::size_t s = 0; s < grid.settings.size(); ++s) {
    std::map<std::string, int> k_counts;
    int k_total = 0;
    for (const auto& rep : replicates) {
      if (rep.setting != s || !rep.k_hat) continue;
      ++k_counts[to_string(*rep.k_hat)];
      ++k_total;
    }
    for (std::size_t v = 0; v < grid.k_variants.size(); ++v) {
      MetricsRow row;
      row.setting = grid.settings[s].name;
      row.variant = grid.k_variants[v].label;
      for (const auto& [key, count] : k_counts) row.k_frequency[key] = static_cast<double>(count) / k_total;
      row.r_hat_histogram.assign(static_cast<std::size_t>(hist.bins), 0);

      std::vector<double> abs_err, signed_err, r_hats;
      Quad<std::vector<double>> dist;
      for (const auto& rep : replicates) {
        if (rep.setting != s) continue;
        ++row.n_reps;
        const VariantResult& var = rep.variants.at(v);
        if (!var.ok()) {
          ++row.n_failed;
          continue;
        }
        const double e = *var.r_hat - rep.r0;
        abs_err.push_back(std::abs(e));
        signed_err.push_back(e);
        r_hats.push_back(*var.r_hat);
        if (var.distance) {
          for (std::size_t q = 0; q < 4; ++q) dist.items[q].push_back(var.distance->items[q]);
        }
        const double pos = (*var.r_hat - hist.lo) / (hist.hi - hist.lo) * hist.bins;
        const int bin = std::clamp(static_cast<int>(std::floor(pos)), 0, hist.bins - 1);
        ++row.r_hat_histogram[static_cast<std::size_t>(bin)];
      }
      row.mean_abs_error = mean(abs_err);
      row.sd_abs_error = sample_sd(abs_err);
      row.median_signed_error = signed_err.empty() ? std::nan("") : quantile(signed_err, 0.5);
      row.mean_r_hat = mean(r_hats);
      for (std::size_t q = 0; q < 4; ++q) row.mean_distance.items[q] = mean(dist.items[q]);
      table.rows.push_back(std::move(row));
    }
  }
  table.replicates = std::move(replicates);
  return table;
}

MetricsTable run_monte_carlo(const ExperimentGrid& grid, const ProgressFn& progress) {
  grid.validate();
  const std::size_t total = grid.settings.size() * static_cast<std::size_t>(grid.n_reps);
  std::vector<ReplicateResult> results(total);

  std::size_t workers = grid.threads > 0 ? static_cast<std::size_t>(grid.threads)
                                         : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, total);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  auto work = [&] {
    for (std::size_t task = next++; task < total; task = next++) {
      const std::size_t setting = task / static_cast<std::size_t>(grid.n_reps);
      const int rep = static_cast<int>(task % static_cast<std::size_t>(grid.n_reps));
      try {
        results[task] = run_replicate(grid, setting, rep);
      } catch (const std::exception& e) {
        results[task].setting = setting;
        results[task].replicate = rep;
        results[task].error = e.what();
        for (const auto& v : grid.k_variants) results[task].variants.push_back({v.label, v.k, {}, {}, e.what()});
      }
      const std::size_t finished = ++done;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(finished, total);
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  return aggregate(grid, std::move(results));
}

FiveNumber five_number(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptySeries, "five-number summary of an empty series");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return {*lo, quantile(values, 0.25), quantile(values, 0.5), quantile(values, 0.75), *hi};
}

std::vector<DistanceBox> summarize_distance_boxes(const MetricsTable& table) {
  std::vector<DistanceBox> out;
  // Group replicates by (setting, variant) following the row order.
  std::size_t n_settings = 0;
  for (const auto& rep : table.replicates) n_settings = std::max(n_settings, rep.setting + 1);
  const std::size_t n_variants = n_settings ? table.rows.size() / n_settings : 0;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::size_t s = r / n_variants;
    const std::size_t v = r % n_variants;
    Quad<std::vector<double>> samples;
    for (const auto& rep : table.replicates) {
      if (rep.setting != s || v >= rep.variants.size() || !rep.variants[v].distance) continue;
      for (std::size_t q = 0; q < 4; ++q) samples.items[q].push_back(rep.variants[v].distance->items[q]);
    }
    if (samples.items[0].empty()) continue;
    for (Orientation so : kOrientations) {
      for (Regime i : kRegimes) {
        const auto& xs = samples.at(so, i);
        out.push_back({table.rows[r].setting, table.rows[r].variant, space_label(so, i), xs.size(), five_number(xs)});
      }
    }
  }
  if (out.empty()) throw Error(ErrorCode::EmptySeries, "no replicate carries loading-space distances");
  return out;
}

}  // namespace tmfm
