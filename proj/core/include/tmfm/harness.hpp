#pragma once

// Monte Carlo runner: simulate, estimate, score against the truth, aggregate.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tmfm/estimate.hpp"
#include "tmfm/simulate.hpp"

namespace tmfm {

/// Factor counts fed to the threshold search. An empty k means "use the
/// ratio-estimated k_hat of the replicate".
struct KVariant {
  std::string label;
  std::optional<FactorCounts> k;

  static KVariant estimated() { return {"est", std::nullopt}; }
  static KVariant fixed(FactorCounts k) { return {to_string(k), k}; }
  /// "est" or "K1xK2".
  static KVariant parse(const std::string& text);
};

struct Setting {
  std::string name;
  DgpSpec spec;
};

/// Axes of a cartesian sweep over the base spec. Empty axes are not swept.
struct SweepAxes {
  std::vector<std::array<double, 4>> delta;
  std::vector<std::array<double, 2>> beta;
  std::vector<std::pair<Index, Index>> dims;
  std::vector<Index> T;
};

/// One Setting per combination, named "setting N" in delta-major order.
std::vector<Setting> expand_sweep(const DgpSpec& base, const SweepAxes& axes);

struct HistogramSpec {
  double lo = -0.5;
  double hi = 0.5;
  int bins = 20;
};

struct ExperimentGrid {
  std::string name = "grid";
  DgpSpec base;
  std::vector<Setting> settings;
  int n_reps = 100;
  std::vector<KVariant> k_variants{KVariant::estimated()};
  std::uint64_t master_seed = 0;
  EstimationConfig estimation;
  HistogramSpec histogram;
  /// 0 = hardware concurrency.
  int threads = 0;

  /// Errors: InvalidArgument (plus whatever DgpSpec::validate raises).
  void validate() const;
};

struct VariantResult {
  std::string label;
  std::optional<FactorCounts> k;
  std::optional<double> r_hat;
  /// D(Q_hat_{s,i}, span of the true loading), per space.
  std::optional<Quad<double>> distance;
  std::string error;

  bool ok() const { return r_hat.has_value(); }
};

struct ReplicateResult {
  std::size_t setting = 0;
  int replicate = 0;
  double r0 = 0.0;
  std::optional<FactorCounts> k_hat;
  std::vector<VariantResult> variants;
  /// Failure before any variant could run (simulation, factor counts).
  std::string error;
};

struct MetricsRow {
  std::string setting;
  std::string variant;
  int n_reps = 0;
  int n_failed = 0;
  /// Frequency of each estimated (k1,k2) pair among replicates whose counts
  /// succeeded, keyed "K1xK2".
  std::map<std::string, double> k_frequency;
  double mean_abs_error = 0.0;
  double sd_abs_error = 0.0;
  double median_signed_error = 0.0;
  double mean_r_hat = 0.0;
  Quad<double> mean_distance{};
  std::vector<int> r_hat_histogram;
};

struct MetricsTable {
  std::string grid;
  HistogramSpec histogram;
  std::vector<MetricsRow> rows;
  std::vector<ReplicateResult> replicates;
};

/// One replicate of one setting. Replicate r draws from Rng(master_seed, r)
/// regardless of the setting, so settings share common random numbers.
ReplicateResult run_replicate(const ExperimentGrid& grid, std::size_t setting, int replicate);

/// Aggregates already computed replicates into rows (setting-major, variants
/// in grid order).
MetricsTable aggregate(const ExperimentGrid& grid, std::vector<ReplicateResult> replicates);

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Runs every (setting, replicate) pair on a thread pool. Results do not
/// depend on the thread count. Replicate failures are recorded, not thrown.
MetricsTable run_monte_carlo(const ExperimentGrid& grid, const ProgressFn& progress = {});

struct FiveNumber {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

/// Type-7 five-number summary. Errors: EmptySeries.
FiveNumber five_number(std::span<const double> values);

struct DistanceBox {
  std::string setting;
  std::string variant;
  std::string space;
  std::size_t n = 0;
  FiveNumber summary;
};

/// Five-number summaries of each loading-space distance per (setting,
/// variant). Errors: EmptySeries when no replicate carries distances.
std::vector<DistanceBox> summarize_distance_boxes(const MetricsTable& table);

}  // namespace tmfm
