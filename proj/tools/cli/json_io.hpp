#pragma once

// JSON views of configs, specs, grids, fitted models and metrics.

#include <filesystem>
#include <iosfwd>

#include <json.hpp>

#include "tmfm/estimate.hpp"
#include "tmfm/harness.hpp"
#include "tmfm/simulate.hpp"

namespace tmfm::io {

using nlohmann::ordered_json;

ordered_json matrix_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const ordered_json& j);

ordered_json to_json(const EstimationConfig& c);
/// Only keys present in j are applied. Errors: SchemaError (unknown key or
/// wrong type).
void apply_json(const ordered_json& j, EstimationConfig& c);

ordered_json to_json(const DgpSpec& s);
void apply_json(const ordered_json& j, DgpSpec& s);

/// Keys: name, base, settings (list of partial specs with a name), sweep
/// (axes delta/beta/dims/T), n_reps, k_variants, master_seed, estimation,
/// histogram, threads, paper_scale. Settings come from "settings" when
/// present, else from the sweep over base.
struct GridFile {
  ExperimentGrid grid;
  bool paper_scale = false;
};
GridFile grid_from_json(const ordered_json& j);
ordered_json to_json(const ExperimentGrid& g);

ordered_json to_json(const FactorCountEstimate& e);
ordered_json to_json(const FittedModel& m);
ordered_json truth_json(const SimulationTruth& truth);

ordered_json to_json(const MetricsTable& t);
void write_metrics_csv(std::ostream& out, const MetricsTable& t);
void write_replicates_csv(std::ostream& out, const MetricsTable& t);
void write_boxes_csv(std::ostream& out, const std::vector<DistanceBox>& boxes);

ordered_json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const ordered_json& j);

}  // namespace tmfm::io
