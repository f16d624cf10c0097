#include "commands.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "io.hpp"
#include "json_io.hpp"
#include "manifest.hpp"
#include "tmfm/error.hpp"
#include "tmfm/estimate.hpp"
#include "tmfm/harness.hpp"
#include "tmfm/simulate.hpp"

namespace tmfm::cli {
namespace {

namespace fs = std::filesystem;
using io::ordered_json;

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Input: return 2;
    case ErrorCategory::Numerical: return 3;
    case ErrorCategory::Config: return 4;
  }
  return 1;
}

const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Input: return "input";
    case ErrorCategory::Numerical: return "numerical";
    case ErrorCategory::Config: return "config";
  }
  return "unknown";
}

void report(std::ostream& err, const std::string& code, const char* category, const std::string& message,
            const std::string& stage = {}, std::optional<long long> index = std::nullopt) {
  ordered_json j;
  j["error"]["code"] = code;
  j["error"]["category"] = category;
  j["error"]["message"] = message;
  if (!stage.empty()) j["error"]["stage"] = stage;
  if (index) j["error"]["index"] = *index;
  err << j.dump() << '\n';
}

bool verbose() {
  const char* v = std::getenv("TMFM_VERBOSE");
  return v && *v && std::string(v) != "0";
}

std::optional<int> env_threads() {
  const char* v = std::getenv("TMFM_THREADS");
  if (!v || !*v) return std::nullopt;
  try {
    return std::stoi(v);
  } catch (...) {
    throw Error(ErrorCode::InvalidArgument, std::string("TMFM_THREADS is not an integer: ") + v);
  }
}

// Options shared by every command that estimates on a dataset.
struct EstimationOptions {
  std::string data;
  std::string threshold;
  std::string config_file;
  std::string k;
  std::optional<int> h0;
  std::string eta;
  std::optional<int> grid_stride;
  std::string transform = "none";

  void attach(CLI::App* cmd, bool need_threshold = true) {
    cmd->add_option("--data", data, "matrix series (long CSV or TMFMBIN1 binary)")->required();
    if (need_threshold) cmd->add_option("--threshold", threshold, "threshold variable CSV (t,value)")->required();
    cmd->add_option("--config", config_file, "estimation config JSON, or a manifest.json to replay");
    cmd->add_option("--k", k, "factor counts K1xK2 (skips the ratio estimator)");
    cmd->add_option("--h0", h0, "number of lags in the kernel");
    cmd->add_option("--eta", eta, "quantile levels QLO,QHI for the regime-certain partition");
    cmd->add_option("--grid-stride", grid_stride, "keep every n-th threshold candidate");
    cmd->add_option("--transform", transform, "per-cell preprocessing: none|diff|logdiff|log2diff");
  }

  EstimationConfig config() const {
    EstimationConfig c;
    if (!config_file.empty()) {
      ordered_json j = io::read_json(config_file);
      if (j.contains("config")) j = j["config"];
      if (j.contains("estimation")) j = j["estimation"];
      io::apply_json(j, c);
    }
    if (!k.empty()) c.k_override = parse_factor_counts(k);
    if (h0) c.h0 = *h0;
    if (grid_stride) c.grid_stride = *grid_stride;
    if (!eta.empty()) {
      const auto comma = eta.find(',');
      if (comma == std::string::npos) throw Error(ErrorCode::InvalidArgument, "--eta expects QLO,QHI");
      try {
        c.q_lo = std::stod(eta.substr(0, comma));
        c.q_hi = std::stod(eta.substr(comma + 1));
      } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidArgument, "--eta expects two numbers QLO,QHI, got '" + eta + "'");
      }
    }
    c.validate();
    return c;
  }

  ordered_json resolved(const EstimationConfig& c) const {
    ordered_json j;
    j["estimation"] = io::to_json(c);
    j["transform"] = transform;
    return j;
  }

  Dataset load(io::RunManifest& manifest) const {
    const auto t = io::parse_transform(transform);
    MatrixSeries x = io::read_matrix_series(data);
    manifest.add_input(data);
    ThresholdSeries z;
    if (!threshold.empty()) {
      z = io::read_threshold_csv(threshold);
      manifest.add_input(threshold);
    }
    if (threshold.empty()) return {std::move(x), {}};
    return io::apply_transform(build_dataset(std::move(x), std::move(z)), t);
  }
};

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

std::ofstream open_out(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  return out;
}

void write_g_curve(const fs::path& path, const ThresholdEstimate& th) {
  auto out = open_out(path);
  out << "r,G\n";
  for (std::size_t g = 0; g < th.grid.size(); ++g) {
    out << io::format_double(th.grid[g]) << ',' << io::format_double(th.g_values[g]) << '\n';
  }
}

void write_loadings(const fs::path& path, const FittedModel& m) {
  auto out = open_out(path);
  out << "space,row,factor,value\n";
  for (Orientation s : kOrientations) {
    for (Regime i : kRegimes) {
      const auto& b = m.loadings.at(s, i).basis;
      for (Index r = 0; r < b.rows(); ++r) {
        for (Index c = 0; c < b.cols(); ++c) {
          out << space_label(s, i) << ',' << r + 1 << ',' << c + 1 << ',' << io::format_double(b(r, c)) << '\n';
        }
      }
    }
  }
}

void write_ratios(const fs::path& path, const FactorCountEstimate& e) {
  auto out = open_out(path);
  out << "space,k,eigenvalue,ratio\n";
  for (Orientation s : kOrientations) {
    for (Regime i : kRegimes) {
      const auto& values = e.eigenvalues.at(s, i);
      const auto& ratios = e.ratio_curves.at(s, i);
      for (Index k = 0; k < values.size(); ++k) {
        out << space_label(s, i) << ',' << k + 1 << ',' << io::format_double(values[k]) << ',';
        if (static_cast<std::size_t>(k) < ratios.size()) out << io::format_double(ratios[static_cast<std::size_t>(k)]);
        out << '\n';
      }
    }
  }
}

void finish(const fs::path& dir, io::RunManifest& manifest, const Timer& timer) {
  manifest.wall_seconds = timer.seconds();
  io::write_json(dir / "manifest.json", manifest.to_json());
}

// Post-hoc comparison with the generating truth of a simulated dataset.
ordered_json truth_report(const ordered_json& truth, const FittedModel& m) {
  ordered_json rep;
  const double r0 = truth.at("r0").get<double>();
  rep["r0"] = r0;
  rep["abs_threshold_error"] = std::abs(m.r_tilde - r0);
  const char* names[2][2] = {{"R1", "R2"}, {"C1", "C2"}};
  ordered_json d = ordered_json::object();
  for (Orientation s : kOrientations) {
    for (Regime i : kRegimes) {
      const auto gen = io::matrix_from_json(truth.at(names[static_cast<int>(s) - 1][static_cast<int>(i) - 1]));
      d[space_label(s, i)] = space_distance(m.loadings.at(s, i), LoadingSpace::span_of(gen));
    }
  }
  rep["space_distance"] = std::move(d);
  const auto& spec = truth.at("spec");
  rep["k_true"] = std::to_string(spec.at("k1").get<int>()) + "x" + std::to_string(spec.at("k2").get<int>());
  rep["k_used"] = to_string(m.k);
  return rep;
}

int cmd_fit(const EstimationOptions& opt, const std::string& out_dir, const std::string& truth_file,
            io::RunManifest& manifest, std::ostream& out) {
  Timer timer;
  const EstimationConfig config = opt.config();
  manifest.config = opt.resolved(config);
  const Dataset data = opt.load(manifest);
  const FittedModel model = fit(data.x, data.z, config);

  const fs::path dir(out_dir);
  ordered_json j = io::to_json(model);

  fs::path truth_path = truth_file;
  if (truth_path.empty()) {
    const fs::path sibling = fs::path(opt.data).parent_path() / "truth.json";
    if (fs::exists(sibling)) truth_path = sibling;
  }
  if (!truth_path.empty() && io::parse_transform(opt.transform) == io::Transform::None) {
    manifest.add_input(truth_path);
    const ordered_json rep = truth_report(io::read_json(truth_path), model);
    io::write_json(dir / "report.json", rep);
    j["truth_report"] = rep;
    out << "truth: |r_tilde - r0| = " << io::format_double(rep["abs_threshold_error"].get<double>()) << '\n';
  }
  io::write_json(dir / "model.json", j);
  write_loadings(dir / "loadings.csv", model);
  write_g_curve(dir / "g_curve.csv", model.threshold);
  if (model.counts) write_ratios(dir / "eigen_ratios.csv", *model.counts);
  finish(dir, manifest, timer);
  out << "k = " << to_string(model.k) << ", r_tilde = " << io::format_double(model.r_tilde) << '\n';
  return 0;
}

int cmd_gr_curve(const EstimationOptions& opt, const std::string& out_dir, io::RunManifest& manifest,
                 std::ostream& out) {
  Timer timer;
  const EstimationConfig config = opt.config();
  manifest.config = opt.resolved(config);
  const Dataset data = opt.load(manifest);
  const double eta1 = quantile(data.z, config.q_lo);
  const double eta2 = quantile(data.z, config.q_hi);
  FactorCounts k;
  if (config.k_override) {
    k = *config.k_override;
  } else {
    k = estimate_factor_counts(data.x, data.z, eta1, eta2, config.h0, config.ridge_tol).k_hat;
  }
  const ThresholdEstimate th =
      estimate_threshold(data.x, data.z, eta1, eta2, k, config.h0, config.grid_stride);
  write_g_curve(fs::path(out_dir) / "g_curve.csv", th);
  finish(out_dir, manifest, timer);
  out << "k = " << to_string(k) << ", r_hat = " << io::format_double(th.r_hat) << ", " << th.grid.size()
      << " grid points\n";
  return 0;
}

int cmd_eigen_ratios(const EstimationOptions& opt, const std::string& out_dir, io::RunManifest& manifest,
                     std::ostream& out) {
  Timer timer;
  const EstimationConfig config = opt.config();
  manifest.config = opt.resolved(config);
  const Dataset data = opt.load(manifest);
  const double eta1 = quantile(data.z, config.q_lo);
  const double eta2 = quantile(data.z, config.q_hi);
  const auto est = estimate_factor_counts(data.x, data.z, eta1, eta2, config.h0, config.ridge_tol);
  const fs::path dir(out_dir);
  write_ratios(dir / "eigen_ratios.csv", est);
  io::write_json(dir / "factor_counts.json", io::to_json(est));
  finish(dir, manifest, timer);
  out << "k_hat = " << to_string(est.k_hat) << '\n';
  return 0;
}

int cmd_select(const EstimationOptions& opt, const std::string& candidates_dir, std::optional<double> t0_fraction,
               const std::string& out_dir, io::RunManifest& manifest, std::ostream& out) {
  Timer timer;
  EstimationConfig config = opt.config();
  if (t0_fraction) config.t0_fraction = *t0_fraction;
  config.validate();
  manifest.config = opt.resolved(config);

  std::vector<fs::path> files;
  if (!fs::is_directory(candidates_dir)) {
    throw Error(ErrorCode::IoError, candidates_dir + " is not a directory");
  }
  for (const auto& entry : fs::directory_iterator(candidates_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::IoError, "no *.csv threshold candidates in " + candidates_dir);

  const auto t = io::parse_transform(opt.transform);
  MatrixSeries x = io::read_matrix_series(opt.data);
  manifest.add_input(opt.data);
  std::vector<NamedThreshold> candidates;
  Dataset transformed;
  for (const auto& f : files) {
    ThresholdSeries z = io::read_threshold_csv(f);
    manifest.add_input(f);
    if (z.length() != x.length()) {
      throw Error(ErrorCode::DimensionMismatch, f.string() + " has " + std::to_string(z.length()) +
                                                    " observations, the data has " + std::to_string(x.length()));
    }
    transformed = io::apply_transform({x, std::move(z)}, t);
    candidates.push_back({f.stem().string(), transformed.z});
  }
  const auto ranking = select_threshold_variable(transformed.x, candidates, config);

  auto csv = open_out(fs::path(out_dir) / "ranking.csv");
  csv << "rank,name,E,k,r_tilde,error\n";
  int rank = 0;
  for (const auto& c : ranking) {
    ++rank;
    std::string err = c.error;
    std::replace(err.begin(), err.end(), '"', '\'');
    csv << rank << ',' << c.name << ',' << (c.e ? io::format_double(*c.e) : "") << ','
        << (c.k ? to_string(*c.k) : "") << ',' << (c.r_tilde ? io::format_double(*c.r_tilde) : "") << ",\"" << err
        << "\"\n";
    out << rank << ". " << c.name << "  E = " << (c.e ? io::format_double(*c.e) : "failed: " + c.error) << '\n';
  }
  csv.close();
  finish(out_dir, manifest, timer);
  return 0;
}

int cmd_simulate(const std::string& spec_file, std::optional<std::uint64_t> seed, std::uint64_t stream,
                 const std::string& format, const std::string& out_dir, io::RunManifest& manifest,
                 std::ostream& out) {
  Timer timer;
  DgpSpec spec;
  if (!spec_file.empty()) {
    ordered_json j = io::read_json(spec_file);
    if (j.contains("config")) j = j["config"]["spec"];
    io::apply_json(j, spec);
    manifest.add_input(spec_file);
  }
  if (seed) spec.seed = *seed;
  if (format != "csv" && format != "binary") throw Error(ErrorCode::InvalidArgument, "--format must be csv or binary");
  spec.validate();
  manifest.seed = spec.seed;
  manifest.config = {{"spec", io::to_json(spec)}, {"stream", stream}, {"format", format}};

  const SimulatedDataset data = simulate_dataset(spec, Rng(spec.seed, stream));
  const fs::path dir(out_dir);
  if (format == "csv") {
    io::write_matrix_csv(dir / "X.csv", data.x);
  } else {
    io::write_matrix_binary(dir / "X.bin", data.x);
  }
  io::write_threshold_csv(dir / "z.csv", data.z);
  io::write_matrix_csv(dir / "F.csv", data.truth.factors);
  io::write_json(dir / "truth.json", io::truth_json(data.truth));
  finish(dir, manifest, timer);
  out << "simulated " << spec.T << " observations of " << spec.p1 << "x" << spec.p2 << " into " << out_dir << '\n';
  return 0;
}

bool looks_paper_scale(const ExperimentGrid& g) {
  for (const auto& s : g.settings) {
    if (s.spec.p1 * s.spec.p2 >= 1600 && s.spec.T >= 2400 && g.n_reps >= 200) return true;
  }
  return false;
}

int cmd_mc(const std::string& grid_file, const std::string& out_dir, std::optional<int> threads,
           std::optional<int> reps, bool paper_scale, io::RunManifest& manifest, std::ostream& out,
           std::ostream& err) {
  Timer timer;
  io::GridFile file = io::grid_from_json(io::read_json(grid_file));
  manifest.add_input(grid_file);
  ExperimentGrid& grid = file.grid;
  if (reps) grid.n_reps = *reps;
  if (auto env = env_threads()) grid.threads = *env;
  if (threads) grid.threads = *threads;
  if ((file.paper_scale || looks_paper_scale(grid)) && !paper_scale) {
    throw Error(ErrorCode::InvalidArgument,
                "grid '" + grid.name + "' is paper scale (hours of CPU); rerun with --paper-scale to confirm");
  }
  grid.validate();
  manifest.seed = grid.master_seed;
  manifest.config = io::to_json(grid);

  const bool chatty = verbose();
  const auto table = run_monte_carlo(grid, [&](std::size_t done, std::size_t total) {
    if (chatty) err << "\r" << done << "/" << total << std::flush;
  });
  if (chatty) err << '\n';

  const fs::path dir(out_dir);
  {
    auto csv = open_out(dir / "metrics.csv");
    io::write_metrics_csv(csv, table);
  }
  {
    auto csv = open_out(dir / "replicates.csv");
    io::write_replicates_csv(csv, table);
  }
  try {
    const auto boxes = summarize_distance_boxes(table);
    auto csv = open_out(dir / "boxes.csv");
    io::write_boxes_csv(csv, boxes);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptySeries) throw;
  }
  io::write_json(dir / "metrics.json", io::to_json(table));
  finish(dir, manifest, timer);

  for (const auto& r : table.rows) {
    out << r.setting << " [" << r.variant << "] mean|r-r0| = " << io::format_double(r.mean_abs_error)
        << " (failed " << r.n_failed << "/" << r.n_reps << ")\n";
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-regime threshold matrix factor models: estimation, simulation and Monte Carlo", "tmfm"};
  app.set_version_flag("--version", io::tool_version());
  app.require_subcommand(1);

  io::RunManifest manifest;
  manifest.argv = args;

  EstimationOptions est;
  std::string out_dir;
  std::string truth_file;

  auto* fit_cmd = app.add_subcommand("fit", "estimate factor counts, threshold and loading spaces");
  est.attach(fit_cmd);
  fit_cmd->add_option("--out", out_dir, "output directory")->required();
  fit_cmd->add_option("--truth", truth_file, "truth.json for a post-hoc report (default: next to --data)");

  auto* gr_cmd = app.add_subcommand("gr-curve", "G(r) over the threshold grid");
  est.attach(gr_cmd);
  gr_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* eig_cmd = app.add_subcommand("eigen-ratios", "eigenvalue ratio curves of the four kernels");
  est.attach(eig_cmd);
  eig_cmd->add_option("--out", out_dir, "output directory")->required();

  std::string candidates;
  std::optional<double> t0_fraction;
  auto* sel_cmd = app.add_subcommand("select-threshold", "rank candidate threshold variables out of sample");
  est.attach(sel_cmd, false);
  sel_cmd->add_option("--candidates", candidates, "directory of threshold CSVs, one per candidate")->required();
  sel_cmd->add_option("--t0-fraction", t0_fraction, "training fraction (default 0.75)");
  sel_cmd->add_option("--out", out_dir, "output directory")->required();

  std::string spec_file;
  std::optional<std::uint64_t> seed;
  std::uint64_t stream = 0;
  std::string format = "csv";
  auto* sim_cmd = app.add_subcommand("simulate", "draw one dataset from the data-generating process");
  sim_cmd->add_option("--spec", spec_file, "DGP spec JSON (defaults to the strong-factor setting)");
  sim_cmd->add_option("--seed", seed, "64-bit seed (overrides the spec)");
  sim_cmd->add_option("--stream", stream, "RNG stream id");
  sim_cmd->add_option("--format", format, "csv or binary");
  sim_cmd->add_option("--out", out_dir, "output directory")->required();

  std::string grid_file;
  std::optional<int> threads;
  std::optional<int> reps;
  bool paper_scale = false;
  auto* mc_cmd = app.add_subcommand("mc", "run a Monte Carlo grid");
  mc_cmd->add_option("--grid", grid_file, "experiment grid JSON")->required();
  mc_cmd->add_option("--out", out_dir, "output directory")->required();
  mc_cmd->add_option("--threads", threads, "worker threads (default: TMFM_THREADS or all cores)");
  mc_cmd->add_option("--reps", reps, "override n_reps");
  mc_cmd->add_flag("--paper-scale", paper_scale, "allow full paper-scale grids");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();  // program name
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << io::tool_version() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    report(err, "InvalidArgument", "config", e.what());
    return 4;
  }

  try {
    if (fit_cmd->parsed()) {
      manifest.command = "fit";
      return cmd_fit(est, out_dir, truth_file, manifest, out);
    }
    if (gr_cmd->parsed()) {
      manifest.command = "gr-curve";
      return cmd_gr_curve(est, out_dir, manifest, out);
    }
    if (eig_cmd->parsed()) {
      manifest.command = "eigen-ratios";
      return cmd_eigen_ratios(est, out_dir, manifest, out);
    }
    if (sel_cmd->parsed()) {
      manifest.command = "select-threshold";
      return cmd_select(est, candidates, t0_fraction, out_dir, manifest, out);
    }
    if (sim_cmd->parsed()) {
      manifest.command = "simulate";
      return cmd_simulate(spec_file, seed, stream, format, out_dir, manifest, out);
    }
    if (mc_cmd->parsed()) {
      manifest.command = "mc";
      return cmd_mc(grid_file, out_dir, threads, reps, paper_scale, manifest, out, err);
    }
  } catch (const Error& e) {
    report(err, std::string(to_string(e.code())), category_name(e.category()), e.what(), e.stage(), e.index());
    return exit_code(e.category());
  } catch (const fs::filesystem_error& e) {
    report(err, "IoError", "input", e.what());
    return 2;
  } catch (const std::exception& e) {
    report(err, "Internal", "internal", e.what());
    return 1;
  }
  return 4;
}

}  // namespace tmfm::cli
