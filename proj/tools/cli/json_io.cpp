#include "json_io.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "io.hpp"
#include "tmfm/error.hpp"

namespace tmfm::io {
namespace {

ordered_json number(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

void check_keys(const ordered_json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::SchemaError, where + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.contains(key)) throw Error(ErrorCode::SchemaError, where + ": unknown key '" + key + "'");
  }
}

template <class F>
void guarded(const std::string& where, F&& body) {
  try {
    body();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, where + ": " + e.what());
  }
}

template <class T>
void read_if(const ordered_json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ordered_json matrix_json(const Eigen::MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const ordered_json& j) {
  Eigen::MatrixXd m;
  guarded("matrix", [&] {
    const auto rows = static_cast<Index>(j.size());
    const auto cols = rows ? static_cast<Index>(j.at(0).size()) : 0;
    m.resize(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      if (static_cast<Index>(j.at(r).size()) != cols) throw Error(ErrorCode::SchemaError, "ragged matrix");
      for (Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
    }
  });
  return m;
}

ordered_json to_json(const EstimationConfig& c) {
  ordered_json j;
  j["h0"] = c.h0;
  j["q_lo"] = c.q_lo;
  j["q_hi"] = c.q_hi;
  j["k"] = c.k_override ? ordered_json(to_string(*c.k_override)) : ordered_json(nullptr);
  j["t0_fraction"] = c.t0_fraction;
  j["ridge_tol"] = c.ridge_tol;
  j["grid_stride"] = c.grid_stride;
  j["seed"] = c.seed;
  return j;
}

void apply_json(const ordered_json& j, EstimationConfig& c) {
  check_keys(j, {"h0", "q_lo", "q_hi", "k", "t0_fraction", "ridge_tol", "grid_stride", "seed"}, "estimation config");
  guarded("estimation config", [&] {
    read_if(j, "h0", c.h0);
    read_if(j, "q_lo", c.q_lo);
    read_if(j, "q_hi", c.q_hi);
    if (j.contains("k")) {
      if (j["k"].is_null()) {
        c.k_override.reset();
      } else {
        c.k_override = parse_factor_counts(j["k"].get<std::string>());
      }
    }
    read_if(j, "t0_fraction", c.t0_fraction);
    read_if(j, "ridge_tol", c.ridge_tol);
    read_if(j, "grid_stride", c.grid_stride);
    read_if(j, "seed", c.seed);
  });
}

ordered_json to_json(const DgpSpec& s) {
  ordered_json j;
  j["p1"] = s.p1;
  j["p2"] = s.p2;
  j["T"] = s.T;
  j["k1"] = s.k1;
  j["k2"] = s.k2;
  j["r0"] = s.r0;
  j["ar_diag"] = s.ar_diag;
  j["noise_offdiag"] = s.noise_offdiag;
  j["noise_scale"] = s.noise_scale;
  j["delta"] = s.delta;
  j["beta"] = s.beta;
  j["loadings"] = s.loading_mode == LoadingMode::Independent ? "independent" : "paired";
  j["seed"] = s.seed;
  j["burn_in"] = s.burn_in;
  return j;
}

void apply_json(const ordered_json& j, DgpSpec& s) {
  check_keys(j, {"name", "p1", "p2", "T", "k1", "k2", "r0", "ar_diag", "noise_offdiag", "noise_scale", "delta", "beta",
                 "loadings", "seed", "burn_in"},
             "dgp spec");
  guarded("dgp spec", [&] {
    read_if(j, "p1", s.p1);
    read_if(j, "p2", s.p2);
    read_if(j, "T", s.T);
    read_if(j, "k1", s.k1);
    read_if(j, "k2", s.k2);
    read_if(j, "r0", s.r0);
    read_if(j, "ar_diag", s.ar_diag);
    read_if(j, "noise_offdiag", s.noise_offdiag);
    read_if(j, "noise_scale", s.noise_scale);
    read_if(j, "delta", s.delta);
    read_if(j, "beta", s.beta);
    if (j.contains("loadings")) {
      const auto mode = j["loadings"].get<std::string>();
      if (mode == "independent") {
        s.loading_mode = LoadingMode::Independent;
      } else if (mode == "paired") {
        s.loading_mode = LoadingMode::Paired;
      } else {
        throw Error(ErrorCode::SchemaError, "dgp spec: loadings must be 'independent' or 'paired'");
      }
    }
    read_if(j, "seed", s.seed);
    read_if(j, "burn_in", s.burn_in);
  });
}

GridFile grid_from_json(const ordered_json& j) {
  check_keys(j, {"name", "base", "settings", "sweep", "n_reps", "k_variants", "master_seed", "estimation", "histogram",
                 "threads", "paper_scale", "description"},
             "grid");
  GridFile out;
  ExperimentGrid& g = out.grid;
  guarded("grid", [&] {
    read_if(j, "name", g.name);
    if (j.contains("base")) apply_json(j["base"], g.base);
    read_if(j, "n_reps", g.n_reps);
    read_if(j, "master_seed", g.master_seed);
    read_if(j, "threads", g.threads);
    read_if(j, "paper_scale", out.paper_scale);
    if (j.contains("estimation")) apply_json(j["estimation"], g.estimation);
    if (j.contains("histogram")) {
      const auto& h = j["histogram"];
      check_keys(h, {"lo", "hi", "bins"}, "histogram");
      read_if(h, "lo", g.histogram.lo);
      read_if(h, "hi", g.histogram.hi);
      read_if(h, "bins", g.histogram.bins);
    }
    if (j.contains("k_variants")) {
      g.k_variants.clear();
      for (const auto& v : j["k_variants"]) g.k_variants.push_back(KVariant::parse(v.get<std::string>()));
    }
    if (j.contains("settings")) {
      for (const auto& s : j["settings"]) {
        Setting setting{"setting " + std::to_string(g.settings.size() + 1), g.base};
        apply_json(s, setting.spec);
        read_if(s, "name", setting.name);
        g.settings.push_back(std::move(setting));
      }
    } else {
      SweepAxes axes;
      if (j.contains("sweep")) {
        const auto& sw = j["sweep"];
        check_keys(sw, {"delta", "beta", "dims", "T"}, "sweep");
        read_if(sw, "delta", axes.delta);
        read_if(sw, "beta", axes.beta);
        read_if(sw, "dims", axes.dims);
        read_if(sw, "T", axes.T);
      }
      g.settings = expand_sweep(g.base, axes);
    }
  });
  return out;
}

ordered_json to_json(const ExperimentGrid& g) {
  ordered_json j;
  j["name"] = g.name;
  j["base"] = to_json(g.base);
  ordered_json settings = ordered_json::array();
  for (const auto& s : g.settings) {
    ordered_json e = to_json(s.spec);
    e["name"] = s.name;
    settings.push_back(std::move(e));
  }
  j["settings"] = std::move(settings);
  j["n_reps"] = g.n_reps;
  ordered_json variants = ordered_json::array();
  for (const auto& v : g.k_variants) variants.push_back(v.label);
  j["k_variants"] = std::move(variants);
  j["master_seed"] = g.master_seed;
  j["estimation"] = to_json(g.estimation);
  j["histogram"] = {{"lo", g.histogram.lo}, {"hi", g.histogram.hi}, {"bins", g.histogram.bins}};
  j["threads"] = g.threads;
  return j;
}

ordered_json to_json(const FactorCountEstimate& e) {
  ordered_json j;
  j["k_hat"] = to_string(e.k_hat);
  j["eta"] = {e.eta1, e.eta2};
  j["chosen_regime"] = {static_cast<int>(e.chosen_regime[0]), static_cast<int>(e.chosen_regime[1])};
  j["degenerate_spectrum"] = e.degenerate_spectrum;
  ordered_json spaces = ordered_json::object();
  for (Orientation s : kOrientations) {
    for (Regime i : kRegimes) {
      ordered_json q;
      q["k"] = e.k_per_space.at(s, i);
      q["kernel_norm"] = e.kernel_norms.at(s, i);
      ordered_json ratios = ordered_json::array();
      for (double r : e.ratio_curves.at(s, i)) ratios.push_back(number(r));
      q["ratios"] = std::move(ratios);
      q["eigenvalues"] = std::vector<double>(e.eigenvalues.at(s, i).data(),
                                             e.eigenvalues.at(s, i).data() + e.eigenvalues.at(s, i).size());
      spaces[space_label(s, i)] = std::move(q);
    }
  }
  j["spaces"] = std::move(spaces);
  return j;
}

ordered_json to_json(const FittedModel& m) {
  ordered_json j;
  j["k"] = to_string(m.k);
  j["r_tilde"] = m.r_tilde;
  j["eta"] = {m.eta1, m.eta2};
  j["config"] = to_json(m.config);
  j["factor_counts"] = m.counts ? to_json(*m.counts) : ordered_json(nullptr);
  ordered_json loadings = ordered_json::object();
  for (Orientation s : kOrientations) {
    for (Regime i : kRegimes) {
      const auto& eig = m.decompositions.at(s, i);
      ordered_json q;
      q["basis"] = matrix_json(m.loadings.at(s, i).basis);
      q["eigenvalues"] = std::vector<double>(eig.values.data(), eig.values.data() + eig.values.size());
      loadings[space_label(s, i)] = std::move(q);
    }
  }
  j["loadings"] = std::move(loadings);
  j["threshold_grid_size"] = m.threshold.grid.size();
  return j;
}

ordered_json truth_json(const SimulationTruth& truth) {
  ordered_json j;
  j["spec"] = to_json(truth.spec);
  j["r0"] = truth.r0;
  j["R1"] = matrix_json(truth.R1);
  j["R2"] = matrix_json(truth.R2);
  j["C1"] = matrix_json(truth.C1);
  j["C2"] = matrix_json(truth.C2);
  return j;
}

ordered_json to_json(const MetricsTable& t) {
  ordered_json j;
  j["grid"] = t.grid;
  j["histogram"] = {{"lo", t.histogram.lo}, {"hi", t.histogram.hi}, {"bins", t.histogram.bins}};
  ordered_json rows = ordered_json::array();
  for (const auto& r : t.rows) {
    ordered_json row;
    row["setting"] = r.setting;
    row["variant"] = r.variant;
    row["n_reps"] = r.n_reps;
    row["n_failed"] = r.n_failed;
    row["k_frequency"] = r.k_frequency;
    row["mean_abs_error"] = number(r.mean_abs_error);
    row["sd_abs_error"] = number(r.sd_abs_error);
    row["median_signed_error"] = number(r.median_signed_error);
    row["mean_r_hat"] = number(r.mean_r_hat);
    ordered_json d = ordered_json::object();
    for (Orientation s : kOrientations) {
      for (Regime i : kRegimes) d[space_label(s, i)] = number(r.mean_distance.at(s, i));
    }
    row["mean_distance"] = std::move(d);
    row["r_hat_histogram"] = r.r_hat_histogram;
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  return j;
}

void write_metrics_csv(std::ostream& out, const MetricsTable& t) {
  std::set<std::string> keys;
  for (const auto& r : t.rows) {
    for (const auto& [k, v] : r.k_frequency) keys.insert(k);
  }
  out << "setting,variant,n_reps,n_failed";
  for (const auto& k : keys) out << ",freq_" << k;
  out << ",mean_abs_error,sd_abs_error,median_signed_error,mean_r_hat";
  for (Orientation s : kOrientations) {
    for (Regime i : kRegimes) out << ",mean_D_" << space_label(s, i);
  }
  for (int b = 0; b < t.histogram.bins; ++b) out << ",hist_" << b;
  out << '\n';
  for (const auto& r : t.rows) {
    out << '"' << r.setting << "\"," << r.variant << ',' << r.n_reps << ',' << r.n_failed;
    for (const auto& k : keys) {
      auto it = r.k_frequency.find(k);
      out << ',' << format_double(it == r.k_frequency.end() ? 0.0 : it->second);
    }
    out << ',' << format_double(r.mean_abs_error) << ',' << format_double(r.sd_abs_error) << ','
        << format_double(r.median_signed_error) << ',' << format_double(r.mean_r_hat);
    for (double d : r.mean_distance.items) out << ',' << format_double(d);
    for (int c : r.r_hat_histogram) out << ',' << c;
    out << '\n';
  }
}

void write_replicates_csv(std::ostream& out, const MetricsTable& t) {
  out << "setting,replicate,variant,k_hat,k_used,r_hat,r0,D_Q11,D_Q12,D_Q21,D_Q22,error\n";
  for (const auto& rep : t.replicates) {
    // settings are indexed in row order: rows = settings x variants
    const std::size_t n_var = rep.variants.size();
    const std::string setting = n_var ? t.rows.at(rep.setting * n_var).setting : std::to_string(rep.setting);
    for (const auto& v : rep.variants) {
      out << '"' << setting << "\"," << rep.replicate << ',' << v.label << ','
          << (rep.k_hat ? to_string(*rep.k_hat) : "") << ',' << (v.k ? to_string(*v.k) : "") << ','
          << (v.r_hat ? format_double(*v.r_hat) : "") << ',' << format_double(rep.r0);
      for (std::size_t q = 0; q < 4; ++q) out << ',' << (v.distance ? format_double(v.distance->items[q]) : "");
      std::string err = v.error;
      std::replace(err.begin(), err.end(), '"', '\'');
      out << ",\"" << err << "\"\n";
    }
  }
}

void write_boxes_csv(std::ostream& out, const std::vector<DistanceBox>& boxes) {
  out << "setting,variant,space,n,min,q1,median,q3,max\n";
  for (const auto& b : boxes) {
    out << '"' << b.setting << "\"," << b.variant << ',' << b.space << ',' << b.n << ','
        << format_double(b.summary.min) << ',' << format_double(b.summary.q1) << ','
        << format_double(b.summary.median) << ',' << format_double(b.summary.q3) << ','
        << format_double(b.summary.max) << '\n';
  }
}

ordered_json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for reading");
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const ordered_json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

}  // namespace tmfm::io
