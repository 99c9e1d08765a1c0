#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cdpnes/analysis.hpp"
#include "cdpnes/config.hpp"
#include "cdpnes/engine.hpp"
#include "cdpnes/games.hpp"
#include "cdpnes/graph.hpp"
#include "cdpnes/privacy.hpp"

namespace cdpnes {

struct AssumptionViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GameSpec {
  std::string kind;  // connectivity | quadratic | random_quadratic
  int n = 0;
  std::optional<double> box_lo, box_hi;
  std::string csv;             // quadratic
  std::uint64_t seed = 0;      // random_quadratic
  double diag_boost = 1.0;     // random_quadratic
  double sample_lo = -1.0, sample_hi = 1.0;  // M sampling box when unconstrained
};

struct GraphSpec {
  std::string kind;  // ring | random | csv
  int n = 0;
  double self_weight = 0.5;
  double edge_prob = 0.1;
  std::uint64_t seed = 0;
  std::string csv;
};

struct PrivacySpec {
  bool epsilon_mode = false;
  std::vector<double> values;  // epsilons or thetas, one run cell per entry
};

struct OutputSpec {
  std::string dir = "out";
  std::string trace_prefix = "trace";
  std::string summary = "summary.csv";
};

struct ExperimentConfig {
  GameSpec game;
  GraphSpec graph;
  Compressor compressor = Compressor::identity();
  int scalar_bits = 32;
  double gamma = 0.0, eta = 0.0, alpha = 0.0;
  int horizon = 0;
  bool projected = false;
  std::string x0_kind = "uniform01";  // uniform01 | zero
  PrivacySpec privacy;
  std::vector<std::uint64_t> seeds{0};
  OutputSpec outputs;
  std::vector<std::string> bits_to_target_variants;

  static ExperimentConfig load_file(const std::filesystem::path& path) {
    Config cfg = Config::parse_file(path);
    return load(cfg);
  }

  static ExperimentConfig load(Config& cfg) {
    ExperimentConfig ec;

    ec.game.kind = cfg.require_str("game", "kind");
    ec.game.n = static_cast<int>(cfg.require_int("game", "n"));
    if (cfg.has("game", "box_lo") || cfg.has("game", "box_hi")) {
      ec.game.box_lo = cfg.require_real("game", "box_lo");
      ec.game.box_hi = cfg.require_real("game", "box_hi");
    }
    ec.game.csv = cfg.get_str("game", "csv").value_or("");
    ec.game.seed = static_cast<std::uint64_t>(cfg.get_int("game", "seed", 0));
    ec.game.diag_boost = cfg.get_real("game", "diag_boost", 1.0);
    ec.game.sample_lo = cfg.get_real("game", "sample_lo", -1.0);
    ec.game.sample_hi = cfg.get_real("game", "sample_hi", 1.0);

    ec.graph.kind = cfg.require_str("graph", "kind");
    ec.graph.n = static_cast<int>(cfg.get_int("graph", "n", ec.game.n));
    ec.graph.self_weight = cfg.get_real("graph", "self_weight", 0.5);
    ec.graph.edge_prob = cfg.get_real("graph", "edge_prob", 0.1);
    ec.graph.seed = static_cast<std::uint64_t>(cfg.get_int("graph", "seed", 0));
    ec.graph.csv = cfg.get_str("graph", "csv").value_or("");

    const std::string comp_kind = cfg.require_str("compressor", "kind");
    std::string spec = comp_kind;
    if (cfg.has("compressor", "b"))
      spec += ":b=" + std::to_string(cfg.require_int("compressor", "b"));
    if (cfg.has("compressor", "k"))
      spec += (spec.find(':') == std::string::npos ? ":" : ",") +
              std::string("k=") + std::to_string(cfg.require_int("compressor", "k"));
    ec.compressor = Compressor::parse(spec);
    ec.scalar_bits = static_cast<int>(cfg.get_int("compressor", "l", 32));

    ec.gamma = cfg.require_real("run", "gamma");
    ec.eta = cfg.require_real("run", "eta");
    ec.alpha = cfg.require_real("run", "alpha");
    ec.horizon = static_cast<int>(cfg.require_int("run", "K"));
    ec.projected = cfg.get_bool("run", "projected", false);
    ec.x0_kind = cfg.get_str("run", "x0").value_or("uniform01");
    if (ec.x0_kind != "uniform01" && ec.x0_kind != "zero")
      throw ConfigError("run.x0 must be uniform01 or zero");
    const std::string h0 = cfg.get_str("run", "h0").value_or("zero");
    if (h0 != "zero") throw ConfigError("run.h0 only supports zero");

    const bool has_eps = cfg.has("privacy", "epsilon");
    const bool has_theta = cfg.has("privacy", "theta");
    if (has_eps == has_theta)
      throw ConfigError(
          "privacy: exactly one of 'epsilon' or 'theta' must be given");
    ec.privacy.epsilon_mode = has_eps;
    ec.privacy.values =
        cfg.get_real_list("privacy", has_eps ? "epsilon" : "theta");
    if (ec.privacy.values.empty())
      throw ConfigError("privacy: empty value list");
    for (double v : ec.privacy.values) {
      if (has_eps && v <= 0.0) throw ConfigError("privacy: epsilon must be > 0");
      if (!has_eps && v < 0.0) throw ConfigError("privacy: theta must be >= 0");
    }

    if (cfg.has("seeds", "list")) {
      ec.seeds = cfg.get_u64_list("seeds", "list");
      if (ec.seeds.empty()) throw ConfigError("seeds: empty list");
    }

    ec.outputs.dir = cfg.get_str("outputs", "dir").value_or("out");
    ec.outputs.trace_prefix =
        cfg.get_str("outputs", "trace_prefix").value_or("trace");
    ec.outputs.summary = cfg.get_str("outputs", "summary").value_or("summary.csv");
    if (const char* env = std::getenv("CDPNES_OUT_DIR"))
      ec.outputs.dir = env;

    if (cfg.has("bits_to_target", "variants")) {
      std::stringstream ss(*cfg.get_str("bits_to_target", "variants"));
      std::string item;
      while (ss >> item) ec.bits_to_target_variants.push_back(item);
    }

    cfg.finish({"game", "graph", "compressor", "run", "privacy", "seeds",
                "outputs", "bits_to_target"});
    return ec;
  }

  std::unique_ptr<Game> build_game() const {
    std::optional<BoxConstraint> box;
    const int d = game.kind == "connectivity" ? 2 : 1;
    if (game.box_lo)
      box = BoxConstraint::cube(d, *game.box_lo, *game.box_hi);
    if (game.kind == "connectivity") {
      const double lo = game.box_lo.value_or(-10.0);
      const double hi = game.box_hi.value_or(10.0);
      return std::make_unique<ConnectivityControlGame>(game.n, lo, hi);
    }
    if (game.kind == "quadratic") {
      if (game.csv.empty())
        throw ConfigError("game: quadratic requires csv = <path>");
      return std::make_unique<QuadraticGame>(
          QuadraticGame::load_csv(game.csv, box));
    }
    if (game.kind == "random_quadratic") {
      return std::make_unique<QuadraticGame>(
          random_quadratic_game(game.n, game.seed, game.diag_boost, box));
    }
    throw ConfigError("game: unknown kind '" + game.kind + "'");
  }

  MixingMatrix build_graph() const {
    if (graph.kind == "ring") return build_ring(graph.n, graph.self_weight);
    if (graph.kind == "random")
      return build_random_strongly_connected(graph.n, graph.edge_prob,
                                             graph.seed);
    if (graph.kind == "csv") {
      if (graph.csv.empty()) throw ConfigError("graph: csv kind requires csv key");
      return load_csv(graph.csv);
    }
    throw ConfigError("graph: unknown kind '" + graph.kind + "'");
  }

  BoxConstraint sampling_box(const Game& g) const {
    if (auto box = g.constraint()) return *box;
    return BoxConstraint::cube(g.action_dim(), game.sample_lo, game.sample_hi);
  }
};

struct SummaryRow {
  double label = 0.0;  // epsilon in epsilon mode, theta otherwise
  int n_seeds = 0;
  int k = 0;
  double mean_residual = 0.0;
  double std_residual = 0.0;
  std::int64_t cum_bits = 0;
};

struct CellRun {
  double label = 0.0;
  double theta = 0.0;
  std::uint64_t seed = 0;
  RunResult result;
  std::filesystem::path trace_path;
  std::filesystem::path final_states_path;
};

struct ExperimentOutcome {
  std::vector<CellRun> runs;          // ordered by (cell, seed)
  std::vector<SummaryRow> summary;
  std::vector<std::string> warnings;
  std::filesystem::path summary_path;
  bool any_divergence = false;
};

namespace detail {

inline std::string format_label(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

inline void collect_feasibility_warnings(const ExperimentConfig& ec,
                                         const Game& game,
                                         const MixingMatrix& graph,
                                         const GameConstants& gc,
                                         std::vector<std::string>& warnings) {
  const int m = game.num_agents() * game.action_dim();
  const CompressorContract con = ec.compressor.contract(m);
  if (ec.alpha > 1.0 / con.r + 1e-12)
    warnings.push_back("alpha exceeds 1/r for this compressor (alpha=" +
                       format_label(ec.alpha) + ", 1/r=" +
                       format_label(1.0 / con.r) + ")");
  try {
    const ParamRecommendation rec = recommend_params(
        ec.eta, gc.mu_r, gc.L_m, game.num_agents(), graph, ec.alpha, con);
    if (!rec.monotone.feasible)
      warnings.push_back("mu_F <= 0 at eta=" + format_label(ec.eta) +
                         "; no convergence certificate");
    else if (!rec.eta_feasible)
      warnings.push_back("eta exceeds certified bound (" + rec.describe() + ")");
    else if (std::abs(ec.gamma - rec.gamma_star) >
             1e-12 * std::max(1.0, rec.gamma_star))
      warnings.push_back("gamma differs from certified gamma_star=" +
                         format_label(rec.gamma_star));
  } catch (const std::exception& e) {
    warnings.push_back(std::string("certificate unavailable: ") + e.what());
  }
}

}  // namespace detail

// Runs every (privacy cell, seed) combination, writes one trace CSV per run
// plus an aggregated summary, and returns everything in memory. Cells execute
// concurrently; outputs are merged and written in deterministic order.
inline ExperimentOutcome run_experiment(const ExperimentConfig& ec,
                                        bool write_files = true) {
  const std::unique_ptr<Game> game = ec.build_game();
  const MixingMatrix graph = ec.build_graph();
  if (game->num_agents() != graph.size())
    throw ConfigError("game and graph disagree on the number of agents");
  const GraphValidationReport grep = validate(graph);
  if (!grep.ok())
    throw AssumptionViolation("graph fails validation: " + grep.describe());

  const int n = game->num_agents();
  const int d = game->action_dim();
  ExperimentOutcome out;

  const GameConstants gc =
      estimate_constants(*game, ec.sampling_box(*game), 2000, 0);
  if (!gc.warning.empty()) out.warnings.push_back(gc.warning);
  detail::collect_feasibility_warnings(ec, *game, graph, gc, out.warnings);

  struct Job {
    double label;
    double theta;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (double v : ec.privacy.values) {
    double theta = v;
    if (ec.privacy.epsilon_mode) {
      PrivacyBudget budget;
      budget.epsilon = Eigen::VectorXd::Constant(n, v);
      budget.horizon = ec.horizon;
      budget.M = gc.M;
      budget.gamma = ec.gamma;
      budget.eta = ec.eta;
      theta = kNoiseSafetyFactor * min_noise_scale(budget)(0);
    }
    for (std::uint64_t seed : ec.seeds) jobs.push_back({v, theta, seed});
  }

  auto run_job = [&](const Job& job) {
    RunParams params;
    params.gamma = ec.gamma;
    params.eta = ec.eta;
    params.alpha = ec.alpha;
    params.horizon = ec.horizon;
    params.noise = NoiseParams::uniform(n, job.theta);
    params.compressor = ec.compressor;
    params.projected = ec.projected;
    params.seed = job.seed;
    params.scalar_bits = ec.scalar_bits;
    const Eigen::MatrixXd x0 =
        ec.x0_kind == "zero"
            ? Eigen::MatrixXd::Zero(n, n * d)
            : random_initial_estimates(n, d, 0.0, 1.0, job.seed);
    const Eigen::MatrixXd h0 = Eigen::MatrixXd::Zero(n, n * d);
    return run(*game, graph, params, x0, h0);
  };

  std::vector<std::future<RunResult>> futures;
  futures.reserve(jobs.size());
  const unsigned max_par = std::max(1u, std::thread::hardware_concurrency());
  std::vector<RunResult> results(jobs.size());
  for (std::size_t base = 0; base < jobs.size(); base += max_par) {
    const std::size_t hi = std::min(jobs.size(), base + max_par);
    futures.clear();
    for (std::size_t j = base; j < hi; ++j)
      futures.push_back(std::async(std::launch::async,
                                   [&run_job, &jobs, j] { return run_job(jobs[j]); }));
    for (std::size_t j = base; j < hi; ++j) results[j] = futures[j - base].get();
  }

  const std::filesystem::path dir = ec.outputs.dir;
  if (write_files) std::filesystem::create_directories(dir);
  const std::string tag = ec.privacy.epsilon_mode ? "eps" : "theta";
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    CellRun cell;
    cell.label = jobs[j].label;
    cell.theta = jobs[j].theta;
    cell.seed = jobs[j].seed;
    cell.result = std::move(results[j]);
    const std::string stem = ec.outputs.trace_prefix + "_" + tag +
                             detail::format_label(cell.label) + "_seed" +
                             std::to_string(cell.seed);
    cell.trace_path = dir / (stem + ".csv");
    cell.final_states_path = dir / (stem + "_final.csv");
    if (cell.result.diverged_at) {
      out.any_divergence = true;
      out.warnings.push_back("divergence at iteration " +
                             std::to_string(*cell.result.diverged_at) +
                             " (cell " + detail::format_label(cell.label) +
                             ", seed " + std::to_string(cell.seed) + ")");
    }
    if (write_files) {
      std::ofstream f(cell.trace_path);
      f << trace_csv(cell.result, cell.seed);
      std::ofstream fin(cell.final_states_path);
      fin << states_csv(cell.result);
    }
    out.runs.push_back(std::move(cell));
  }

  // per-cell aggregation over seeds
  const int n_seeds = static_cast<int>(ec.seeds.size());
  for (std::size_t c = 0; c < ec.privacy.values.size(); ++c) {
    const std::size_t base = c * n_seeds;
    const double label = ec.privacy.values[c];
    const int steps = static_cast<int>(out.runs[base].result.trace.size());
    if (steps == 0) {
      SummaryRow row;
      row.label = label;
      row.n_seeds = n_seeds;
      row.k = -1;  // initial state only (K = 0)
      double mean = 0.0, sq = 0.0;
      for (int s = 0; s < n_seeds; ++s) {
        const RunResult& r = out.runs[base + s].result;
        const double v = r.d > 1 ? r.initial_residual_own : r.initial_residual_full;
        mean += v;
        sq += v * v;
      }
      mean /= n_seeds;
      row.mean_residual = mean;
      row.std_residual =
          n_seeds > 1 ? std::sqrt(std::max(0.0, (sq - n_seeds * mean * mean) /
                                                     (n_seeds - 1)))
                      : 0.0;
      row.cum_bits = 0;
      out.summary.push_back(row);
      continue;
    }
    for (int k = 0; k < steps; ++k) {
      SummaryRow row;
      row.label = label;
      row.n_seeds = n_seeds;
      row.k = k;
      double mean = 0.0, sq = 0.0;
      for (int s = 0; s < n_seeds; ++s) {
        const RunResult& r = out.runs[base + s].result;
        const double v = k < static_cast<int>(r.trace.size())
                             ? RunResult::reported_residual(r.trace[k], r.d)
                             : std::numeric_limits<double>::quiet_NaN();
        mean += v;
        sq += v * v;
      }
      mean /= n_seeds;
      row.mean_residual = mean;
      row.std_residual =
          n_seeds > 1 ? std::sqrt(std::max(0.0, (sq - n_seeds * mean * mean) /
                                                     (n_seeds - 1)))
                      : 0.0;
      row.cum_bits = out.runs[base].result.trace[k].cum_bits;
      out.summary.push_back(row);
    }
  }

  out.summary_path = dir / ec.outputs.summary;
  if (write_files) {
    std::ofstream f(out.summary_path);
    f.precision(17);
    f << "epsilon,seed,k,mean_residual,std_residual,cum_bits\n";
    for (const SummaryRow& row : out.summary)
      f << row.label << "," << row.n_seeds << "," << row.k << ","
        << row.mean_residual << "," << row.std_residual << "," << row.cum_bits
        << "\n";
  }
  for (const std::string& w : out.warnings)
    std::cerr << "[cdpnes] warning: " << w << "\n";
  return out;
}

struct BitsToTargetRow {
  std::string variant;
  bool reached = false;
  int cross_k = -1;              // first k with mean residual <= target
  std::int64_t total_bits = 0;   // cumulative bits at the crossing
  double final_mean_residual = 0.0;
  double floor_estimate = std::numeric_limits<double>::quiet_NaN();
};

struct BitsToTargetResult {
  double target = 0.0;
  std::vector<BitsToTargetRow> rows;

  std::string table() const {
    std::ostringstream os;
    os << "variant,reached,cross_k,total_bits,final_mean_residual,floor_estimate\n";
    for (const auto& r : rows) {
      os << r.variant << "," << (r.reached ? "yes" : "no") << "," << r.cross_k
         << "," << r.total_bits << "," << r.final_mean_residual << ",";
      if (std::isnan(r.floor_estimate))
        os << "n/a";
      else
        os << r.floor_estimate;
      os << "\n";
    }
    return os.str();
  }
};

// Runs each configured compressor variant until the mean reported residual
// crosses the target (or the horizon runs out) and accounts the transmitted
// bits at the crossing. Unreachable targets are reported with the certified
// floor when one exists.
inline BitsToTargetResult bits_to_target(const ExperimentConfig& base,
                                         double target) {
  if (base.privacy.values.size() != 1)
    throw ConfigError("bits_to_target: configure exactly one privacy cell");
  std::vector<std::string> variants = base.bits_to_target_variants;
  if (variants.empty()) variants.push_back(base.compressor.name());

  BitsToTargetResult res;
  res.target = target;
  for (const std::string& v : variants) {
    ExperimentConfig ec = base;
    ec.compressor = Compressor::parse(v);
    ec.outputs.trace_prefix = base.outputs.trace_prefix + "_" + v;
    const ExperimentOutcome outcome = run_experiment(ec, /*write_files=*/false);

    BitsToTargetRow row;
    row.variant = v;
    const int n_seeds = static_cast<int>(ec.seeds.size());
    const int steps = static_cast<int>(outcome.runs.front().result.trace.size());
    for (int k = 0; k < steps && !row.reached; ++k) {
      double mean = 0.0;
      for (int s = 0; s < n_seeds; ++s) {
        const RunResult& r = outcome.runs[s].result;
        mean += RunResult::reported_residual(r.trace[k], r.d);
      }
      mean /= n_seeds;
      row.final_mean_residual = mean;
      if (mean <= target) {
        row.reached = true;
        row.cross_k = k;
        row.total_bits = outcome.runs.front().result.trace[k].cum_bits;
      }
    }
    if (!row.reached) {
      // report the certified floor when the analysis pipeline yields one
      try {
        const std::unique_ptr<Game> game = ec.build_game();
        const MixingMatrix graph = ec.build_graph();
        const GameConstants gc =
            estimate_constants(*game, ec.sampling_box(*game), 2000, 0);
        const int m = game->num_agents() * game->action_dim();
        const double theta = outcome.runs.front().theta;
        const ConvergenceConstants cst = analyze_configuration(
            ec.eta, ec.gamma, ec.alpha, theta, gc.mu_r, gc.L_m,
            game->num_agents(), graph, ec.compressor.contract(m));
        if (cst.rate.stable) row.floor_estimate = cst.rate.floor;
      } catch (const std::exception&) {
        // no certificate at these parameters; leave NaN
      }
    }
    res.rows.push_back(std::move(row));
  }
  return res;
}

}  // namespace cdpnes
