#pragma once

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "cdpnes/analysis.hpp"
#include "cdpnes/experiments.hpp"
#include "cdpnes/sensitivity.hpp"

namespace cdpnes {

namespace cli_detail {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitAssumption = 3;

inline void print_analysis_text(std::ostream& os, double label, double theta,
                                const ExperimentConfig& ec,
                                const GameConstants& gc,
                                const ParamRecommendation& rec) {
  os << "cell " << label << " (theta_bar " << theta << ")\n";
  os << "  game constants: mu_r=" << gc.mu_r << " L_m=" << gc.L_m
     << " M=" << gc.M << (gc.exact ? " (exact)" : " (estimated)")
     << (gc.m_certified ? "" : " [M over sampling box, not certified]") << "\n";
  os << "  L_F=" << rec.L_F << " beta=" << rec.monotone.beta
     << " b1=" << rec.monotone.b1 << " b2=" << rec.monotone.b2
     << " mu_F=" << rec.monotone.mu_F
     << (rec.monotone.feasible ? "" : "  [mu_F <= 0: eta infeasible]") << "\n";
  if (rec.monotone.feasible) {
    os << "  " << rec.describe() << "\n";
  }
  os << "  run params: gamma=" << ec.gamma << " eta=" << ec.eta
     << " alpha=" << ec.alpha << " K=" << ec.horizon << "\n";
}

struct AnalysisCsvRow {
  double label, theta;
  ConvergenceConstants cst;
  bool have_cert = false;
  ParamRecommendation rec;
  GameConstants gc;
};

inline std::string analysis_csv(const std::vector<AnalysisCsvRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "label,theta_bar,mu_r,L_m,M,L_F,beta,b1,b2,mu_F,gamma_star,eta_max,"
        "eta_feasible,m1,m2,c1,c2,c3,c4,c5,c6,c_x,A11,A12,A21,A22,rho,"
        "rho_bound,c7_printed,c7_mechanical,floor\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : rows) {
    os << r.label << "," << r.theta << "," << r.gc.mu_r << "," << r.gc.L_m
       << "," << r.gc.M << "," << r.rec.L_F << "," << r.rec.monotone.beta << ","
       << r.rec.monotone.b1 << "," << r.rec.monotone.b2 << ","
       << r.rec.monotone.mu_F << "," << r.rec.gamma_star << ","
       << r.rec.eta_max << "," << (r.rec.eta_feasible ? 1 : 0) << ","
       << r.rec.m1 << "," << r.rec.m2;
    if (r.have_cert) {
      const ContractionConstants& c = r.cst.contraction;
      const RateAndFloor& f = r.cst.rate;
      os << "," << c.c1 << "," << c.c2 << "," << c.c3 << "," << c.c4 << ","
         << c.c5 << "," << c.c6 << "," << c.c_x << "," << c.A(0, 0) << ","
         << c.A(0, 1) << "," << c.A(1, 0) << "," << c.A(1, 1) << "," << f.rho
         << "," << f.rho_bound << "," << f.c7_printed << ","
         << f.c7_mechanical << "," << f.floor;
    } else {
      for (int i = 0; i < 15; ++i) os << "," << nan;
    }
    os << "\n";
  }
  return os.str();
}

inline int cmd_analyze(const std::string& config_path) {
  ExperimentConfig ec = ExperimentConfig::load_file(config_path);
  const std::unique_ptr<Game> game = ec.build_game();
  const MixingMatrix graph = ec.build_graph();
  const GraphValidationReport grep = validate(graph);
  if (!grep.ok()) {
    std::cerr << "assumption violation: " << grep.describe() << "\n";
    return kExitAssumption;
  }
  const GameConstants gc =
      estimate_constants(*game, ec.sampling_box(*game), 2000, 0);
  if (!gc.warning.empty()) {
    std::cerr << "assumption violation: " << gc.warning << "\n";
    return kExitAssumption;
  }
  const int n = game->num_agents();
  const int m = n * game->action_dim();
  const CompressorContract con = ec.compressor.contract(m);

  std::vector<AnalysisCsvRow> rows;
  for (double v : ec.privacy.values) {
    AnalysisCsvRow row;
    row.label = v;
    row.theta = v;
    if (ec.privacy.epsilon_mode) {
      PrivacyBudget budget;
      budget.epsilon = Eigen::VectorXd::Constant(n, v);
      budget.horizon = ec.horizon;
      budget.M = gc.M;
      budget.gamma = ec.gamma;
      budget.eta = ec.eta;
      row.theta = kNoiseSafetyFactor * min_noise_scale(budget)(0);
    }
    row.gc = gc;
    row.rec = recommend_params(ec.eta, gc.mu_r, gc.L_m, n, graph, ec.alpha, con);
    if (row.rec.monotone.feasible) {
      row.cst = analyze_configuration(ec.eta, ec.gamma, ec.alpha, row.theta,
                                      gc.mu_r, gc.L_m, n, graph, con);
      row.have_cert = true;
    }
    print_analysis_text(std::cout, row.label, row.theta, ec, gc, row.rec);
    if (row.have_cert) {
      std::cout << "  rho=" << row.cst.rate.rho
                << " (bound " << row.cst.rate.rho_bound << ")"
                << " stable=" << (row.cst.rate.stable ? "yes" : "no");
      if (row.cst.rate.stable)
        std::cout << " floor=" << row.cst.rate.floor;
      std::cout << "\n";
    }
    rows.push_back(std::move(row));
  }
  std::filesystem::create_directories(ec.outputs.dir);
  const std::filesystem::path out =
      std::filesystem::path(ec.outputs.dir) / "analysis.csv";
  std::ofstream f(out);
  f << analysis_csv(rows);
  std::cout << "wrote " << out.string() << "\n";
  return kExitOk;
}

inline int cmd_run(const std::string& config_path) {
  const ExperimentConfig ec = ExperimentConfig::load_file(config_path);
  const ExperimentOutcome outcome = run_experiment(ec);
  std::cout << "wrote " << outcome.summary_path.string() << " and "
            << outcome.runs.size() << " trace file(s)\n";
  return outcome.any_divergence ? kExitRuntime : kExitOk;
}

inline int cmd_sweep(const std::string& config_path,
                     const std::vector<double>& epsilons) {
  ExperimentConfig ec = ExperimentConfig::load_file(config_path);
  if (!epsilons.empty()) {
    ec.privacy.epsilon_mode = true;
    ec.privacy.values = epsilons;
  }
  const ExperimentOutcome outcome = run_experiment(ec);
  std::cout << "wrote " << outcome.summary_path.string() << " and "
            << outcome.runs.size() << " trace file(s)\n";
  return outcome.any_divergence ? kExitRuntime : kExitOk;
}

inline int cmd_validate_compressor(const std::string& kind, int dim, int trials,
                                   int b, int k, std::uint64_t seed) {
  std::string spec = kind;
  if (kind == "quantize") spec += ":b=" + std::to_string(b);
  if (kind == "top_k") spec += ":k=" + std::to_string(k);
  const Compressor comp = Compressor::parse(spec);
  const ContractEstimate est = estimate_contract(comp, dim, trials, seed);
  std::cout << comp.name() << " dim=" << dim << ": " << est.describe() << "\n";
  return est.pass ? kExitOk : kExitAssumption;
}

inline int cmd_privacy_budget(const std::string& config_path) {
  ExperimentConfig ec = ExperimentConfig::load_file(config_path);
  if (!ec.privacy.epsilon_mode)
    throw ConfigError("privacy-budget requires an epsilon list in [privacy]");
  const std::unique_ptr<Game> game = ec.build_game();
  const GameConstants gc =
      estimate_constants(*game, ec.sampling_box(*game), 2000, 0);
  const int n = game->num_agents();
  std::cout << "agent,epsilon,theta_min,theta_chosen\n";
  std::ostringstream csv;
  csv << "agent,epsilon,theta_min,theta_chosen\n";
  for (double eps : ec.privacy.values) {
    PrivacyBudget budget;
    budget.epsilon = Eigen::VectorXd::Constant(n, eps);
    budget.horizon = ec.horizon;
    budget.M = gc.M;
    budget.gamma = ec.gamma;
    budget.eta = ec.eta;
    for (const BudgetReportRow& row : budget_report(budget)) {
      std::cout << row.agent << "," << row.epsilon << "," << row.theta_min
                << "," << row.theta_chosen << "\n";
      csv << row.agent << "," << row.epsilon << "," << row.theta_min << ","
          << row.theta_chosen << "\n";
    }
  }
  std::filesystem::create_directories(ec.outputs.dir);
  const std::filesystem::path out =
      std::filesystem::path(ec.outputs.dir) / "privacy_budget.csv";
  std::ofstream f(out);
  f << csv.str();
  return kExitOk;
}

inline int cmd_bits_to_target(const std::string& config_path, double target) {
  const ExperimentConfig ec = ExperimentConfig::load_file(config_path);
  const BitsToTargetResult res = bits_to_target(ec, target);
  std::cout << "target residual " << target << "\n" << res.table();
  std::filesystem::create_directories(ec.outputs.dir);
  const std::filesystem::path out =
      std::filesystem::path(ec.outputs.dir) / "bits_to_target.csv";
  std::ofstream f(out);
  f << res.table();
  return kExitOk;
}

}  // namespace cli_detail

// Entry point shared by the binary and the tests. argv excludes the program
// name.
inline int run_cli(const std::vector<std::string>& argv) {
  CLI::App app{"CDP-NES: compressed differentially-private NE seeking"};
  app.require_subcommand(1);

  std::string config_path;
  auto* c_run = app.add_subcommand("run", "run the configured experiment");
  c_run->add_option("config", config_path, "experiment config file")->required();

  auto* c_analyze =
      app.add_subcommand("analyze", "compute convergence/privacy constants");
  c_analyze->add_option("config", config_path)->required();

  std::vector<double> sweep_eps;
  auto* c_sweep = app.add_subcommand("sweep", "run an epsilon sweep");
  c_sweep->add_option("config", config_path)->required();
  c_sweep->add_option("--epsilon", sweep_eps, "epsilon values")
      ->delimiter(',');

  std::string comp_kind;
  int dim = 10, trials = 20000, qb = 2, tk = 1;
  std::uint64_t vseed = 0;
  auto* c_val = app.add_subcommand("validate-compressor",
                                   "Monte-Carlo check of a declared contract");
  c_val->add_option("kind", comp_kind, "identity|quantize|top_k|norm_sign")
      ->required();
  c_val->add_option("--dim", dim);
  c_val->add_option("--trials", trials);
  c_val->add_option("--b", qb, "quantizer level bits");
  c_val->add_option("--k", tk, "top-k keep count");
  c_val->add_option("--seed", vseed);

  auto* c_budget = app.add_subcommand("privacy-budget",
                                      "per-agent minimal noise scales");
  c_budget->add_option("config", config_path)->required();

  double target = 0.02;
  auto* c_bits = app.add_subcommand("bits-to-target",
                                    "bits needed to reach a residual target");
  c_bits->add_option("config", config_path)->required();
  c_bits->add_option("--target", target, "residual target")->required();

  std::vector<const char*> cargv;
  cargv.push_back("cdpnes");
  for (const std::string& a : argv) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? cli_detail::kExitOk : cli_detail::kExitConfig;
  }

  try {
    if (c_run->parsed()) return cli_detail::cmd_run(config_path);
    if (c_analyze->parsed()) return cli_detail::cmd_analyze(config_path);
    if (c_sweep->parsed()) return cli_detail::cmd_sweep(config_path, sweep_eps);
    if (c_val->parsed())
      return cli_detail::cmd_validate_compressor(comp_kind, dim, trials, qb, tk,
                                                 vseed);
    if (c_budget->parsed()) return cli_detail::cmd_privacy_budget(config_path);
    if (c_bits->parsed())
      return cli_detail::cmd_bits_to_target(config_path, target);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cli_detail::kExitConfig;
  } catch (const AssumptionViolation& e) {
    std::cerr << "assumption violation: " << e.what() << "\n";
    return cli_detail::kExitAssumption;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cli_detail::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return cli_detail::kExitRuntime;
  }
  return cli_detail::kExitConfig;
}

}  // namespace cdpnes
