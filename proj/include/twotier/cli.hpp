#pragma once

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "twotier/config.hpp"
#include "twotier/error.hpp"
#include "twotier/io.hpp"
#include "twotier/mfg.hpp"
#include "twotier/simulation.hpp"
#include "twotier/stackelberg.hpp"
#include "twotier/stochastic_game.hpp"

namespace twotier {

struct RunOptions {
  std::string subcommand;
  std::string config_path;
  std::vector<std::string> overrides;  // section.key=value
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> mode;
  std::string out_dir = "out";
};

namespace cli_detail {

inline ExperimentConfig resolve_config(const RunOptions& opt) {
  ExperimentConfig cfg;
  if (!opt.config_path.empty()) cfg = load_config(opt.config_path);
  for (const auto& o : opt.overrides) {
    auto eq = o.find('=');
    if (eq == std::string::npos) fail(ErrorKind::invalid_argument, "--set expects section.key=value, got '" + o + "'");
    set_config_value(cfg, o.substr(0, eq), o.substr(eq + 1));
  }
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.workers) cfg.workers = *opt.workers;
  if (opt.mode) cfg.scenario.solver.mode = parse_mode(*opt.mode);
  cfg.materialize();
  cfg.validate();
  return cfg;
}

struct Output {
  std::filesystem::path dir;
  Manifest manifest;

  void text(const std::string& name, const std::string& body) {
    write_text(dir / name, body);
    manifest.artifacts.push_back(name);
  }
  void json(const std::string& name, const nlohmann::json& body) {
    write_json(dir / name, body);
    manifest.artifacts.push_back(name);
  }
};

inline EvaluationInputs instance_inputs(const ExperimentConfig& cfg, Output& out) {
  const auto& spec = cfg.scenario.topology;
  Topology topo = spec.generate(spec.num_sbs, spec.seed);
  EvaluationInputs in = cfg.scenario.inputs(topo);
  in.solver = cfg.solve_options();
  nlohmann::json tj;
  tj["topology"] = topo;
  tj["gains"] = in.game.gains;
  out.json("topology.json", tj);
  return in;
}

inline void solve_stochastic(const ExperimentConfig& cfg, Output& out) {
  EvaluationInputs in = instance_inputs(cfg, out);
  PayoffTables tables = build_payoff_tables(in.game, cfg.workers);
  out.json("payoffs.json", payoff_tables_json(tables));
  EquilibriumSolution sol = solve_equilibrium(tables, in.game, in.solver);
  out.text("strategy.csv", strategy_csv(sol, tables));
  out.text("trajectory.csv", trajectory_csv(run_policy(sol, tables, in.game, cfg.simulation.horizon, cfg.seed)));
  nlohmann::json eq;
  eq["mode"] = mode_name(in.solver.mode);
  eq["gap"] = sol.gap;
  eq["bellman_residual"] = sol.bellman_residual;
  eq["ces_objective"] = sol.ces_objective;
  eq["mbs_deviation_gain"] = max_mbs_deviation_gain(sol, tables, in.game);
  eq["m"] = sol.strategies.m;
  eq["n"] = sol.strategies.n;
  eq["ces_values"] = sol.ces_values;
  eq["mbs_state_payoffs"] = sol.mbs_state_payoffs;
  out.json("equilibrium.json", eq);
  out.manifest.extra = {{"gap", sol.gap}, {"ces_objective", sol.ces_objective}};
}

inline void baseline(const ExperimentConfig& cfg, Output& out) {
  EvaluationInputs in = instance_inputs(cfg, out);
  std::vector<TrajectoryRow> rows;
  run_baseline_visit(in.game, in.baseline, cfg.simulation.horizon, cfg.seed, [&](const BaselineRow& r) {
    rows.push_back(to_trajectory_row(r, in.baseline, in.game.energy.slot_duration));
  });
  out.text("trajectory.csv", trajectory_csv(rows));
}

inline void simulate(const ExperimentConfig& cfg, Output& out) {
  EvaluationInputs in = instance_inputs(cfg, out);
  OutageReport report;
  report.scenario = "single instance";
  for (Policy p : cfg.policies())
    report.points.push_back(evaluate_outage(p, in, cfg.simulation.slots, cfg.simulation.replications, cfg.seed,
                                            cfg.workers, cfg.scenario.topology.num_sbs));
  out.text("outage.csv", outage_csv(report));
}

inline void sweep_command(const ExperimentConfig& cfg, Output& out) {
  Scenario sc = cfg.scenario;
  sc.solver = cfg.solve_options();
  OutageReport report = sweep(sc, cfg.sweep_settings());
  out.text("sweep.csv", outage_csv(report));
}

inline void solve_mfg_command(const ExperimentConfig& cfg, Output& out) {
  MfgResult r = solve_mfg(cfg.mfg);
  const MfgGrid& G = r.grid;
  auto sinr = policy_sinr(G, cfg.mfg);
  auto pop = population_sinr(G, cfg.mfg);
  auto l2 = moment_drift_diagnostic(G, cfg.mfg);
  CsvWriter w({"t_index", "time", "p_bar", "policy_sinr", "population_sinr", "second_moment"});
  for (int t = 0; t < G.rows; ++t)
    w.row({std::to_string(t), csv_number(t * cfg.mfg.dt), csv_number(G.p_bar[t]), csv_number(sinr[t]), csv_number(pop[t]),
           csv_number(l2.second_moment[t])});
  out.text("mfg_summary.csv", w.str());
  out.text("mfg_grid.csv", mfg_grid_csv(G, cfg.mfg, std::max(1, cfg.mfg.t_max / 100)));
  out.manifest.extra = {{"iterations", r.iterations}, {"converged", r.converged}, {"final_change", r.final_change},
                        {"moment_drift_rms", l2.rms}};
}

inline void compare_command(const ExperimentConfig& cfg, Output& out) {
  auto rows = compare_mfg_vs_mdp(cfg.compare.densities, cfg.mfg, cfg.compare.mdp, cfg.workers);
  out.text("compare.csv", comparison_csv(rows));
}

}  // namespace cli_detail

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"solve-stochastic", "solve-mfg", "baseline", "simulate", "sweep", "compare"};
  return names;
}

// Runs one subcommand; errors propagate as twotier::Error.
inline void run(const RunOptions& opt) {
  auto start = std::chrono::steady_clock::now();
  ExperimentConfig cfg = cli_detail::resolve_config(opt);
  cli_detail::Output out;
  out.dir = opt.out_dir;
  ensure_directory(out.dir);
  out.manifest.subcommand = opt.subcommand;
  out.manifest.seed = cfg.seed;
  out.manifest.config_text = config_to_string(cfg);
  out.text("config.ini", out.manifest.config_text);

  if (opt.subcommand == "solve-stochastic") cli_detail::solve_stochastic(cfg, out);
  else if (opt.subcommand == "solve-mfg") cli_detail::solve_mfg_command(cfg, out);
  else if (opt.subcommand == "baseline") cli_detail::baseline(cfg, out);
  else if (opt.subcommand == "simulate") cli_detail::simulate(cfg, out);
  else if (opt.subcommand == "sweep") cli_detail::sweep_command(cfg, out);
  else if (opt.subcommand == "compare") cli_detail::compare_command(cfg, out);
  else fail(ErrorKind::invalid_argument, "unknown subcommand '" + opt.subcommand + "'");

  out.manifest.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(out.dir / "manifest.json", manifest_json(out.manifest));
}

constexpr int kUsageExit = 2;

// Parses argv and runs; returns the process exit code.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Two-tier network energy dispatch: stochastic game, Stackelberg baseline and mean-field solvers"};
  app.require_subcommand(1, 1);
  RunOptions opt;
  const char* help[] = {
      "Solve the CES/MBS stochastic game and write strategies, payoffs and a trajectory",
      "Solve the mean-field HJB/Fokker-Planck system",
      "Run the per-SBS Stackelberg baseline",
      "Estimate outage for one topology",
      "Sweep M, lambda1 or C and tabulate outage",
      "Average SINR of the mean-field and MDP dispatch versus density",
  };
  std::vector<CLI::App*> subs;
  for (size_t i = 0; i < subcommands().size(); ++i) {
    CLI::App* sub = app.add_subcommand(subcommands()[i], help[i]);
    sub->add_option("--config", opt.config_path, "Config file (INI)");
    sub->add_option("--seed", opt.seed, "Master seed");
    sub->add_option("--out", opt.out_dir, "Output directory")->capture_default_str();
    sub->add_option("--workers", opt.workers, "Worker threads");
    sub->add_option("--mode", opt.mode, "Solver mode")->check(CLI::IsMember({"enumerate", "bri", "incremental"}));
    sub->add_option("--set", opt.overrides, "Override a config key, section.key=value");
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsageExit;
  }
  for (CLI::App* sub : subs)
    if (sub->parsed()) opt.subcommand = sub->get_name();
  try {
    run(opt);
  } catch (const Error& e) {
    err << "error [" << kind_name(e.kind()) << "]: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error [internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace twotier
