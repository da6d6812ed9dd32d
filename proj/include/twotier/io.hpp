#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "twotier/config.hpp"
#include "twotier/error.hpp"
#include "twotier/simulation.hpp"
#include "twotier/stochastic_game.hpp"

#ifndef TWOTIER_VERSION
#define TWOTIER_VERSION "unknown"
#endif

namespace twotier {

inline std::string csv_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

  void row(const std::vector<std::string>& cells) {
    require(cells.size() == header_.size(), "csv: row width does not match the header");
    rows_.push_back(cells);
  }

  std::string str() const {
    std::ostringstream os;
    auto line = [&](const std::vector<std::string>& cells) {
      for (size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
      os << "\n";
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return os.str();
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
  out << text;
  out.close();
  if (!out) fail(ErrorKind::io, "failed writing '" + path.string() + "'");
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    fail(ErrorKind::io, "cannot create output directory '" + dir.string() + "'");
  std::filesystem::path probe = dir / ".write-probe";
  {
    std::ofstream out(probe);
    if (!out) fail(ErrorKind::io, "output directory '" + dir.string() + "' is not writable");
  }
  std::filesystem::remove(probe, ec);
}

inline std::string outage_csv(const OutageReport& report) {
  CsvWriter w({"value", "method", "sbs_outage", "sbs_outage_ci", "mbs_outage", "mbs_outage_ci", "mean_sinr_sbs",
               "mean_sinr_mbs", "replications", "slots", "seed"});
  for (const auto& p : report.points)
    w.row({csv_number(p.value), p.method, csv_number(p.sbs_outage), csv_number(p.sbs_outage_ci), csv_number(p.mbs_outage),
           csv_number(p.mbs_outage_ci), csv_number(p.mean_sinr_sbs), csv_number(p.mean_sinr_mbs),
           std::to_string(p.replications), std::to_string(p.slots), std::to_string(p.seed)});
  return w.str();
}

inline std::string trajectory_csv(const std::vector<TrajectoryRow>& rows) {
  const size_t M = rows.empty() ? 0 : rows.front().powers.size();
  std::vector<std::string> header{"t", "state", "dispatch", "p0", "arrivals"};
  for (size_t i = 0; i < M; ++i) header.push_back("p" + std::to_string(i + 1));
  CsvWriter w(header);
  for (const auto& r : rows) {
    std::vector<std::string> cells{std::to_string(r.t), csv_number(r.state), csv_number(r.dispatch), csv_number(r.p0),
                                   csv_number(r.arrivals)};
    for (double p : r.powers) cells.push_back(csv_number(p));
    w.row(cells);
  }
  return w.str();
}

// Per-state equilibrium strategies and values.
inline std::string strategy_csv(const EquilibriumSolution& sol, const PayoffTables& tables) {
  const int levels = tables.num_power_levels();
  std::vector<std::string> header{"state", "ces_value", "mbs_state_payoff"};
  for (int p = 0; p < levels; ++p) header.push_back("m_p" + csv_number(tables.power_levels()[p]));
  for (int q = 0; q <= tables.max_dispatch(); ++q) header.push_back("n_q" + std::to_string(q));
  CsvWriter w(header);
  for (int s = 0; s < tables.num_states(); ++s) {
    std::vector<std::string> cells{std::to_string(s), csv_number(sol.ces_values[s]), csv_number(sol.mbs_state_payoffs[s])};
    for (int p = 0; p < levels; ++p) cells.push_back(csv_number(sol.strategies.m[s][p]));
    for (int q = 0; q <= tables.max_dispatch(); ++q)
      cells.push_back(csv_number(q < static_cast<int>(sol.strategies.n[s].size()) ? sol.strategies.n[s][q] : 0.0));
    w.row(cells);
  }
  return w.str();
}

inline std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  CsvWriter w({"num_sbs", "mdp_sinr", "mfg_sinr", "mfg_population_sinr", "mfg_converged"});
  for (const auto& r : rows)
    w.row({std::to_string(r.num_sbs), csv_number(r.mdp_sinr), csv_number(r.mfg_sinr), csv_number(r.mfg_population_sinr),
           r.mfg_converged ? "1" : "0"});
  return w.str();
}

// Grid dump in long format: one line per (t, R) node.
inline std::string mfg_grid_csv(const MfgGrid& G, const MfgConfig& cfg, int time_stride) {
  CsvWriter w({"t_index", "r_index", "log_energy", "m", "p", "U"});
  for (int t = 0; t < G.rows; t += std::max(time_stride, 1))
    for (int k = 0; k < G.cols; ++k)
      w.row({std::to_string(t), std::to_string(k - cfg.r_max), csv_number(cfg.log_energy(k)), csv_number(G.at(G.m, t, k)),
             csv_number(G.at(G.p, t, k)), csv_number(G.at(G.U, t, k))});
  return w.str();
}

struct Manifest {
  std::string subcommand;
  std::string config_text;
  std::uint64_t seed = 0;
  double wall_time_seconds = 0.0;
  std::vector<std::string> artifacts;
  nlohmann::json extra = nlohmann::json::object();
};

inline nlohmann::json manifest_json(const Manifest& m) {
  nlohmann::json j;
  j["tool"] = "twotier";
  j["version"] = TWOTIER_VERSION;
  j["subcommand"] = m.subcommand;
  j["seed"] = m.seed;
  j["config"] = m.config_text;
  j["artifacts"] = m.artifacts;
  j["summary"] = m.extra;
  j["wall_time_seconds"] = m.wall_time_seconds;
  return j;
}

}  // namespace twotier
