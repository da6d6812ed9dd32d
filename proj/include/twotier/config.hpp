#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "twotier/error.hpp"
#include "twotier/mfg.hpp"
#include "twotier/simulation.hpp"

namespace twotier {

struct SimulationSettings {
  int slots = 10000;
  int replications = 20;
  int horizon = 200;  // trajectory length for solve-stochastic and baseline
  std::string sweep_parameter = "M";
  std::vector<double> sweep_values{5, 20, 60, 120};
  std::vector<std::string> methods{"stochastic", "stackelberg"};
  std::string topology = "pinned";  // or "resample"
};

struct CompareSettings {
  std::vector<int> densities{100, 200, 300, 400, 500, 600, 700, 800};
  MdpComparisonConfig mdp;
};

// One flat key = value file with a section per module.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  int workers = 1;
  Scenario scenario;
  std::string arrival = "poisson 1";
  SimulationSettings simulation;
  MfgConfig mfg;
  CompareSettings compare;

  ExperimentConfig() { materialize(); }

  // Rebuilds derived fields (arrival pmf, CES packet volume) from the primitive keys.
  void materialize();
  void validate() const;

  SolveOptions solve_options() const {
    SolveOptions o = scenario.solver;
    o.seed = seed;
    o.workers = workers;
    return o;
  }
  std::vector<Policy> policies() const;
  SweepSettings sweep_settings() const;
};

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(cur);
    cur.clear();
  };
  for (char ch : s) {
    if (ch == ',' || ch == ' ' || ch == '\t') flush();
    else cur.push_back(ch);
  }
  flush();
  return out;
}

inline ArrivalDistribution parse_arrival(const std::string& spec, int capacity) {
  auto tok = split_list(spec);
  require(!tok.empty(), "energy.arrival: empty value");
  std::vector<double> args;
  for (size_t i = 1; i < tok.size(); ++i) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok[i].data(), tok[i].data() + tok[i].size(), v);
    require(ec == std::errc() && ptr == tok[i].data() + tok[i].size(), "energy.arrival: bad number '" + tok[i] + "'");
    args.push_back(v);
  }
  const std::string& kind = tok[0];
  if (kind == "poisson") {
    require(args.size() == 1, "energy.arrival: 'poisson RATE'");
    return ArrivalDistribution::poisson(args[0], capacity);
  }
  if (kind == "deterministic") {
    require(args.size() == 1 && args[0] == std::floor(args[0]), "energy.arrival: 'deterministic PACKETS'");
    return ArrivalDistribution::deterministic(static_cast<int>(args[0]), capacity);
  }
  if (kind == "gaussian") {
    require(args.size() == 2, "energy.arrival: 'gaussian MEAN STDDEV'");
    return ArrivalDistribution::discretized_gaussian(args[0], args[1], capacity);
  }
  if (kind == "pmf") {
    require(static_cast<int>(args.size()) == capacity + 1, "energy.arrival: 'pmf' needs capacity+1 probabilities");
    return ArrivalDistribution::explicit_pmf(args);
  }
  fail(ErrorKind::invalid_argument, "energy.arrival: unknown kind '" + kind + "' (poisson, deterministic, gaussian, pmf)");
}

inline void ExperimentConfig::materialize() {
  scenario.game.energy.arrival = parse_arrival(arrival, scenario.game.energy.capacity);
  scenario.game.energy.packet_volume = scenario.packet_ratio * scenario.sbs_packet_volume;
  scenario.baseline.packet_volume = scenario.sbs_packet_volume;
}

inline std::vector<Policy> ExperimentConfig::policies() const {
  std::vector<Policy> out;
  for (const auto& m : simulation.methods) {
    if (m == "stochastic") out.push_back(Policy::stochastic);
    else if (m == "stackelberg") out.push_back(Policy::stackelberg);
    else fail(ErrorKind::invalid_argument, "simulation.methods: unknown method '" + m + "'");
  }
  return out;
}

inline SweepSettings ExperimentConfig::sweep_settings() const {
  SweepSettings s;
  s.parameter = parse_sweep_parameter(simulation.sweep_parameter);
  s.values = simulation.sweep_values;
  s.methods = policies();
  s.resample_topology = simulation.topology == "resample";
  s.slots = simulation.slots;
  s.replications = simulation.replications;
  s.seed = seed;
  s.workers = workers;
  return s;
}

inline void ExperimentConfig::validate() const {
  require(workers >= 1, "run.workers must be >= 1");
  const auto& t = scenario.topology;
  require(t.num_sbs >= 1, "topology.num_sbs must be >= 1");
  require(t.macro_radius >= 1.0, "topology.macro_radius must be >= 1");
  require(t.coverage_radius >= 1.0, "topology.coverage_radius must be >= 1");
  require(t.placement.min_mbs_distance >= 0.0 && t.placement.min_mbs_distance < t.macro_radius,
          "topology.min_mbs_distance must lie in [0, macro_radius)");
  require(t.placement.pathloss_exponent > 2.0, "topology.pathloss_exponent must be > 2");
  require(t.placement.rayleigh_mean_sq > 0.0, "topology.rayleigh_mean_sq must be > 0");
  require(scenario.sbs_packet_volume > 0.0, "energy.sbs_packet_volume must be > 0");
  require(scenario.packet_ratio > 0.0, "energy.packet_ratio must be > 0");
  scenario.game.validate_parameters();
  require(scenario.game.energy.arrival.capacity() == scenario.game.energy.capacity,
          "energy.arrival must match energy.capacity");
  scenario.baseline.validate();
  require(scenario.thresholds.sbs >= 0.0 && scenario.thresholds.mbs >= 0.0,
          "simulation outage thresholds must be >= 0");
  require(scenario.solver.max_iterations >= 1, "solver.max_iterations must be >= 1");
  require(scenario.solver.restarts >= 1, "solver.restarts must be >= 1");
  require(scenario.solver.improvement_epsilon > 0.0, "solver.improvement_epsilon must be > 0");
  require(scenario.solver.enumerate_budget >= 1, "solver.enumerate_budget must be >= 1");
  require(simulation.slots >= 1 && simulation.replications >= 1, "simulation.slots and simulation.replications must be >= 1");
  require(simulation.horizon >= 1, "simulation.horizon must be >= 1");
  require(simulation.topology == "pinned" || simulation.topology == "resample",
          "simulation.topology must be 'pinned' or 'resample'");
  parse_sweep_parameter(simulation.sweep_parameter);
  policies();
  mfg.validate();
  require(!compare.densities.empty(), "compare.densities must be nonempty");
  for (int m : compare.densities) require(m >= 1, "compare.densities must be >= 1");
  const auto& d = compare.mdp;
  require(d.capacity >= 1, "compare.capacity must be >= 1");
  require(d.packet_ratio > 0.0 && d.sbs_packet_volume > 0.0, "compare.packet_ratio and compare.sbs_packet_volume must be > 0");
  require(d.arrival_stddev > 0.0, "compare.arrival_stddev must be > 0");
  require(d.sbs_battery_cap > 0.0, "compare.sbs_battery_cap must be > 0");
  require(d.discount > 0.0 && d.discount < 1.0, "compare.discount must lie in (0,1)");
  require(d.averaging_steps >= 1, "compare.averaging_steps must be >= 1");
}

namespace config_detail {

inline std::string format(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}
inline std::string format(int v) { return std::to_string(v); }
inline std::string format(std::uint64_t v) { return std::to_string(v); }
inline std::string format(const std::string& v) { return v; }
template <class T>
std::string format(const std::vector<T>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format(v[i]);
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* b = text.data();
  const char* e = b + text.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e)
    fail(ErrorKind::invalid_argument, "config key " + key + ": expected a number, got '" + text + "'");
  return v;
}

inline void parse(const std::string& key, const std::string& text, double& out) { out = parse_number<double>(key, text); }
inline void parse(const std::string& key, const std::string& text, int& out) { out = parse_number<int>(key, text); }
inline void parse(const std::string& key, const std::string& text, std::uint64_t& out) {
  out = parse_number<std::uint64_t>(key, text);
}
inline void parse(const std::string&, const std::string& text, std::string& out) { out = text; }
template <class T>
void parse(const std::string& key, const std::string& text, std::vector<T>& out) {
  out.clear();
  for (const auto& tok : split_list(text)) {
    T v{};
    parse(key, tok, v);
    out.push_back(v);
  }
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <class Ref>
Field bind(std::string section, std::string key, Ref ref) {
  std::string full = section + "." + key;
  return Field{section, key,
               [ref](const ExperimentConfig& c) { return format(ref(const_cast<ExperimentConfig&>(c))); },
               [ref, full](ExperimentConfig& c, const std::string& text) { parse(full, text, ref(c)); }};
}

inline Field solver_mode_field() {
  return Field{"solver", "mode", [](const ExperimentConfig& c) { return std::string(mode_name(c.scenario.solver.mode)); },
               [](ExperimentConfig& c, const std::string& text) { c.scenario.solver.mode = parse_mode(text); }};
}

#define TT_FIELD(sec, key, expr) bind(sec, key, [](ExperimentConfig& c) -> auto& { return expr; })

inline const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      TT_FIELD("run", "seed", c.seed),
      TT_FIELD("run", "workers", c.workers),
      TT_FIELD("topology", "num_sbs", c.scenario.topology.num_sbs),
      TT_FIELD("topology", "macro_radius", c.scenario.topology.macro_radius),
      TT_FIELD("topology", "coverage_radius", c.scenario.topology.coverage_radius),
      TT_FIELD("topology", "min_separation", c.scenario.topology.placement.min_separation),
      TT_FIELD("topology", "min_mbs_distance", c.scenario.topology.placement.min_mbs_distance),
      TT_FIELD("topology", "pathloss_exponent", c.scenario.topology.placement.pathloss_exponent),
      TT_FIELD("topology", "rayleigh_mean_sq", c.scenario.topology.placement.rayleigh_mean_sq),
      TT_FIELD("topology", "seed", c.scenario.topology.seed),
      TT_FIELD("game", "mbs_power_levels", c.scenario.game.mbs_power_levels),
      TT_FIELD("game", "target_sinr_mbs", c.scenario.game.target_sinr_mbs),
      TT_FIELD("game", "target_sinr_sbs", c.scenario.game.target_sinr_sbs),
      TT_FIELD("game", "noise", c.scenario.game.noise),
      TT_FIELD("game", "sbs_max_power", c.scenario.game.sbs_max_power),
      TT_FIELD("game", "discount", c.scenario.game.discount),
      TT_FIELD("game", "initial_state_dist", c.scenario.game.initial_state_dist),
      TT_FIELD("energy", "capacity", c.scenario.game.energy.capacity),
      TT_FIELD("energy", "sbs_packet_volume", c.scenario.sbs_packet_volume),
      TT_FIELD("energy", "packet_ratio", c.scenario.packet_ratio),
      TT_FIELD("energy", "slot_duration", c.scenario.game.energy.slot_duration),
      TT_FIELD("energy", "arrival", c.arrival),
      TT_FIELD("energy", "transfer_loss_fraction", c.scenario.game.energy.transfer_loss_fraction),
      TT_FIELD("baseline", "arrival_rate", c.scenario.baseline.arrival_rate),
      TT_FIELD("baseline", "battery_capacity", c.scenario.baseline.battery_capacity),
      TT_FIELD("baseline", "initial_fraction", c.scenario.baseline.initial_fraction),
      solver_mode_field(),
      TT_FIELD("solver", "enumerate_budget", c.scenario.solver.enumerate_budget),
      TT_FIELD("solver", "max_iterations", c.scenario.solver.max_iterations),
      TT_FIELD("solver", "improvement_epsilon", c.scenario.solver.improvement_epsilon),
      TT_FIELD("solver", "restarts", c.scenario.solver.restarts),
      TT_FIELD("simulation", "slots", c.simulation.slots),
      TT_FIELD("simulation", "replications", c.simulation.replications),
      TT_FIELD("simulation", "horizon", c.simulation.horizon),
      TT_FIELD("simulation", "sbs_outage_threshold", c.scenario.thresholds.sbs),
      TT_FIELD("simulation", "mbs_outage_threshold", c.scenario.thresholds.mbs),
      TT_FIELD("simulation", "sweep_parameter", c.simulation.sweep_parameter),
      TT_FIELD("simulation", "sweep_values", c.simulation.sweep_values),
      TT_FIELD("simulation", "methods", c.simulation.methods),
      TT_FIELD("simulation", "topology", c.simulation.topology),
      TT_FIELD("mfg", "num_sbs", c.mfg.num_sbs),
      TT_FIELD("mfg", "own_gain", c.mfg.own_gain),
      TT_FIELD("mfg", "cross_gain", c.mfg.cross_gain),
      TT_FIELD("mfg", "target_sinr", c.mfg.target_sinr),
      TT_FIELD("mfg", "noise", c.mfg.noise),
      TT_FIELD("mfg", "energy_unit", c.mfg.energy_unit),
      TT_FIELD("mfg", "sigma", c.mfg.sigma),
      TT_FIELD("mfg", "r_max", c.mfg.r_max),
      TT_FIELD("mfg", "t_max", c.mfg.t_max),
      TT_FIELD("mfg", "dr", c.mfg.dr),
      TT_FIELD("mfg", "dt", c.mfg.dt),
      TT_FIELD("mfg", "slot_duration", c.mfg.slot_duration),
      TT_FIELD("mfg", "relaxation", c.mfg.relaxation),
      TT_FIELD("mfg", "max_iterations", c.mfg.max_iterations),
      TT_FIELD("mfg", "tolerance", c.mfg.tolerance),
      TT_FIELD("mfg", "initial_log_energy_mean", c.mfg.initial_log_energy_mean),
      TT_FIELD("mfg", "initial_log_energy_spread", c.mfg.initial_log_energy_spread),
      TT_FIELD("mfg", "initial_density", c.mfg.initial_density),
      TT_FIELD("compare", "densities", c.compare.densities),
      TT_FIELD("compare", "capacity", c.compare.mdp.capacity),
      TT_FIELD("compare", "packet_ratio", c.compare.mdp.packet_ratio),
      TT_FIELD("compare", "sbs_packet_volume", c.compare.mdp.sbs_packet_volume),
      TT_FIELD("compare", "arrival_mean", c.compare.mdp.arrival_mean),
      TT_FIELD("compare", "arrival_stddev", c.compare.mdp.arrival_stddev),
      TT_FIELD("compare", "sbs_battery_cap", c.compare.mdp.sbs_battery_cap),
      TT_FIELD("compare", "discount", c.compare.mdp.discount),
      TT_FIELD("compare", "averaging_steps", c.compare.mdp.averaging_steps),
  };
  return all;
}

#undef TT_FIELD

}  // namespace config_detail

// Applies `section.key = value` overrides; unknown keys are rejected.
inline void set_config_value(ExperimentConfig& cfg, const std::string& dotted, const std::string& value) {
  for (const auto& f : config_detail::fields()) {
    if (f.section + "." + f.key == dotted) {
      f.set(cfg, value);
      return;
    }
  }
  fail(ErrorKind::invalid_argument, "unknown config key '" + dotted + "'");
}

inline ExperimentConfig parse_config(std::istream& in, const std::string& origin = "<config>") {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    fail(ErrorKind::invalid_argument, origin + ": parse error at line " + std::to_string(e.line()) + ": " + e.message());
  }
  ExperimentConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      fail(ErrorKind::invalid_argument, origin + ": key '" + section + "' must appear inside a [section]");
    for (const auto& [key, value] : body) set_config_value(cfg, section + "." + key, value.data());
  }
  cfg.materialize();
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open config file '" + path + "'");
  return parse_config(in, path);
}

inline std::string config_to_string(const ExperimentConfig& cfg) {
  std::ostringstream os;
  std::string section;
  for (const auto& f : config_detail::fields()) {
    if (f.section != section) {
      if (!section.empty()) os << "\n";
      section = f.section;
      os << "[" << section << "]\n";
    }
    os << f.key << " = " << f.get(cfg) << "\n";
  }
  return os.str();
}

inline void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write config file '" + path + "'");
  out << config_to_string(cfg);
  if (!out) fail(ErrorKind::io, "failed writing config file '" + path + "'");
}

}  // namespace twotier
