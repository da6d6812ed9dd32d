#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "twotier/error.hpp"
#include "twotier/geometry.hpp"
#include "twotier/mfg.hpp"
#include "twotier/parallel.hpp"
#include "twotier/payoff.hpp"
#include "twotier/random.hpp"
#include "twotier/stackelberg.hpp"
#include "twotier/stochastic_game.hpp"

namespace twotier {

struct OutagePoint {
  double value = 0.0;
  std::string method;
  double sbs_outage = 0.0;
  double sbs_outage_ci = 0.0;
  double mbs_outage = 0.0;
  double mbs_outage_ci = 0.0;
  double mean_sinr_sbs = 0.0;
  double mean_sinr_mbs = 0.0;
  int replications = 0;
  int slots = 0;
  std::uint64_t seed = 0;
};

struct OutageReport {
  std::string scenario;
  std::vector<OutagePoint> points;
};

struct OutageThresholds {
  double sbs = 0.02;
  double mbs = 5.0;
};

enum class Policy { stochastic, stackelberg };

inline const char* policy_name(Policy p) { return p == Policy::stochastic ? "stochastic" : "stackelberg"; }

// Per-replication tallies.
struct SinrTally {
  long sbs_samples = 0, sbs_outages = 0, mbs_samples = 0, mbs_outages = 0;
  double sbs_sinr_sum = 0.0, mbs_sinr_sum = 0.0;
  long sbs_finite = 0, mbs_finite = 0;
};

// Draws user positions and Rayleigh fades for one slot and scores the SINRs.
class ChannelSampler {
 public:
  ChannelSampler(const Topology& topo, double noise, OutageThresholds th) : topo_(topo), noise_(noise), th_(th) {
    const int n = topo.num_sbs() + 1;
    gain_.assign(static_cast<size_t>(n) * n, 0.0);
  }

  void sample_slot(double p0, const std::vector<double>& powers, Rng& rng, SinrTally& tally) {
    const int n = topo_.num_sbs() + 1;
    const double mean = topo_.rayleigh_mean_sq, alpha = topo_.pathloss_exponent;
    for (int i = 0; i < n; ++i) {
      Point c = topo_.position(i);
      double rad = topo_.user_radius(i) * std::sqrt(uniform01(rng));
      double ang = 2.0 * std::numbers::pi * uniform01(rng);
      Point u{c.x + rad * std::cos(ang), c.y + rad * std::sin(ang)};
      for (int j = 0; j < n; ++j) {
        double d = std::max(distance(u, topo_.position(j)), 1.0);
        double pl = alpha == 4.0 ? 1.0 / (d * d * d * d) : std::pow(d, -alpha);
        gain_[static_cast<size_t>(i) * n + j] = sample_exponential(mean, rng) * pl;
      }
    }
    auto tx = [&](int j) { return j == 0 ? p0 : powers[j - 1]; };
    for (int i = 0; i < n; ++i) {
      double interference = i == 0 ? noise_ : 0.0;
      for (int j = 0; j < n; ++j)
        if (j != i) interference += tx(j) * gain_[static_cast<size_t>(i) * n + j];
      double signal = tx(i) * gain_[static_cast<size_t>(i) * n + i];
      double sinr = interference > 0.0 ? signal / interference
                                       : (signal > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
      if (i == 0) {
        ++tally.mbs_samples;
        if (sinr < th_.mbs) ++tally.mbs_outages;
        if (std::isfinite(sinr)) {
          tally.mbs_sinr_sum += sinr;
          ++tally.mbs_finite;
        }
      } else {
        ++tally.sbs_samples;
        if (sinr < th_.sbs) ++tally.sbs_outages;
        if (std::isfinite(sinr)) {
          tally.sbs_sinr_sum += sinr;
          ++tally.sbs_finite;
        }
      }
    }
  }

 private:
  const Topology& topo_;
  double noise_;
  OutageThresholds th_;
  std::vector<double> gain_;
};

inline double ci_half_width(const std::vector<double>& xs) {
  const size_t n = xs.size();
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= (n - 1);
  boost::math::students_t dist(static_cast<double>(n - 1));
  return boost::math::quantile(boost::math::complement(dist, 0.025)) * std::sqrt(var / n);
}

inline OutagePoint summarize(const std::vector<SinrTally>& reps, Policy policy, double value, int slots,
                             std::uint64_t seed) {
  OutagePoint pt;
  pt.value = value;
  pt.method = policy_name(policy);
  pt.replications = static_cast<int>(reps.size());
  pt.slots = slots;
  pt.seed = seed;
  std::vector<double> sbs, mbs;
  double ssum = 0.0, msum = 0.0;
  long sfin = 0, mfin = 0;
  for (const auto& t : reps) {
    sbs.push_back(t.sbs_samples ? static_cast<double>(t.sbs_outages) / t.sbs_samples : 0.0);
    mbs.push_back(t.mbs_samples ? static_cast<double>(t.mbs_outages) / t.mbs_samples : 0.0);
    ssum += t.sbs_sinr_sum;
    msum += t.mbs_sinr_sum;
    sfin += t.sbs_finite;
    mfin += t.mbs_finite;
  }
  for (double v : sbs) pt.sbs_outage += v / sbs.size();
  for (double v : mbs) pt.mbs_outage += v / mbs.size();
  pt.sbs_outage_ci = ci_half_width(sbs);
  pt.mbs_outage_ci = ci_half_width(mbs);
  pt.mean_sinr_sbs = sfin ? ssum / sfin : 0.0;
  pt.mean_sinr_mbs = mfin ? msum / mfin : 0.0;
  return pt;
}

// One replication of the stochastic-game policy.
inline SinrTally replicate_stochastic(const Topology& topo, const GameConfig& cfg, const PayoffTables& tables,
                                      const EquilibriumSolution& sol, int slots, std::uint64_t seed,
                                      OutageThresholds th) {
  Rng policy_rng(derive_seed(seed, 0)), channel_rng(derive_seed(seed, 1));
  ChannelSampler sampler(topo, cfg.noise, th);
  SinrTally tally;
  int s = sample_discrete(cfg.initial_distribution(), policy_rng);
  for (int t = 0; t < slots; ++t) {
    int q = sample_discrete(sol.strategies.n[s], policy_rng);
    int p = sample_discrete(sol.strategies.m[s], policy_rng);
    int arrival = sample_discrete(cfg.energy.arrival.pmf, policy_rng);
    sampler.sample_slot(tables.power_levels()[p], tables.cell(p, q).allocation.powers, channel_rng, tally);
    s = step_battery(s, q, arrival, cfg.energy.capacity);
  }
  return tally;
}

inline SinrTally replicate_stackelberg(const Topology& topo, const GameConfig& cfg, const BaselineConfig& base,
                                       int slots, std::uint64_t seed, OutageThresholds th) {
  Rng channel_rng(derive_seed(seed, 1));
  ChannelSampler sampler(topo, cfg.noise, th);
  SinrTally tally;
  run_baseline_visit(cfg, base, slots, derive_seed(seed, 0),
                     [&](const BaselineRow& row) { sampler.sample_slot(row.p0, row.powers, channel_rng, tally); });
  return tally;
}

struct EvaluationInputs {
  Topology topology;
  GameConfig game;  // gains must match the topology
  BaselineConfig baseline;
  OutageThresholds thresholds;
  SolveOptions solver;
};

inline SinrTally replicate(Policy policy, const EvaluationInputs& in, const PayoffTables* tables,
                           const EquilibriumSolution* solution, int slots, std::uint64_t seed) {
  if (policy == Policy::stochastic)
    return replicate_stochastic(in.topology, in.game, *tables, *solution, slots, seed, in.thresholds);
  return replicate_stackelberg(in.topology, in.game, in.baseline, slots, seed, in.thresholds);
}

// Solved stochastic-game policy for one instance.
struct SolvedPolicy {
  PayoffTables tables;
  EquilibriumSolution solution;
};

inline SolvedPolicy solve_policy(const EvaluationInputs& in, int workers) {
  SolvedPolicy out;
  out.tables = build_payoff_tables(in.game, workers);
  out.solution = solve_equilibrium(out.tables, in.game, in.solver);
  return out;
}

inline OutagePoint evaluate_outage(Policy policy, const EvaluationInputs& in, int slots, int replications,
                                   std::uint64_t seed, int workers = 1, double value = 0.0,
                                   const SolvedPolicy* solved = nullptr) {
  require(slots >= 1 && replications >= 1, "evaluate_outage: slots and replications must be >= 1");
  std::vector<SinrTally> reps(replications);
  SolvedPolicy own;
  if (policy == Policy::stochastic && !solved) {
    own = solve_policy(in, workers);
    solved = &own;
  }
  const PayoffTables* tables = solved ? &solved->tables : nullptr;
  const EquilibriumSolution* solution = solved ? &solved->solution : nullptr;
  parallel_for(replications, workers, [&](int r) {
    reps[r] = replicate(policy, in, tables, solution, slots, derive_seed(seed, r));
  });
  return summarize(reps, policy, value, slots, seed);
}

struct TopologySpec {
  int num_sbs = 10;
  double macro_radius = 1000.0;
  double coverage_radius = 20.0;
  PlacementOptions placement;
  std::uint64_t seed = 7;

  Topology generate(int count, std::uint64_t topology_seed) const {
    return generate_topology(count, macro_radius, coverage_radius, topology_seed, placement);
  }
};

// Everything needed to build evaluation inputs for a topology.
struct Scenario {
  TopologySpec topology;
  GameConfig game;  // gains are filled per topology
  double sbs_packet_volume = 2.5e-3 / 60.0;
  double packet_ratio = 60.0;
  BaselineConfig baseline;
  OutageThresholds thresholds;
  SolveOptions solver;

  EvaluationInputs inputs(const Topology& topo) const {
    EvaluationInputs in;
    in.topology = topo;
    in.game = game;
    in.game.energy.packet_volume = packet_ratio * sbs_packet_volume;
    in.game.gains = build_gain_table(topo);
    in.baseline = baseline;
    in.baseline.packet_volume = sbs_packet_volume;
    in.thresholds = thresholds;
    in.solver = solver;
    return in;
  }
};

enum class SweepParameter { num_sbs, target_sinr_sbs, packet_ratio };

inline SweepParameter parse_sweep_parameter(const std::string& s) {
  if (s == "M") return SweepParameter::num_sbs;
  if (s == "lambda1") return SweepParameter::target_sinr_sbs;
  if (s == "C") return SweepParameter::packet_ratio;
  fail(ErrorKind::invalid_argument, "unknown sweep parameter '" + s + "' (expected M, lambda1 or C)");
}

inline const char* sweep_parameter_name(SweepParameter p) {
  switch (p) {
    case SweepParameter::num_sbs: return "M";
    case SweepParameter::target_sinr_sbs: return "lambda1";
    case SweepParameter::packet_ratio: return "C";
  }
  return "?";
}

struct SweepSettings {
  SweepParameter parameter = SweepParameter::num_sbs;
  std::vector<double> values;
  std::vector<Policy> methods{Policy::stochastic, Policy::stackelberg};
  bool resample_topology = false;
  int slots = 10000;
  int replications = 20;
  std::uint64_t seed = 1;
  int workers = 1;
};

inline Scenario apply_sweep_value(Scenario s, SweepParameter p, double v) {
  switch (p) {
    case SweepParameter::num_sbs:
      require(v >= 1.0 && v == std::floor(v), "sweep: M values must be positive integers");
      s.topology.num_sbs = static_cast<int>(v);
      break;
    case SweepParameter::target_sinr_sbs:
      s.game.target_sinr_sbs = v;
      break;
    case SweepParameter::packet_ratio:
      s.packet_ratio = v;
      break;
  }
  return s;
}

inline std::string point_label(SweepParameter p, double v, Policy m) {
  std::ostringstream os;
  os << "sweep point " << sweep_parameter_name(p) << "=" << v << " (" << policy_name(m) << ")";
  return os.str();
}

// Pinned topologies share one placement; smaller M use its first M SBSs.
inline OutageReport sweep(const Scenario& base, const SweepSettings& set) {
  require(!set.values.empty(), "sweep: no values");
  require(!set.methods.empty(), "sweep: no methods");
  OutageReport report;
  report.scenario = std::string("sweep over ") + sweep_parameter_name(set.parameter);
  int largest = base.topology.num_sbs;
  if (set.parameter == SweepParameter::num_sbs)
    for (double v : set.values) largest = std::max(largest, static_cast<int>(v));
  Topology pinned;
  if (!set.resample_topology) pinned = base.topology.generate(largest, base.topology.seed);

  for (double v : set.values) {
    for (Policy method : set.methods) {
      try {
        Scenario sc = apply_sweep_value(base, set.parameter, v);
        if (!set.resample_topology) {
          EvaluationInputs in = sc.inputs(prefix(pinned, sc.topology.num_sbs));
          report.points.push_back(
              evaluate_outage(method, in, set.slots, set.replications, set.seed, set.workers, v));
        } else {
          std::vector<SinrTally> reps(set.replications);
          parallel_for(set.replications, set.workers, [&](int r) {
            EvaluationInputs in = sc.inputs(sc.topology.generate(sc.topology.num_sbs, derive_seed(sc.topology.seed, r)));
            SolvedPolicy solved;
            if (method == Policy::stochastic) solved = solve_policy(in, 1);
            reps[r] = replicate(method, in, &solved.tables, &solved.solution, set.slots, derive_seed(set.seed, r));
          });
          report.points.push_back(summarize(reps, method, v, set.slots, set.seed));
        }
      } catch (const Error& e) {
        fail(e.kind(), point_label(set.parameter, v, method) + ": " + e.what());
      }
    }
  }
  return report;
}

// Average SINR of a symmetric network in which each of M cells transmits Q C K/(M ΔT).
inline double symmetric_dispatch_sinr(int M, double g, double gbar, double noise, double dispatched_energy,
                                      double slot_duration) {
  if (dispatched_energy <= 0.0) return 0.0;
  return g / ((M - 1) * gbar + noise * M * slot_duration / dispatched_energy);
}

struct MdpComparisonConfig {
  int capacity = 101;
  double packet_ratio = 20.0;
  double sbs_packet_volume = 0.5e-6;  // J
  double arrival_mean = 5.0;
  double arrival_stddev = 2.0;
  double sbs_battery_cap = 150e-6;  // J per slot per SBS
  double discount = 0.9;
  int averaging_steps = 20000;
};

struct ComparisonRow {
  int num_sbs = 0;
  double mdp_sinr = 0.0;
  double mfg_sinr = 0.0;
  double mfg_population_sinr = 0.0;
  bool mfg_converged = false;
};

// Long-run average SINR of the CES-only dispatch problem for a symmetric network.
inline double mdp_average_sinr(int M, const MfgConfig& mfg, const MdpComparisonConfig& cfg) {
  const int S = cfg.capacity;
  EnergyConfig energy;
  energy.capacity = S;
  energy.packet_volume = cfg.packet_ratio * cfg.sbs_packet_volume;
  energy.slot_duration = mfg.slot_duration;
  energy.arrival = ArrivalDistribution::discretized_gaussian(cfg.arrival_mean, cfg.arrival_stddev, S);
  int qmax = 0;
  while (qmax < S && (qmax + 1) * energy.packet_volume / M <= cfg.sbs_battery_cap) ++qmax;
  std::vector<double> reward(qmax + 1), sinr(qmax + 1);
  for (int q = 0; q <= qmax; ++q) {
    double p = q * energy.packet_volume / (M * energy.slot_duration);
    double e = p * mfg.own_gain - mfg.target_sinr * ((M - 1) * mfg.cross_gain * p + mfg.noise);
    reward[q] = -e * e;
    sinr[q] = symmetric_dispatch_sinr(M, mfg.own_gain, mfg.cross_gain, mfg.noise, q * energy.packet_volume,
                                      energy.slot_duration);
  }
  double scale = 0.0;
  for (double r : reward) scale = std::max(scale, std::abs(r));
  if (scale == 0.0) scale = 1.0;
  std::vector<TransitionMatrix> trans;
  for (int q = 0; q <= qmax; ++q) trans.push_back(transition_matrix(energy, q));
  std::vector<double> v(S + 1, 0.0), next(S + 1);
  std::vector<int> pol(S + 1, 0);
  for (int it = 0; it < 100000; ++it) {
    double change = 0.0;
    for (int s = 0; s <= S; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int q = 0; q <= std::min(s, qmax); ++q) {
        double acc = 0.0;
        for (int t = 0; t <= S; ++t) acc += trans[q].rows[s][t] * v[t];
        double val = reward[q] / scale + cfg.discount * acc;
        if (val > best + 1e-12 * (1.0 + std::abs(best))) {
          best = val;
          arg = q;
        }
      }
      next[s] = best;
      pol[s] = arg;
      change = std::max(change, std::abs(next[s] - v[s]));
    }
    v.swap(next);
    if (change <= 1e-12) break;
  }
  std::vector<double> dist(S + 1, 0.0), tmp(S + 1), avg(S + 1, 0.0);
  dist[S] = 1.0;
  for (int step = 0; step < cfg.averaging_steps; ++step) {
    for (int s = 0; s <= S; ++s) avg[s] += dist[s];
    std::fill(tmp.begin(), tmp.end(), 0.0);
    for (int s = 0; s <= S; ++s)
      if (dist[s] > 0.0)
        for (int t = 0; t <= S; ++t) tmp[t] += dist[s] * trans[pol[s]].rows[s][t];
    dist.swap(tmp);
  }
  double out = 0.0;
  for (int s = 0; s <= S; ++s) out += avg[s] / cfg.averaging_steps * sinr[pol[s]];
  return out;
}

inline double time_average(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / v.size();
}

inline std::vector<ComparisonRow> compare_mfg_vs_mdp(const std::vector<int>& densities, const MfgConfig& base,
                                                     const MdpComparisonConfig& mdp, int workers = 1) {
  require(base.own_gain == base.cross_gain, "compare_mfg_vs_mdp: needs symmetric gains (own_gain == cross_gain)");
  std::vector<ComparisonRow> rows(densities.size());
  parallel_for(static_cast<int>(densities.size()), workers, [&](int i) {
    MfgConfig cfg = base;
    cfg.num_sbs = densities[i];
    MfgResult r = solve_mfg(cfg);
    rows[i].num_sbs = densities[i];
    rows[i].mfg_sinr = time_average(policy_sinr(r.grid, cfg));
    rows[i].mfg_population_sinr = time_average(population_sinr(r.grid, cfg));
    rows[i].mfg_converged = r.converged;
    rows[i].mdp_sinr = mdp_average_sinr(densities[i], cfg, mdp);
  });
  return rows;
}

}  // namespace twotier
