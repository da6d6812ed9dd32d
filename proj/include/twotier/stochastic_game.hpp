#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "twotier/energy.hpp"
#include "twotier/error.hpp"
#include "twotier/parallel.hpp"
#include "twotier/payoff.hpp"
#include "twotier/random.hpp"

namespace twotier {

using Distribution = std::vector<double>;
using StateStrategy = std::vector<Distribution>;  // one distribution per battery state

struct StrategyPair {
  StateStrategy m;  // MBS, over power levels
  StateStrategy n;  // CES, over feasible dispatch counts
};

struct EquilibriumSolution {
  StrategyPair strategies;
  std::vector<double> ces_values;         // φ1
  std::vector<double> mbs_state_payoffs;  // ξ
  StateStrategy occupancy;                // x(s, Q)
  double gap = 0.0;
  double bellman_residual = 0.0;
  double ces_objective = 0.0;  // πᵀφ1
};

struct CesResponse {
  StateStrategy n;
  std::vector<double> values;
  StateStrategy occupancy;
  double bellman_residual = 0.0;
};

inline StateStrategy pure_strategy(const std::vector<int>& choice, const std::vector<int>& sizes) {
  StateStrategy out(choice.size());
  for (size_t s = 0; s < choice.size(); ++s) {
    out[s].assign(sizes[s], 0.0);
    out[s][choice[s]] = 1.0;
  }
  return out;
}

inline std::vector<int> pure_choice(const StateStrategy& st) {
  std::vector<int> out;
  for (const auto& d : st) out.push_back(static_cast<int>(std::max_element(d.begin(), d.end()) - d.begin()));
  return out;
}

namespace detail {

inline bool near_max(double v, double best) { return v >= best - 1e-12 * (1.0 + std::abs(best)); }

// CES decision problem against a fixed MBS strategy.
class CesModel {
 public:
  CesModel(const PayoffTables& tables, const GameConfig& cfg)
      : tables_(&tables), beta_(cfg.discount), pi_(cfg.initial_distribution()) {
    require(tables.num_states() == cfg.num_states(), "payoff tables do not match the configured capacity");
    for (int q = 0; q <= tables.max_dispatch(); ++q) trans_.push_back(transition_matrix(cfg.energy, q));
  }

  int num_states() const { return tables_->num_states(); }
  int num_actions(int s) const { return tables_->num_actions(s); }
  double beta() const { return beta_; }
  const std::vector<double>& pi() const { return pi_; }
  const TransitionRow& row(int s, int q) const { return trans_[q].rows[s]; }
  const PayoffTables& tables() const { return *tables_; }

  std::vector<std::vector<double>> rewards(const StateStrategy& m) const {
    std::vector<std::vector<double>> r(num_states());
    for (int s = 0; s < num_states(); ++s) {
      r[s].assign(num_actions(s), 0.0);
      for (int q = 0; q < num_actions(s); ++q)
        for (int p = 0; p < tables_->num_power_levels(); ++p) r[s][q] += m[s][p] * tables_->r1(s, p, q);
    }
    return r;
  }

  double q_value(const std::vector<std::vector<double>>& r, const Eigen::VectorXd& v, int s, int q) const {
    const auto& rw = row(s, q);
    double acc = 0.0;
    for (int t = 0; t < num_states(); ++t) acc += rw[t] * v[t];
    return r[s][q] + beta_ * acc;
  }

  std::vector<int> greedy(const std::vector<std::vector<double>>& r, const Eigen::VectorXd& v) const {
    std::vector<int> pol(num_states(), 0);
    for (int s = 0; s < num_states(); ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int q = 0; q < num_actions(s); ++q) best = std::max(best, q_value(r, v, s, q));
      for (int q = 0; q < num_actions(s); ++q)
        if (near_max(q_value(r, v, s, q), best)) {
          pol[s] = q;
          break;
        }
    }
    return pol;
  }

  Eigen::MatrixXd chain(const std::vector<int>& pol) const {
    const int n = num_states();
    Eigen::MatrixXd P(n, n);
    for (int s = 0; s < n; ++s)
      for (int t = 0; t < n; ++t) P(s, t) = row(s, pol[s])[t];
    return P;
  }

  Eigen::VectorXd evaluate(const std::vector<std::vector<double>>& r, const std::vector<int>& pol) const {
    const int n = num_states();
    Eigen::VectorXd rew(n);
    for (int s = 0; s < n; ++s) rew[s] = r[s][pol[s]];
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    return (I - beta_ * chain(pol)).partialPivLu().solve(rew);
  }

  double bellman_residual(const std::vector<std::vector<double>>& r, const Eigen::VectorXd& v) const {
    double res = 0.0;
    for (int s = 0; s < num_states(); ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int q = 0; q < num_actions(s); ++q) best = std::max(best, q_value(r, v, s, q));
      res = std::max(res, std::abs(best - v[s]));
    }
    return res;
  }

  Eigen::VectorXd visitation(const std::vector<int>& pol) const {
    const int n = num_states();
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd pi = Eigen::Map<const Eigen::VectorXd>(pi_.data(), n);
    return (I - beta_ * chain(pol).transpose()).partialPivLu().solve(pi);
  }

  CesResponse best_response(const StateStrategy& m, double tolerance = 1e-9) const {
    const int n = num_states();
    auto r = rewards(m);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    for (int it = 0; it < 100000; ++it) {
      Eigen::VectorXd next(n);
      for (int s = 0; s < n; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (int q = 0; q < num_actions(s); ++q) best = std::max(best, q_value(r, v, s, q));
        next[s] = best;
      }
      double change = (next - v).lpNorm<Eigen::Infinity>();
      v = next;
      if (change <= tolerance * (1.0 - beta_)) break;
    }
    std::vector<int> pol = greedy(r, v);
    Eigen::VectorXd phi = evaluate(r, pol);
    for (int round = 0; round < 1000; ++round) {
      std::vector<int> next = greedy(r, phi);
      if (next == pol) break;
      pol = next;
      phi = evaluate(r, pol);
    }
    CesResponse out;
    std::vector<int> sizes;
    for (int s = 0; s < n; ++s) sizes.push_back(num_actions(s));
    out.n = pure_strategy(pol, sizes);
    out.values.assign(phi.data(), phi.data() + n);
    out.bellman_residual = bellman_residual(r, phi);
    Eigen::VectorXd d = visitation(pol);
    out.occupancy.resize(n);
    for (int s = 0; s < n; ++s) {
      out.occupancy[s].assign(num_actions(s), 0.0);
      out.occupancy[s][pol[s]] = std::max(0.0, d[s]);
    }
    return out;
  }

  // Expected MBS stage payoff at state s for each power level against n(s).
  std::vector<double> mbs_scores(const Distribution& ns, int s) const {
    std::vector<double> score(tables_->num_power_levels(), 0.0);
    for (int p = 0; p < tables_->num_power_levels(); ++p)
      for (int q = 0; q < num_actions(s); ++q) score[p] += ns[q] * tables_->r0(s, p, q);
    return score;
  }

  StateStrategy mbs_best_response(const StateStrategy& n) const {
    StateStrategy m(num_states());
    for (int s = 0; s < num_states(); ++s) {
      auto score = mbs_scores(n[s], s);
      double best = *std::max_element(score.begin(), score.end());
      m[s].assign(score.size(), 0.0);
      for (size_t p = 0; p < score.size(); ++p)
        if (near_max(score[p], best)) {
          m[s][p] = 1.0;
          break;
        }
    }
    return m;
  }

  // True when every pure choice in m is a best response to n at its state.
  bool mbs_is_best_response(const std::vector<int>& m, const StateStrategy& n) const {
    for (int s = 0; s < num_states(); ++s) {
      auto score = mbs_scores(n[s], s);
      double best = *std::max_element(score.begin(), score.end());
      if (!near_max(score[m[s]], best)) return false;
    }
    return true;
  }

  EquilibriumSolution complete(const StateStrategy& m) const;

 private:
  const PayoffTables* tables_;
  double beta_;
  std::vector<double> pi_;
  std::vector<TransitionMatrix> trans_;
};

}  // namespace detail

inline CesResponse ces_best_response(const StateStrategy& m, const PayoffTables& tables, const GameConfig& cfg) {
  return detail::CesModel(tables, cfg).best_response(m);
}

inline StateStrategy mbs_best_response(const StateStrategy& n, const PayoffTables& tables, const GameConfig& cfg) {
  return detail::CesModel(tables, cfg).mbs_best_response(n);
}

namespace detail {

inline void check_distribution(const Distribution& d, size_t size, const std::string& what, double tol) {
  if (d.size() != size) fail(ErrorKind::invalid_argument, what + ": wrong length");
  double total = 0.0;
  for (double v : d) {
    if (v < -tol) fail(ErrorKind::invalid_argument, what + ": negative probability");
    total += v;
  }
  if (std::abs(total - 1.0) > tol) fail(ErrorKind::invalid_argument, what + ": does not sum to 1");
}

inline double gap_of(const CesModel& model, const EquilibriumSolution& c, double tol) {
  const PayoffTables& t = model.tables();
  const int S1 = model.num_states();
  const auto& m = c.strategies.m;
  const auto& n = c.strategies.n;
  if (static_cast<int>(m.size()) != S1 || static_cast<int>(n.size()) != S1 ||
      static_cast<int>(c.ces_values.size()) != S1 || static_cast<int>(c.mbs_state_payoffs.size()) != S1 ||
      static_cast<int>(c.occupancy.size()) != S1)
    fail(ErrorKind::invalid_argument, "equilibrium candidate: per-state vectors have the wrong length");
  for (int s = 0; s < S1; ++s) {
    check_distribution(m[s], t.num_power_levels(), "constraint m(s) simplex at state " + std::to_string(s), tol);
    check_distribution(n[s], model.num_actions(s), "constraint n(s) simplex at state " + std::to_string(s), tol);
    if (static_cast<int>(c.occupancy[s].size()) != model.num_actions(s))
      fail(ErrorKind::invalid_argument, "constraint x: wrong number of actions at state " + std::to_string(s));
    for (double x : c.occupancy[s])
      if (x < -tol) fail(ErrorKind::invalid_argument, "constraint x >= 0 violated at state " + std::to_string(s));
  }
  Eigen::VectorXd phi = Eigen::Map<const Eigen::VectorXd>(c.ces_values.data(), S1);
  auto r = model.rewards(m);
  for (int s = 0; s < S1; ++s)
    for (int q = 0; q < model.num_actions(s); ++q)
      if (model.q_value(r, phi, s, q) - phi[s] > tol)
        fail(ErrorKind::invalid_argument, "constraint H phi1 >= R1' m violated at state " + std::to_string(s) +
                                              ", action " + std::to_string(q));
  for (int sp = 0; sp < S1; ++sp) {
    double lhs = 0.0;
    for (int s = 0; s < S1; ++s)
      for (int q = 0; q < model.num_actions(s); ++q)
        lhs += c.occupancy[s][q] * ((s == sp ? 1.0 : 0.0) - model.beta() * model.row(s, q)[sp]);
    if (std::abs(lhs - model.pi()[sp]) > tol)
      fail(ErrorKind::invalid_argument, "constraint x'H = pi' violated at state " + std::to_string(sp));
  }
  for (int s = 0; s < S1; ++s)
    for (int p = 0; p < t.num_power_levels(); ++p) {
      double v = 0.0;
      for (int q = 0; q < model.num_actions(s); ++q) v += t.r0(s, p, q) * c.occupancy[s][q];
      if (v - c.mbs_state_payoffs[s] > tol)
        fail(ErrorKind::invalid_argument, "constraint R0 x(s) <= xi(s) violated at state " + std::to_string(s));
    }
  double total = 0.0;
  for (int s = 0; s < S1; ++s)
    for (int p = 0; p < t.num_power_levels(); ++p)
      for (int q = 0; q < model.num_actions(s); ++q)
        total += m[s][p] * (t.r0(s, p, q) + t.r1(s, p, q)) * c.occupancy[s][q];
  for (int s = 0; s < S1; ++s) total -= model.pi()[s] * phi[s] + c.mbs_state_payoffs[s];
  return total;
}

inline EquilibriumSolution CesModel::complete(const StateStrategy& m) const {
  EquilibriumSolution sol;
  CesResponse br = best_response(m);
  sol.strategies.m = m;
  sol.strategies.n = br.n;
  sol.ces_values = br.values;
  sol.occupancy = br.occupancy;
  sol.bellman_residual = br.bellman_residual;
  sol.mbs_state_payoffs.assign(num_states(), 0.0);
  for (int s = 0; s < num_states(); ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (int p = 0; p < tables_->num_power_levels(); ++p) {
      double v = 0.0;
      for (int q = 0; q < num_actions(s); ++q) v += tables_->r0(s, p, q) * br.occupancy[s][q];
      best = std::max(best, v);
    }
    sol.mbs_state_payoffs[s] = best;
  }
  sol.ces_objective = 0.0;
  for (int s = 0; s < num_states(); ++s) sol.ces_objective += pi_[s] * br.values[s];
  sol.gap = gap_of(*this, sol, 1e-6);
  return sol;
}

}  // namespace detail

inline double equilibrium_gap(const EquilibriumSolution& candidate, const PayoffTables& tables, const GameConfig& cfg,
                              double tolerance = 1e-6) {
  return detail::gap_of(detail::CesModel(tables, cfg), candidate, tolerance);
}

// Pairs m with the CES best response and the tightest ξ.
inline EquilibriumSolution complete_candidate(const StateStrategy& m, const PayoffTables& tables, const GameConfig& cfg) {
  return detail::CesModel(tables, cfg).complete(m);
}

// Largest gain any pure MBS deviation achieves at any state.
inline double max_mbs_deviation_gain(const EquilibriumSolution& sol, const PayoffTables& tables, const GameConfig& cfg) {
  detail::CesModel model(tables, cfg);
  double worst = 0.0;
  for (int s = 0; s < model.num_states(); ++s) {
    auto score = model.mbs_scores(sol.strategies.n[s], s);
    double current = 0.0;
    for (size_t p = 0; p < score.size(); ++p) current += sol.strategies.m[s][p] * score[p];
    for (double v : score) worst = std::max(worst, v - current);
  }
  return worst;
}

enum class SolveMode { enumerate, best_response_iteration, incremental };

inline const char* mode_name(SolveMode m) {
  switch (m) {
    case SolveMode::enumerate: return "enumerate";
    case SolveMode::best_response_iteration: return "bri";
    case SolveMode::incremental: return "incremental";
  }
  return "?";
}

inline SolveMode parse_mode(const std::string& s) {
  if (s == "enumerate") return SolveMode::enumerate;
  if (s == "bri" || s == "best-response-iteration") return SolveMode::best_response_iteration;
  if (s == "incremental") return SolveMode::incremental;
  fail(ErrorKind::invalid_argument, "unknown solver mode '" + s + "' (expected enumerate, bri or incremental)");
}

struct SolveOptions {
  SolveMode mode = SolveMode::enumerate;
  std::uint64_t enumerate_budget = 1ULL << 20;
  std::uint64_t seed = 1;
  int max_iterations = 1000;
  double improvement_epsilon = 1e-6;
  int restarts = 4;
  int workers = 1;
};

struct PureEquilibrium {
  std::uint64_t index = 0;  // position in the lexicographic enumeration of pure m
  std::vector<int> m;
  double ces_objective = 0.0;
};

namespace detail {

inline std::vector<int> decode(std::uint64_t index, int levels, int states) {
  std::vector<int> m(states);
  for (int s = states - 1; s >= 0; --s) {
    m[s] = static_cast<int>(index % levels);
    index /= levels;
  }
  return m;
}

inline std::uint64_t candidate_count(int levels, int states, std::uint64_t budget) {
  std::uint64_t count = 1;
  for (int s = 0; s < states; ++s) {
    if (count > budget / levels + 1) return budget + 1;
    count *= levels;
  }
  return count;
}

}  // namespace detail

// Every pure MBS strategy that is a best response to the CES's best response to it.
inline std::vector<PureEquilibrium> enumerate_pure_equilibria(const PayoffTables& tables, const GameConfig& cfg,
                                                              const SolveOptions& opt = {}) {
  detail::CesModel model(tables, cfg);
  const int levels = tables.num_power_levels(), states = tables.num_states();
  const std::uint64_t count = detail::candidate_count(levels, states, opt.enumerate_budget);
  if (count > opt.enumerate_budget)
    fail(ErrorKind::budget, "enumerate: |P|^(S+1) candidates exceed the budget of " +
                                std::to_string(opt.enumerate_budget));
  std::vector<int> sizes(states, levels);
  std::vector<char> is_eq(count, 0);
  std::vector<double> value(count, 0.0);
  parallel_for(static_cast<int>(count), opt.workers, [&](int k) {
    auto m = detail::decode(k, levels, states);
    CesResponse br = model.best_response(pure_strategy(m, sizes));
    if (model.mbs_is_best_response(m, br.n)) {
      is_eq[k] = 1;
      double v = 0.0;
      for (int s = 0; s < states; ++s) v += model.pi()[s] * br.values[s];
      value[k] = v;
    }
  });
  std::vector<PureEquilibrium> out;
  for (std::uint64_t k = 0; k < count; ++k)
    if (is_eq[k]) out.push_back({k, detail::decode(k, levels, states), value[k]});
  return out;
}

namespace detail {

inline EquilibriumSolution solve_enumerate(const PayoffTables& tables, const GameConfig& cfg, const SolveOptions& opt) {
  auto eqs = enumerate_pure_equilibria(tables, cfg, opt);
  if (eqs.empty()) fail(ErrorKind::no_equilibrium, "enumerate: no pure equilibrium found");
  const PureEquilibrium* best = &eqs.front();
  for (const auto& e : eqs)
    if (e.ces_objective > best->ces_objective + 1e-12 * (1.0 + std::abs(best->ces_objective))) best = &e;
  std::vector<int> sizes(tables.num_states(), tables.num_power_levels());
  return complete_candidate(pure_strategy(best->m, sizes), tables, cfg);
}

inline std::vector<int> random_pure(int levels, int states, Rng& rng) {
  std::vector<int> m(states);
  for (auto& v : m) v = static_cast<int>(uniform01(rng) * levels);
  return m;
}

inline EquilibriumSolution solve_bri(const PayoffTables& tables, const GameConfig& cfg, const SolveOptions& opt) {
  CesModel model(tables, cfg);
  const int levels = tables.num_power_levels(), states = tables.num_states();
  std::vector<int> sizes(states, levels);
  Rng rng(opt.seed);
  std::vector<int> m = random_pure(levels, states, rng);
  std::vector<std::vector<int>> history;
  for (int it = 0; it < opt.max_iterations; ++it) {
    CesResponse br = model.best_response(pure_strategy(m, sizes));
    if (model.mbs_is_best_response(m, br.n)) return model.complete(pure_strategy(m, sizes));
    history.push_back(m);
    std::vector<int> next = pure_choice(model.mbs_best_response(br.n));
    auto seen = std::find(history.begin(), history.end(), next);
    if (seen != history.end()) {
      std::ostringstream msg;
      msg << "best-response iteration cycles without a fixed point; cycle:";
      for (auto itc = seen; itc != history.end(); ++itc) {
        msg << " [";
        for (size_t s = 0; s < itc->size(); ++s) msg << (s ? "," : "") << (*itc)[s];
        msg << "]";
      }
      fail(ErrorKind::no_equilibrium, msg.str());
    }
    m = next;
  }
  fail(ErrorKind::no_equilibrium, "best-response iteration hit the iteration cap");
}

// Summed MBS regret over all states, including those the occupancy never reaches.
inline double mbs_regret(const CesModel& model, const std::vector<int>& m, const StateStrategy& n) {
  double total = 0.0;
  for (int s = 0; s < model.num_states(); ++s) {
    auto score = model.mbs_scores(n[s], s);
    total += *std::max_element(score.begin(), score.end()) - score[m[s]];
  }
  return total;
}

// Penalised local search over pure MBS strategies: maximise πᵀφ1 - μ·regret subject to πᵀφ1 >= floor.
inline std::optional<EquilibriumSolution> local_solve(const CesModel& model, std::vector<int> m, double floor,
                                                      double tol) {
  const int levels = model.tables().num_power_levels(), states = model.num_states();
  std::vector<int> sizes(states, levels);
  auto score = [&](const std::vector<int>& cand, double mu, EquilibriumSolution* keep) {
    EquilibriumSolution sol = model.complete(pure_strategy(cand, sizes));
    double regret = mbs_regret(model, cand, sol.strategies.n);
    double v = sol.ces_objective - mu * regret - mu * std::max(0.0, floor - sol.ces_objective);
    if (keep) *keep = std::move(sol);
    return v;
  };
  for (double mu : {1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6}) {
    double current = score(m, mu, nullptr);
    bool improved = true;
    while (improved) {
      improved = false;
      for (int s = 0; s < states; ++s)
        for (int p = 0; p < levels; ++p) {
          if (p == m[s]) continue;
          auto cand = m;
          cand[s] = p;
          double v = score(cand, mu, nullptr);
          if (v > current + 1e-15 * (1.0 + std::abs(current))) {
            m = cand;
            current = v;
            improved = true;
          }
        }
    }
  }
  EquilibriumSolution sol;
  score(m, 0.0, &sol);
  if (sol.gap >= -tol && mbs_regret(model, m, sol.strategies.n) <= tol && sol.ces_objective >= floor - 1e-12)
    return sol;
  return std::nullopt;
}

inline EquilibriumSolution solve_incremental(const PayoffTables& tables, const GameConfig& cfg,
                                             const SolveOptions& opt) {
  CesModel model(tables, cfg);
  const int levels = tables.num_power_levels(), states = tables.num_states();
  Rng rng(opt.seed);
  const double tol = 1e-6;
  std::optional<EquilibriumSolution> best;
  for (int r = 0; r <= opt.restarts && !best; ++r)
    best = local_solve(model, random_pure(levels, states, rng), -std::numeric_limits<double>::infinity(), tol);
  if (!best) fail(ErrorKind::no_equilibrium, "incremental: local solver found no equilibrium");
  for (int round = 0; round < opt.max_iterations; ++round) {
    double floor = best->ces_objective + opt.improvement_epsilon;
    std::optional<EquilibriumSolution> next = local_solve(model, pure_choice(best->strategies.m), floor, tol);
    for (int r = 0; r < opt.restarts && !next; ++r)
      next = local_solve(model, random_pure(levels, states, rng), floor, tol);
    if (!next) break;
    best = std::move(next);
  }
  return *best;
}

}  // namespace detail

inline EquilibriumSolution solve_equilibrium(const PayoffTables& tables, const GameConfig& cfg,
                                             const SolveOptions& opt = {}) {
  switch (opt.mode) {
    case SolveMode::enumerate: return detail::solve_enumerate(tables, cfg, opt);
    case SolveMode::best_response_iteration: return detail::solve_bri(tables, cfg, opt);
    case SolveMode::incremental: return detail::solve_incremental(tables, cfg, opt);
  }
  fail(ErrorKind::invalid_argument, "unknown solver mode");
}

struct TrajectoryRow {
  int t = 0;
  double state = 0.0;
  double dispatch = 0.0;
  double p0 = 0.0;
  std::vector<double> powers;
  double arrivals = 0.0;
};

inline std::vector<TrajectoryRow> run_policy(const EquilibriumSolution& sol, const PayoffTables& tables,
                                             const GameConfig& cfg, int horizon, std::uint64_t seed) {
  require(horizon >= 1, "run_policy: horizon must be >= 1");
  Rng rng(seed);
  int s = sample_discrete(cfg.initial_distribution(), rng);
  std::vector<TrajectoryRow> out;
  out.reserve(horizon);
  for (int t = 0; t < horizon; ++t) {
    int q = sample_discrete(sol.strategies.n[s], rng);
    int p = sample_discrete(sol.strategies.m[s], rng);
    int arrival = sample_discrete(cfg.energy.arrival.pmf, rng);
    TrajectoryRow row;
    row.t = t;
    row.state = s;
    row.dispatch = q;
    row.p0 = tables.power_levels()[p];
    row.powers = tables.cell(p, q).allocation.powers;
    row.arrivals = arrival;
    out.push_back(std::move(row));
    s = step_battery(s, q, arrival, cfg.energy.capacity);
  }
  return out;
}

// Transition matrix of the battery under the CES strategy n.
inline Eigen::MatrixXd induced_chain(const StateStrategy& n, const GameConfig& cfg) {
  const int S1 = cfg.num_states();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(S1, S1);
  for (int s = 0; s < S1; ++s)
    for (int q = 0; q < static_cast<int>(n[s].size()); ++q) {
      if (n[s][q] == 0.0) continue;
      auto row = transition_row(cfg.energy, s, q);
      for (int t = 0; t < S1; ++t) P(s, t) += n[s][q] * row[t];
    }
  return P;
}

}  // namespace twotier
