#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "twotier/energy.hpp"
#include "twotier/error.hpp"
#include "twotier/geometry.hpp"
#include "twotier/parallel.hpp"
#include "twotier/qp.hpp"

namespace twotier {

struct GameConfig {
  std::vector<double> mbs_power_levels{10.0, 20.0};
  double target_sinr_mbs = 10.0;
  double target_sinr_sbs = 0.1;
  double noise = 1e-8;
  double sbs_max_power = 0.3;
  double discount = 0.9;
  std::vector<double> initial_state_dist;  // empty means all mass on a full battery
  EnergyConfig energy;
  GainTable gains;

  int num_states() const { return energy.capacity + 1; }
  int num_sbs() const { return gains.num_sbs(); }
  int num_power_levels() const { return static_cast<int>(mbs_power_levels.size()); }

  std::vector<double> initial_distribution() const {
    if (!initial_state_dist.empty()) return initial_state_dist;
    std::vector<double> pi(num_states(), 0.0);
    pi.back() = 1.0;
    return pi;
  }

  // Everything except the gain table.
  void validate_parameters() const {
    require(!mbs_power_levels.empty(), "game.mbs_power_levels must be nonempty");
    for (size_t i = 0; i < mbs_power_levels.size(); ++i) {
      require(mbs_power_levels[i] > 0.0, "game.mbs_power_levels must be positive");
      if (i > 0) require(mbs_power_levels[i] > mbs_power_levels[i - 1], "game.mbs_power_levels must be strictly increasing");
    }
    require(target_sinr_mbs >= 0.0 && target_sinr_sbs >= 0.0, "game targets must be >= 0");
    require(noise >= 0.0, "game.noise must be >= 0");
    require(sbs_max_power > 0.0, "game.sbs_max_power must be > 0");
    require(discount > 0.0 && discount < 1.0, "game.discount must lie in (0,1)");
    energy.validate();
    if (!initial_state_dist.empty()) {
      require(static_cast<int>(initial_state_dist.size()) == num_states(),
              "game.initial_state_dist must have capacity+1 entries");
      double total = 0.0;
      for (double p : initial_state_dist) {
        require(p >= 0.0, "game.initial_state_dist entries must be >= 0");
        total += p;
      }
      require(std::abs(total - 1.0) <= 1e-10, "game.initial_state_dist must sum to 1");
    }
  }

  void validate() const {
    validate_parameters();
    gains.validate();
  }
};

struct Allocation {
  std::vector<double> powers;
  double objective = 0.0;  // value of the CES utility at the optimum
  double kkt_residual = 0.0;
  int iterations = 0;
};

namespace detail {

// Residual vector r = A p - c with r_i = p_i g_i - λ1 (Σ_{j≠i} p_j g_ij + p0 g_i0).
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> sinr_residual_system(const GainTable& g, double lambda1, double p0) {
  const int M = g.num_sbs();
  Eigen::MatrixXd A(M, M);
  Eigen::VectorXd c(M);
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < M; ++j) A(i, j) = i == j ? g(i + 1, i + 1) : -lambda1 * g(i + 1, j + 1);
    c[i] = lambda1 * p0 * g(i + 1, 0);
  }
  return {A, c};
}

}  // namespace detail

inline double ces_utility(double p0, const std::vector<double>& powers, const GameConfig& cfg) {
  const GainTable& g = cfg.gains;
  const int M = g.num_sbs();
  if (M == 0) return 0.0;
  double total = 0.0;
  for (int i = 1; i <= M; ++i) {
    double interference = p0 * g(i, 0);
    for (int j = 1; j <= M; ++j)
      if (j != i) interference += powers[j - 1] * g(i, j);
    double e = powers[i - 1] * g(i, i) - cfg.target_sinr_sbs * interference;
    total += e * e;
  }
  return -total / M;
}

inline double mbs_utility(double p0, const std::vector<double>& powers, const GameConfig& cfg) {
  const GainTable& g = cfg.gains;
  double interference = 0.0;
  for (int i = 1; i <= g.num_sbs(); ++i) interference += powers[i - 1] * g(0, i);
  double e = p0 * g(0, 0) - cfg.target_sinr_mbs * (interference + cfg.noise);
  return -e * e;
}

// Largest dispatch that fits the per-SBS power cap.
inline int max_feasible_dispatch(const GameConfig& cfg) {
  const int M = cfg.num_sbs();
  int q = 0;
  while (q < cfg.energy.capacity &&
         packets_to_power_budget(q + 1, cfg.energy) <= M * cfg.sbs_max_power * (1.0 + 1e-12))
    ++q;
  return q;
}

inline Allocation allocate_energy(int Q, double p0, const GameConfig& cfg, const QpOptions& opt = {}) {
  const int M = cfg.num_sbs();
  const double budget = packets_to_power_budget(Q, cfg.energy);
  if (budget > M * cfg.sbs_max_power * (1.0 + 1e-12)) {
    fail(ErrorKind::infeasible, "allocate_energy: budget " + std::to_string(budget) + " W for Q=" + std::to_string(Q) +
                                    " exceeds M*P_max");
  }
  Allocation out;
  if (M == 0) return out;
  auto [A, c] = detail::sinr_residual_system(cfg.gains, cfg.target_sinr_sbs, p0);
  LeastSquaresQp qp;
  qp.A = std::move(A);
  qp.c = std::move(c);
  qp.weight = 1.0 / M;
  qp.lower = Eigen::VectorXd::Zero(M);
  qp.upper = Eigen::VectorXd::Constant(M, cfg.sbs_max_power);
  qp.total = std::min(budget, M * cfg.sbs_max_power);
  QpResult r = solve_least_squares_qp(qp, opt);
  if (!r.converged)
    fail(ErrorKind::numerical, "allocate_energy: solver did not converge (Q=" + std::to_string(Q) +
                                   ", residual " + std::to_string(r.kkt_residual) + ")");
  out.powers.assign(r.x.data(), r.x.data() + M);
  out.objective = ces_utility(p0, out.powers, cfg);
  out.kkt_residual = r.kkt_residual;
  out.iterations = r.iterations;
  return out;
}

inline double utility_mbs(double p0, int Q, const GameConfig& cfg) { return mbs_utility(p0, allocate_energy(Q, p0, cfg).powers, cfg); }
inline double utility_ces(double p0, int Q, const GameConfig& cfg) { return ces_utility(p0, allocate_energy(Q, p0, cfg).powers, cfg); }

// Payoffs depend on (Q, p0) only; states differ solely in which Q are available.
// Each player's payoffs are divided by that player's largest magnitude so both lie in [-1, 0].
class PayoffTables {
 public:
  struct Cell {
    double mbs = 0.0;  // raw utilities
    double ces = 0.0;
    Allocation allocation;
  };

  PayoffTables() = default;
  PayoffTables(int capacity, int max_dispatch, std::vector<double> power_levels, std::vector<Cell> cells)
      : capacity_(capacity), max_dispatch_(max_dispatch), levels_(std::move(power_levels)), cells_(std::move(cells)) {
    for (const auto& c : cells_) {
      mbs_scale_ = std::max(mbs_scale_, std::abs(c.mbs));
      ces_scale_ = std::max(ces_scale_, std::abs(c.ces));
    }
    if (mbs_scale_ == 0.0) mbs_scale_ = 1.0;
    if (ces_scale_ == 0.0) ces_scale_ = 1.0;
  }

  int num_states() const { return capacity_ + 1; }
  int num_power_levels() const { return static_cast<int>(levels_.size()); }
  int max_dispatch() const { return max_dispatch_; }
  const std::vector<double>& power_levels() const { return levels_; }
  int num_actions(int s) const { return std::min(s, max_dispatch_) + 1; }

  const Cell& cell(int p, int Q) const { return cells_.at(static_cast<size_t>(Q) * levels_.size() + p); }
  double r0(int s, int p, int Q) const { check(s, Q); return cell(p, Q).mbs / mbs_scale_; }
  double r1(int s, int p, int Q) const { check(s, Q); return cell(p, Q).ces / ces_scale_; }
  double mbs_scale() const { return mbs_scale_; }
  double ces_scale() const { return ces_scale_; }

  Eigen::MatrixXd block_r0(int s) const { return block(s, true); }
  Eigen::MatrixXd block_r1(int s) const { return block(s, false); }

 private:
  void check(int s, int Q) const {
    require(s >= 0 && s <= capacity_ && Q >= 0 && Q < num_actions(s), "payoff lookup outside the action set");
  }
  Eigen::MatrixXd block(int s, bool mbs) const {
    Eigen::MatrixXd b(num_power_levels(), num_actions(s));
    for (int p = 0; p < num_power_levels(); ++p)
      for (int q = 0; q < num_actions(s); ++q) b(p, q) = mbs ? r0(s, p, q) : r1(s, p, q);
    return b;
  }

  int capacity_ = 0;
  int max_dispatch_ = 0;
  std::vector<double> levels_;
  std::vector<Cell> cells_;
  double mbs_scale_ = 0.0;
  double ces_scale_ = 0.0;
};

inline PayoffTables build_payoff_tables(const GameConfig& cfg, int workers = 1) {
  cfg.validate();
  const int qmax = max_feasible_dispatch(cfg);
  const int levels = cfg.num_power_levels();
  std::vector<PayoffTables::Cell> cells(static_cast<size_t>(qmax + 1) * levels);
  parallel_for(static_cast<int>(cells.size()), workers, [&](int k) {
    int Q = k / levels, p = k % levels;
    double p0 = cfg.mbs_power_levels[p];
    try {
      auto& cell = cells[k];
      cell.allocation = allocate_energy(Q, p0, cfg);
      cell.mbs = mbs_utility(p0, cell.allocation.powers, cfg);
      cell.ces = cell.allocation.objective;
    } catch (const Error& e) {
      fail(e.kind(), "payoff cell (Q=" + std::to_string(Q) + ", p0=" + std::to_string(p0) + "): " + e.what());
    }
  });
  return PayoffTables(cfg.energy.capacity, qmax, cfg.mbs_power_levels, std::move(cells));
}

inline nlohmann::json payoff_tables_json(const PayoffTables& t) {
  nlohmann::json j;
  j["power_levels"] = t.power_levels();
  j["mbs_scale"] = t.mbs_scale();
  j["ces_scale"] = t.ces_scale();
  j["max_dispatch"] = t.max_dispatch();
  auto states = nlohmann::json::array();
  for (int s = 0; s < t.num_states(); ++s) {
    nlohmann::json st;
    st["state"] = s;
    auto r0 = nlohmann::json::array(), r1 = nlohmann::json::array();
    for (int p = 0; p < t.num_power_levels(); ++p) {
      auto a = nlohmann::json::array(), b = nlohmann::json::array();
      for (int q = 0; q < t.num_actions(s); ++q) {
        a.push_back(t.r0(s, p, q));
        b.push_back(t.r1(s, p, q));
      }
      r0.push_back(a);
      r1.push_back(b);
    }
    st["R0"] = r0;
    st["R1"] = r1;
    states.push_back(st);
  }
  j["states"] = states;
  auto alloc = nlohmann::json::array();
  for (int q = 0; q <= t.max_dispatch(); ++q)
    for (int p = 0; p < t.num_power_levels(); ++p) {
      const auto& c = t.cell(p, q);
      alloc.push_back({{"Q", q}, {"p0", t.power_levels()[p]}, {"powers", c.allocation.powers},
                       {"mbs_utility", c.mbs}, {"ces_utility", c.ces}, {"kkt_residual", c.allocation.kkt_residual}});
    }
  j["allocations"] = alloc;
  return j;
}

}  // namespace twotier
