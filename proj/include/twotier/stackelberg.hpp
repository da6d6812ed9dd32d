#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "twotier/error.hpp"
#include "twotier/geometry.hpp"
#include "twotier/payoff.hpp"
#include "twotier/qp.hpp"
#include "twotier/random.hpp"
#include "twotier/stochastic_game.hpp"

namespace twotier {

struct SbsBatteryState {
  std::vector<double> stored;    // J
  std::vector<double> capacity;  // J

  static SbsBatteryState uniform(int num_sbs, double capacity, double initial) {
    return {std::vector<double>(num_sbs, std::min(initial, capacity)), std::vector<double>(num_sbs, capacity)};
  }

  void validate() const {
    require(stored.size() == capacity.size(), "battery state: size mismatch");
    for (size_t i = 0; i < stored.size(); ++i)
      require(stored[i] >= 0.0 && stored[i] <= capacity[i], "battery state: stored energy outside [0, capacity]");
  }
};

struct FollowerResult {
  std::vector<double> powers;
  double objective = 0.0;
  double kkt_residual = 0.0;
};

// Followers' box-constrained least-squares problem for fixed gains; reusable across p0 and battery states.
class FollowerSolver {
 public:
  FollowerSolver(const GainTable& gains, double lambda1) : M_(gains.num_sbs()) {
    if (M_ == 0) return;
    auto [A, c] = detail::sinr_residual_system(gains, lambda1, 1.0);
    qp_.A = std::move(A);
    unit_c_ = std::move(c);
    qp_.c = unit_c_;
    qp_.lower = Eigen::VectorXd::Zero(M_);
    qp_.upper = Eigen::VectorXd::Constant(M_, std::numeric_limits<double>::infinity());
    quad_ = detail::quadratic_of(qp_);
    unit_b_ = quad_.b;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(qp_.A);
    if (lu.isInvertible()) unit_x_ = lu.solve(unit_c_);
  }

  int num_sbs() const { return M_; }

  FollowerResult solve(double p0, const std::vector<double>& upper) {
    FollowerResult out;
    if (M_ == 0) return out;
    require(static_cast<int>(upper.size()) == M_, "followers_response: one battery per SBS required");
    for (int i = 0; i < M_; ++i) qp_.upper[i] = upper[i];
    qp_.c = p0 * unit_c_;
    quad_.b = p0 * unit_b_;
    if (unit_x_.size() == M_) {
      Eigen::VectorXd x = p0 * unit_x_;
      bool inside = true;
      for (int i = 0; i < M_ && inside; ++i) inside = x[i] >= 0.0 && x[i] <= qp_.upper[i];
      if (inside) return finish(x);
    }
    QpResult r = detail::projected_gradient(qp_, quad_, Eigen::VectorXd::Zero(M_), QpOptions{});
    if (!r.converged)
      fail(ErrorKind::numerical, "followers_response: solver did not converge (residual " +
                                     std::to_string(r.kkt_residual) + ")");
    return finish(r.x);
  }

 private:
  FollowerResult finish(const Eigen::VectorXd& x) const {
    FollowerResult out;
    out.powers.resize(M_);
    for (int i = 0; i < M_; ++i) out.powers[i] = std::clamp(x[i], 0.0, qp_.upper[i]);
    Eigen::Map<const Eigen::VectorXd> p(out.powers.data(), M_);
    out.objective = detail::objective(qp_, p);
    out.kkt_residual = detail::fixed_point_residual(qp_, quad_, p);
    return out;
  }

  int M_;
  LeastSquaresQp qp_;
  detail::Quadratic quad_;
  Eigen::VectorXd unit_c_, unit_b_, unit_x_;
};

inline std::vector<double> power_limits(const SbsBatteryState& batteries, double slot_duration) {
  std::vector<double> out(batteries.stored.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = batteries.stored[i] / slot_duration;
  return out;
}

inline FollowerResult followers_response(double p0, const SbsBatteryState& batteries, const GainTable& gains,
                                         double lambda1, double slot_duration) {
  batteries.validate();
  FollowerSolver solver(gains, lambda1);
  return solver.solve(p0, power_limits(batteries, slot_duration));
}

struct LeaderResult {
  int level = 0;
  double p0 = 0.0;
  std::vector<double> powers;
  double mbs_utility = 0.0;
};

inline LeaderResult leader_choice(const SbsBatteryState& batteries, const GameConfig& cfg, FollowerSolver& solver) {
  require(!cfg.mbs_power_levels.empty(), "leader_choice: power set is empty");
  const std::vector<double> limits = power_limits(batteries, cfg.energy.slot_duration);
  LeaderResult best;
  bool have = false;
  for (int k = 0; k < cfg.num_power_levels(); ++k) {
    double p0 = cfg.mbs_power_levels[k];
    auto f = solver.solve(p0, limits);
    double u = mbs_utility(p0, f.powers, cfg);
    if (!have || u > best.mbs_utility) {
      best = {k, p0, std::move(f.powers), u};
      have = true;
    }
  }
  return best;
}

inline LeaderResult leader_choice(const SbsBatteryState& batteries, const GameConfig& cfg) {
  batteries.validate();
  FollowerSolver solver(cfg.gains, cfg.target_sinr_sbs);
  return leader_choice(batteries, cfg, solver);
}

struct BaselineConfig {
  double packet_volume = 2.5e-3 / 60.0;  // J per SBS packet
  double arrival_rate = 1.0;             // packets per slot
  double battery_capacity = 1.5e-3;      // J
  double initial_fraction = 1.0;         // initial charge as a fraction of capacity

  void validate() const {
    require(packet_volume > 0.0, "baseline.packet_volume must be > 0");
    require(arrival_rate >= 0.0, "baseline.arrival_rate must be >= 0");
    require(battery_capacity > 0.0, "baseline.battery_capacity must be > 0");
    require(initial_fraction >= 0.0 && initial_fraction <= 1.0, "baseline.initial_fraction must lie in [0,1]");
  }
};

struct BaselineRow {
  int t = 0;
  double p0 = 0.0;
  std::vector<double> powers;
  std::vector<double> stored_before;
  std::vector<double> harvested;
};

// The trajectory is returned through a callback so long runs need not be stored.
template <class Visitor>
void run_baseline_visit(const GameConfig& cfg, const BaselineConfig& base, int horizon, std::uint64_t seed,
                        Visitor&& visit) {
  base.validate();
  require(horizon >= 1, "run_baseline: horizon must be >= 1");
  const int M = cfg.num_sbs();
  Rng rng(seed);
  SbsBatteryState bat = SbsBatteryState::uniform(M, base.battery_capacity, base.initial_fraction * base.battery_capacity);
  FollowerSolver solver(cfg.gains, cfg.target_sinr_sbs);
  BaselineRow row;
  row.harvested.assign(M, 0.0);
  for (int t = 0; t < horizon; ++t) {
    LeaderResult lead = leader_choice(bat, cfg, solver);
    row.t = t;
    row.p0 = lead.p0;
    row.powers = std::move(lead.powers);
    row.stored_before = bat.stored;
    for (int i = 0; i < M; ++i) {
      row.harvested[i] = sample_poisson(base.arrival_rate, rng) * base.packet_volume;
      double next = bat.stored[i] - row.powers[i] * cfg.energy.slot_duration + row.harvested[i];
      bat.stored[i] = std::clamp(next, 0.0, bat.capacity[i]);
    }
    visit(static_cast<const BaselineRow&>(row));
  }
}

inline std::vector<BaselineRow> run_baseline(const GameConfig& cfg, const BaselineConfig& base, int horizon,
                                             std::uint64_t seed) {
  std::vector<BaselineRow> out;
  run_baseline_visit(cfg, base, horizon, seed, [&](const BaselineRow& r) { out.push_back(r); });
  return out;
}

// Baseline rows in the shared trajectory schema; state, dispatch and arrivals are totals in SBS packets.
inline TrajectoryRow to_trajectory_row(const BaselineRow& r, const BaselineConfig& base, double slot_duration) {
  TrajectoryRow out;
  out.t = r.t;
  out.p0 = r.p0;
  out.powers = r.powers;
  for (size_t i = 0; i < r.powers.size(); ++i) {
    out.state += r.stored_before[i] / base.packet_volume;
    out.dispatch += r.powers[i] * slot_duration / base.packet_volume;
    out.arrivals += r.harvested[i] / base.packet_volume;
  }
  return out;
}

}  // namespace twotier
