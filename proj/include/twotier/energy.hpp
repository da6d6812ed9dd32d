#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "twotier/error.hpp"

namespace twotier {

// Pr(arrival = X packets) for X = 0..S; the last entry holds Pr(arrival >= S).
struct ArrivalDistribution {
  std::vector<double> pmf;

  int capacity() const { return static_cast<int>(pmf.size()) - 1; }

  void validate() const {
    require(!pmf.empty(), "arrival pmf must not be empty");
    double total = 0.0;
    for (double p : pmf) {
      require(std::isfinite(p) && p >= 0.0, "arrival pmf entries must be non-negative");
      total += p;
    }
    require(std::abs(total - 1.0) <= 1e-12, "arrival pmf must sum to 1 within 1e-12");
  }

  static ArrivalDistribution explicit_pmf(std::vector<double> pmf) {
    ArrivalDistribution d{std::move(pmf)};
    d.validate();
    return d;
  }

  static ArrivalDistribution poisson(double rate, int capacity) {
    require(rate >= 0.0, "poisson arrival rate must be >= 0");
    require(capacity >= 0, "arrival capacity must be >= 0");
    ArrivalDistribution d;
    d.pmf.assign(capacity + 1, 0.0);
    double term = std::exp(-rate);
    double head = 0.0;
    for (int x = 0; x < capacity; ++x) {
      d.pmf[x] = term;
      head += term;
      term *= rate / (x + 1);
    }
    d.pmf[capacity] = std::max(0.0, 1.0 - head);
    return d;
  }

  static ArrivalDistribution deterministic(int packets, int capacity) {
    require(packets >= 0 && capacity >= 0, "deterministic arrival needs non-negative counts");
    ArrivalDistribution d;
    d.pmf.assign(capacity + 1, 0.0);
    d.pmf[std::min(packets, capacity)] = 1.0;
    return d;
  }

  // Gaussian mass on integer bins (x - 0.5, x + 0.5], clipped at 0 and folded at S.
  static ArrivalDistribution discretized_gaussian(double mean, double stddev, int capacity) {
    require(stddev > 0.0, "gaussian arrival stddev must be > 0");
    require(capacity >= 0, "arrival capacity must be >= 0");
    auto cdf = [&](double v) { return 0.5 * std::erfc(-(v - mean) / (stddev * std::sqrt(2.0))); };
    ArrivalDistribution d;
    d.pmf.assign(capacity + 1, 0.0);
    double head = 0.0;
    for (int x = 0; x < capacity; ++x) {
      double lo = x == 0 ? 0.0 : cdf(x - 0.5);
      d.pmf[x] = cdf(x + 0.5) - lo;
      head += d.pmf[x];
    }
    d.pmf[capacity] = std::max(0.0, 1.0 - head);
    return d;
  }
};

struct EnergyConfig {
  int capacity = 25;              // S, in packets
  double packet_volume = 2.5e-3;  // K, joules per CES packet
  double slot_duration = 5e-3;    // ΔT, seconds
  ArrivalDistribution arrival = ArrivalDistribution::poisson(1.0, 25);
  double transfer_loss_fraction = 0.0;

  int num_states() const { return capacity + 1; }

  void validate() const {
    require(capacity >= 0, "energy.capacity must be >= 0");
    require(packet_volume > 0.0, "energy.packet_volume must be > 0");
    require(slot_duration > 0.0, "energy.slot_duration must be > 0");
    require(transfer_loss_fraction >= 0.0 && transfer_loss_fraction < 1.0,
            "energy.transfer_loss_fraction must lie in [0,1)");
    arrival.validate();
    require(arrival.capacity() == capacity, "energy.arrival pmf must have capacity+1 entries");
  }
};

// Row s of the transition matrix for action Q; empty when Q > s.
using TransitionRow = std::vector<double>;

struct TransitionMatrix {
  std::vector<TransitionRow> rows;
  bool valid(int s) const { return !rows[s].empty(); }
};

inline TransitionRow transition_row(const EnergyConfig& cfg, int s, int Q) {
  const int S = cfg.capacity;
  TransitionRow row(S + 1, 0.0);
  const int base = s - Q;
  double head = 0.0;
  for (int next = base; next < S; ++next) {
    row[next] = cfg.arrival.pmf[next - base];
    head += row[next];
  }
  row[S] = 1.0 - head;
  if (row[S] < 0.0) row[S] = 0.0;
  return row;
}

inline TransitionMatrix transition_matrix(const EnergyConfig& cfg, int Q) {
  require(Q >= 0, "transition_matrix: Q must be >= 0");
  require(Q <= cfg.capacity, "transition_matrix: Q exceeds battery capacity");
  TransitionMatrix m;
  m.rows.resize(cfg.capacity + 1);
  for (int s = Q; s <= cfg.capacity; ++s) m.rows[s] = transition_row(cfg, s, Q);
  return m;
}

inline int step_battery(int s, int Q, int arrival, int capacity) {
  require(Q >= 0 && arrival >= 0, "step_battery: Q and arrival must be >= 0");
  require(Q <= s, "step_battery: cannot dispatch more packets than stored");
  long next = static_cast<long>(s) - Q + arrival;
  return static_cast<int>(std::min<long>(next, capacity));
}

inline double packets_to_power_budget(int Q, const EnergyConfig& cfg) {
  require(Q >= 0, "packets_to_power_budget: Q must be >= 0");
  return (1.0 - cfg.transfer_loss_fraction) * cfg.packet_volume * Q / cfg.slot_duration;
}

}  // namespace twotier
