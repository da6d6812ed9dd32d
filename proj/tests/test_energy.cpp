#include <gtest/gtest.h>

#include <cmath>

#include "twotier/energy.hpp"
#include "twotier/random.hpp"

using namespace twotier;

namespace {

EnergyConfig config_with(ArrivalDistribution a) {
  EnergyConfig cfg;
  cfg.capacity = a.capacity();
  cfg.arrival = std::move(a);
  return cfg;
}

// Next-state distribution by direct summation of e^-rate rate^k / k!, residual mass on S.
std::vector<double> poisson_row_oracle(double rate, int S, int s, int Q) {
  std::vector<double> row(S + 1, 0.0);
  const int base = s - Q;
  double below = 0.0;
  for (int next = base; next < S; ++next) {
    int k = next - base;
    row[next] = std::exp(-rate + k * std::log(rate) - std::lgamma(k + 1.0));
    below += row[next];
  }
  row[S] = 1.0 - below;
  return row;
}

}  // namespace

TEST(Arrival, PoissonFoldsTailIntoLastEntry) {
  auto a = ArrivalDistribution::poisson(1.0, 5);
  ASSERT_EQ(a.capacity(), 5);
  double sum = 0.0;
  for (double p : a.pmf) sum += p;
  EXPECT_NEAR(sum, 1.0, 1e-15);
  EXPECT_NEAR(a.pmf[0], std::exp(-1.0), 1e-16);
  EXPECT_NEAR(a.pmf[5], 1.0 - std::exp(-1.0) * (1 + 1 + 0.5 + 1.0 / 6 + 1.0 / 24), 1e-15);
}

TEST(Arrival, ExplicitPmfMustSumToOne) {
  EXPECT_THROW(ArrivalDistribution::explicit_pmf({0.5, 0.4}), Error);
  EXPECT_THROW(ArrivalDistribution::explicit_pmf({1.2, -0.2}), Error);
  EXPECT_NO_THROW(ArrivalDistribution::explicit_pmf({0.25, 0.75}));
}

TEST(Arrival, DiscretizedGaussianIsAProbabilityVector) {
  auto a = ArrivalDistribution::discretized_gaussian(5.0, 2.0, 20);
  double sum = 0.0;
  for (double p : a.pmf) {
    EXPECT_GE(p, 0.0);
    sum += p;
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_GT(a.pmf[5], a.pmf[2]);
  EXPECT_GT(a.pmf[5], a.pmf[8]);
}

TEST(TransitionRow, DeterministicZeroArrivalIsPointMass) {
  auto cfg = config_with(ArrivalDistribution::deterministic(0, 6));
  for (int s = 0; s <= 6; ++s)
    for (int Q = 0; Q <= s; ++Q) {
      auto row = transition_row(cfg, s, Q);
      for (int t = 0; t <= 6; ++t) EXPECT_EQ(row[t], t == s - Q ? 1.0 : 0.0);
    }
}

TEST(TransitionRow, FullArrivalSaturates) {
  auto cfg = config_with(ArrivalDistribution::deterministic(6, 6));
  for (int s = 0; s <= 6; ++s) {
    auto row = transition_row(cfg, s, s);
    EXPECT_EQ(row[6], 1.0);
  }
}

TEST(TransitionRow, PoissonMatchesDirectSummation) {
  auto cfg = config_with(ArrivalDistribution::poisson(1.0, 5));
  auto row = transition_row(cfg, 3, 1);
  auto oracle = poisson_row_oracle(1.0, 5, 3, 1);
  for (int t = 0; t <= 5; ++t) EXPECT_NEAR(row[t], oracle[t], 1e-12) << "t=" << t;
}

TEST(TransitionMatrix, RowsAreStochasticForEveryAction) {
  for (double rate : {0.3, 1.0, 4.0}) {
    auto cfg = config_with(ArrivalDistribution::poisson(rate, 8));
    for (int Q = 0; Q <= 8; ++Q) {
      auto P = transition_matrix(cfg, Q);
      for (int s = 0; s <= 8; ++s) {
        ASSERT_EQ(P.valid(s), s >= Q);
        if (!P.valid(s)) continue;
        double sum = 0.0;
        for (double v : P.rows[s]) {
          EXPECT_GE(v, 0.0);
          sum += v;
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
      }
    }
  }
}

TEST(TransitionMatrix, RejectsDispatchAboveCapacity) {
  auto cfg = config_with(ArrivalDistribution::poisson(1.0, 4));
  EXPECT_THROW(transition_matrix(cfg, 5), Error);
  EXPECT_THROW(transition_matrix(cfg, -1), Error);
}

TEST(StepBattery, Examples) {
  EXPECT_EQ(step_battery(5, 5, 0, 5), 0);
  EXPECT_EQ(step_battery(3, 1, 10, 5), 5);
  EXPECT_EQ(step_battery(4, 2, 1, 5), 3);
  EXPECT_THROW(step_battery(2, 3, 0, 5), Error);
}

TEST(StepBattery, EmpiricalFrequenciesMatchMatrix) {
  auto cfg = config_with(ArrivalDistribution::poisson(1.3, 6));
  const int s = 4, Q = 2;
  const long n = 1'000'000;
  Rng rng(2024);
  std::vector<long> counts(7, 0);
  for (long k = 0; k < n; ++k) ++counts[step_battery(s, Q, sample_discrete(cfg.arrival.pmf, rng), 6)];
  auto row = transition_row(cfg, s, Q);
  for (int t = 0; t <= 6; ++t) {
    double p = row[t];
    double se = std::sqrt(std::max(p * (1 - p), 1e-12) / n);
    EXPECT_NEAR(static_cast<double>(counts[t]) / n, p, 3 * se + 1e-12) << "t=" << t;
  }
}

TEST(PowerBudget, Examples) {
  EnergyConfig cfg;
  cfg.packet_volume = 2.5e-3;
  cfg.slot_duration = 5e-3;
  EXPECT_EQ(packets_to_power_budget(0, cfg), 0.0);
  EXPECT_DOUBLE_EQ(packets_to_power_budget(2, cfg), 1.0);
  cfg.transfer_loss_fraction = 0.1;
  EXPECT_DOUBLE_EQ(packets_to_power_budget(2, cfg), 0.9);
}

TEST(EnergyConfig, Validation) {
  EnergyConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.capacity = 10;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = EnergyConfig{};
  cfg.transfer_loss_fraction = 1.0;
  EXPECT_THROW(cfg.validate(), Error);
}
