#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "twotier/geometry.hpp"

using namespace twotier;

namespace {

// Sample mean of d^-alpha for a user uniform in a disk of radius r centred R from the transmitter.
// Users closer than 1 m contribute zero when R == 0.
double mc_inv_d_alpha(double R, double r, double alpha, long samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double acc = 0.0;
  for (long k = 0; k < samples; ++k) {
    double rad = r * std::sqrt(u(rng));
    double th = 2.0 * std::numbers::pi * u(rng);
    double x = R + rad * std::cos(th), y = rad * std::sin(th);
    double d = std::hypot(x, y);
    if (R < r && d < 1.0) continue;
    acc += std::pow(d, -alpha);
  }
  return acc / samples;
}

}  // namespace

TEST(ExpectedInvD4, ClosedFormValues) {
  EXPECT_EQ(expected_inv_d4(2.0, 1.0), 1.0 / 9.0);
  EXPECT_EQ(expected_inv_d4(0.0, 2.0), 0.1875);
  EXPECT_DOUBLE_EQ(expected_inv_d4(500.0, 20.0), 1.0 / std::pow(500.0 * 500.0 - 400.0, 2));
}

TEST(ExpectedInvD4, MatchesMonteCarloOutsideDisk) {
  const double mc = mc_inv_d_alpha(3.0, 1.0, 4.0, 10'000'000, 11);
  EXPECT_NEAR(mc, expected_inv_d4(3.0, 1.0), 0.01 * expected_inv_d4(3.0, 1.0));
}

TEST(ExpectedInvD4, MatchesMonteCarloCoLocated) {
  const double mc = mc_inv_d_alpha(0.0, 2.0, 4.0, 10'000'000, 12);
  EXPECT_NEAR(mc, 0.1875, 0.01 * 0.1875);
}

TEST(ExpectedInvD4, RejectsCircumferenceAndBadInput) {
  EXPECT_THROW(expected_inv_d4(1.0, 1.0), Error);
  EXPECT_THROW(expected_inv_d4(-1.0, 1.0), Error);
  EXPECT_THROW(expected_inv_d4(0.0, 0.5), Error);
  EXPECT_THROW(expected_inv_d4(2.0, 0.0), Error);
}

TEST(ExpectedInvD4, StrictlyDecreasingBeyondDisk) {
  for (double r : {1.0, 5.0, 20.0}) {
    double prev = expected_inv_d4(r * 1.01, r);
    for (double R = r * 1.02; R < r * 50.0; R *= 1.07) {
      double v = expected_inv_d4(R, r);
      EXPECT_LT(v, prev) << "R=" << R << " r=" << r;
      prev = v;
    }
  }
}

TEST(ExpectedInvDAlpha, AgreesWithClosedFormAtAlpha4) {
  EXPECT_NEAR(expected_inv_d_alpha(2.0, 1.0, 4.0).value, 1.0 / 9.0, 1e-6);
  EXPECT_NEAR(expected_inv_d_alpha(0.0, 2.0, 4.0).value, 0.1875, 1e-6);
  for (double R : {1.5, 3.0, 10.0, 60.0}) {
    double exact = expected_inv_d4(R, 1.0);
    EXPECT_NEAR(expected_inv_d_alpha(R, 1.0, 4.0).value, exact, 1e-6 * std::max(1.0, exact)) << "R=" << R;
  }
}

TEST(ExpectedInvDAlpha, Alpha3MatchesMonteCarlo) {
  const double q = expected_inv_d_alpha(2.0, 1.0, 3.0).value;
  const double mc = mc_inv_d_alpha(2.0, 1.0, 3.0, 10'000'000, 13);
  EXPECT_NEAR(q, mc, 0.01 * mc);
}

TEST(ExpectedInvDAlpha, TransmitterInsideDiskSkipsNearUsers) {
  const double q = expected_inv_d_alpha(3.0, 10.0, 3.0).value;
  const double mc = mc_inv_d_alpha(3.0, 10.0, 3.0, 10'000'000, 14);
  EXPECT_NEAR(q, mc, 0.01 * mc);
  EXPECT_NO_THROW(expected_inv_d_alpha(0.5, 10.0, 2.5));
}

TEST(ExpectedInvDAlpha, ReportsErrorEstimate) {
  auto r = expected_inv_d_alpha(5.0, 2.0, 3.5);
  EXPECT_GE(r.error_estimate, 0.0);
  EXPECT_LE(r.error_estimate, 1e-8 * r.value + 1e-10);
}

TEST(ExpectedInvDAlpha, RejectsAlphaAtMostTwo) {
  EXPECT_THROW(expected_inv_d_alpha(2.0, 1.0, 2.0), Error);
  EXPECT_THROW(expected_inv_d_alpha(1.0, 1.0, 4.0), Error);
}

TEST(GainTable, SingleSbsEntry) {
  Topology t;
  t.sbs_positions = {{500.0, 0.0}};
  GainTable g = build_gain_table(t);
  EXPECT_DOUBLE_EQ(g(1, 0), 1.0 / std::pow(500.0 * 500.0 - 20.0 * 20.0, 2));
  EXPECT_DOUBLE_EQ(g(1, 1), expected_inv_d4(0.0, 20.0));
}

TEST(GainTable, ScalesLinearlyWithRayleighMeanSquare) {
  Topology t;
  t.sbs_positions = {{300.0, 0.0}, {-200.0, 400.0}};
  GainTable a = build_gain_table(t);
  t.rayleigh_mean_sq = 2.0;
  GainTable b = build_gain_table(t);
  for (int i = 0; i < a.size(); ++i)
    for (int j = 0; j < a.size(); ++j) EXPECT_DOUBLE_EQ(b(i, j), 2.0 * a(i, j));
}

TEST(GainTable, SbsRowsMatchMonteCarlo) {
  Topology t;
  t.sbs_positions = {{300.0, 0.0}, {330.0, 40.0}, {-150.0, 260.0}};
  GainTable g = build_gain_table(t);
  for (int i = 1; i <= 3; ++i)
    for (int j = 0; j <= 3; ++j) {
      double R = i == j ? 0.0 : distance(t.position(i), t.position(j));
      double mc = mc_inv_d_alpha(R, t.user_radius(i), 4.0, 2'000'000, 100 + 10 * i + j);
      EXPECT_NEAR(g(i, j), mc, 0.01 * mc) << "entry (" << i << "," << j << ")";
    }
}

TEST(GainTable, PermutationEquivariant) {
  Topology t = generate_topology(5, 1000.0, 20.0, 3);
  GainTable g = build_gain_table(t);
  std::vector<int> perm{3, 0, 4, 1, 2};
  Topology u = t;
  for (int k = 0; k < 5; ++k) u.sbs_positions[k] = t.sbs_positions[perm[k]];
  GainTable h = build_gain_table(u);
  auto idx = [&](int a) { return a == 0 ? 0 : perm[a - 1] + 1; };
  for (int i = 0; i <= 5; ++i)
    for (int j = 0; j <= 5; ++j) EXPECT_DOUBLE_EQ(h(i, j), g(idx(i), idx(j)));
}

TEST(GainTable, NonIntegerExponentUsesQuadrature) {
  Topology t;
  t.sbs_positions = {{400.0, 0.0}};
  t.pathloss_exponent = 3.0;
  GainTable g = build_gain_table(t);
  EXPECT_NEAR(g(1, 0), expected_inv_d_alpha(400.0, 20.0, 3.0).value, 1e-18);
  EXPECT_GT(g(1, 1), g(1, 0));
}

TEST(GenerateTopology, EmptyNetwork) {
  Topology t = generate_topology(0, 1000.0, 20.0, 1);
  EXPECT_EQ(t.num_sbs(), 0);
  GainTable g = build_gain_table(t);
  EXPECT_EQ(g.size(), 1);
}

TEST(GenerateTopology, DeterministicPerSeed) {
  Topology a = generate_topology(20, 1000.0, 20.0, 42);
  Topology b = generate_topology(20, 1000.0, 20.0, 42);
  Topology c = generate_topology(20, 1000.0, 20.0, 43);
  ASSERT_EQ(a.num_sbs(), 20);
  for (int i = 0; i < 20; ++i) {
    EXPECT_EQ(a.sbs_positions[i].x, b.sbs_positions[i].x);
    EXPECT_EQ(a.sbs_positions[i].y, b.sbs_positions[i].y);
  }
  EXPECT_NE(a.sbs_positions[0].x, c.sbs_positions[0].x);
}

TEST(GenerateTopology, PositionsInsideMacroDiskAndSeparated) {
  PlacementOptions opt;
  opt.min_mbs_distance = 300.0;
  Topology t = generate_topology(60, 1000.0, 20.0, 5, opt);
  for (int i = 1; i <= 60; ++i) {
    double d = distance(t.position(i), t.mbs_position);
    EXPECT_LE(d, 1000.0);
    EXPECT_GE(d, 300.0);
    for (int j = i + 1; j <= 60; ++j) EXPECT_GE(distance(t.position(i), t.position(j)), 40.0);
  }
  EXPECT_NO_THROW(build_gain_table(t));
}

TEST(GenerateTopology, PrefixKeepsLeadingSbs) {
  Topology t = generate_topology(10, 1000.0, 20.0, 9);
  Topology p = prefix(t, 4);
  ASSERT_EQ(p.num_sbs(), 4);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(p.sbs_positions[i].x, t.sbs_positions[i].x);
  EXPECT_THROW(prefix(t, 11), Error);
}

TEST(GenerateTopology, ImpossiblePackingIsInfeasible) {
  PlacementOptions opt;
  opt.max_attempts_per_sbs = 200;
  try {
    generate_topology(50, 50.0, 20.0, 1, opt);
    FAIL() << "expected infeasible";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::infeasible);
  }
}

TEST(Topology, JsonRoundTrip) {
  Topology t = generate_topology(4, 800.0, 15.0, 2);
  nlohmann::json j = t;
  Topology u = j.get<Topology>();
  ASSERT_EQ(u.num_sbs(), 4);
  EXPECT_EQ(u.sbs_positions[2].y, t.sbs_positions[2].y);
  GainTable g = build_gain_table(t);
  nlohmann::json jg = g;
  EXPECT_EQ(jg.get<GainTable>(), g);
}

TEST(Topology, ValidationRejectsBadFields) {
  Topology t;
  t.pathloss_exponent = 2.0;
  EXPECT_THROW(t.validate(), Error);
  t = Topology{};
  t.sbs_coverage_radius = 0.5;
  EXPECT_THROW(t.validate(), Error);
  t = Topology{};
  t.sbs_positions = {{2000.0, 0.0}};
  EXPECT_THROW(t.validate(), Error);
}
