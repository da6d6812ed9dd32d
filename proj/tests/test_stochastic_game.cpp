#include <gtest/gtest.h>

#include <random>

#include <Eigen/Dense>

#include "test_support.hpp"
#include "twotier/stochastic_game.hpp"

using namespace twotier;

namespace {

std::vector<int> level_sizes(const PayoffTables& t) { return std::vector<int>(t.num_states(), t.num_power_levels()); }

std::vector<int> action_sizes(const PayoffTables& t) {
  std::vector<int> out;
  for (int s = 0; s < t.num_states(); ++s) out.push_back(t.num_actions(s));
  return out;
}

// Value of a fixed pure CES policy by solving (I - βP)φ = r directly.
Eigen::VectorXd policy_value(const std::vector<int>& pol, const StateStrategy& m, const PayoffTables& t,
                             const GameConfig& cfg) {
  const int n = t.num_states();
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
  for (int s = 0; s < n; ++s) {
    for (int p = 0; p < t.num_power_levels(); ++p) r[s] += m[s][p] * t.r1(s, p, pol[s]);
    auto row = transition_row(cfg.energy, s, pol[s]);
    for (int k = 0; k < n; ++k) A(s, k) -= cfg.discount * row[k];
  }
  return A.fullPivLu().solve(r);
}

// Matching-pennies structure at the full state: no pure equilibrium exists.
std::pair<PayoffTables, GameConfig> pennies_game() {
  GameConfig cfg = twotier::testing::game_with(GainTable::uniform(1, 1.0, 0.1), 1, 1e-6);
  cfg.energy.arrival = ArrivalDistribution::deterministic(1, 1);
  std::vector<PayoffTables::Cell> cells(4);
  auto set = [&](int q, int p, double mbs, double ces) {
    cells[q * 2 + p].mbs = mbs;
    cells[q * 2 + p].ces = ces;
  };
  set(0, 0, -1.0, 0.0);
  set(0, 1, 0.0, -1.0);
  set(1, 0, 0.0, -1.0);
  set(1, 1, -1.0, 0.0);
  return {PayoffTables(1, 1, cfg.mbs_power_levels, cells), cfg};
}

}  // namespace

TEST(CesBestResponse, NearZeroDiscountIsMyopic) {
  GameConfig cfg = twotier::testing::desk_game(3, 6);
  cfg.discount = 1e-9;
  PayoffTables t = build_payoff_tables(cfg);
  std::vector<int> mchoice{0, 1, 0, 1, 1, 0, 1};
  StateStrategy m = pure_strategy(mchoice, level_sizes(t));
  CesResponse br = ces_best_response(m, t, cfg);
  for (int s = 0; s < t.num_states(); ++s) {
    int arg = 0;
    for (int q = 1; q < t.num_actions(s); ++q)
      if (t.r1(s, mchoice[s], q) > t.r1(s, mchoice[s], arg)) arg = q;
    EXPECT_EQ(pure_choice(br.n)[s], arg) << "s=" << s;
  }
}

TEST(CesBestResponse, MatchesPolicyEnumeration) {
  GameConfig cfg = twotier::testing::desk_game(2, 2);
  PayoffTables t = build_payoff_tables(cfg);
  for (int mi = 0; mi < 8; ++mi) {
    std::vector<int> mchoice{mi & 1, (mi >> 1) & 1, (mi >> 2) & 1};
    StateStrategy m = pure_strategy(mchoice, level_sizes(t));
    CesResponse br = ces_best_response(m, t, cfg);
    double best = -INFINITY;
    Eigen::VectorXd best_v;
    for (int a1 = 0; a1 < t.num_actions(1); ++a1)
      for (int a2 = 0; a2 < t.num_actions(2); ++a2) {
        Eigen::VectorXd v = policy_value({0, a1, a2}, m, t, cfg);
        double score = v.sum();
        if (score > best + 1e-12) {
          best = score;
          best_v = v;
        }
      }
    for (int s = 0; s < 3; ++s) EXPECT_NEAR(br.values[s], best_v[s], 1e-9) << "m=" << mi << " s=" << s;
    EXPECT_LE(br.bellman_residual, 1e-9);
  }
}

TEST(CesBestResponse, OccupancyRecoversPolicy) {
  GameConfig cfg = twotier::testing::desk_game(3, 6);
  PayoffTables t = build_payoff_tables(cfg);
  StateStrategy m = pure_strategy(std::vector<int>(7, 1), level_sizes(t));
  CesResponse br = ces_best_response(m, t, cfg);
  for (int s = 0; s < 7; ++s) {
    double total = 0.0;
    for (double x : br.occupancy[s]) total += x;
    if (total <= 0.0) continue;
    for (int q = 0; q < t.num_actions(s); ++q) EXPECT_NEAR(br.occupancy[s][q] / total, br.n[s][q], 1e-12);
  }
}

TEST(MbsBestResponse, ZeroDispatchPicksNoiseTargetPower) {
  GameConfig cfg = twotier::testing::desk_game(3, 4);
  double target = cfg.target_sinr_mbs * cfg.noise / cfg.gains(0, 0);
  cfg.mbs_power_levels = {target, 2 * target};
  PayoffTables t = build_payoff_tables(cfg);
  std::vector<int> zeros(5, 0);
  StateStrategy n = pure_strategy(zeros, action_sizes(t));
  StateStrategy m = mbs_best_response(n, t, cfg);
  for (int s = 0; s < 5; ++s) {
    EXPECT_EQ(pure_choice(m)[s], 0);
    EXPECT_NEAR(t.r0(s, 0, 0), 0.0, 1e-12);
  }
}

TEST(MbsBestResponse, SymmetricGainsPickNearestToVertex) {
  GameConfig cfg = twotier::testing::desk_game(3, 5);
  for (int j = 1; j <= 3; ++j) cfg.gains(0, j) = 3e-12;
  cfg.gains(0, 0) = 1e-9;
  cfg.noise = 1e-8;
  cfg.energy.packet_volume = 5e-3 * 1e-1;  // 0.1 W per packet
  cfg.sbs_max_power = 1.0;
  cfg.mbs_power_levels = {0.05, 0.1, 0.15, 0.2, 0.3};
  PayoffTables t = build_payoff_tables(cfg);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    StateStrategy n(t.num_states());
    for (int s = 0; s < t.num_states(); ++s) {
      n[s].resize(t.num_actions(s));
      double tot = 0.0;
      for (double& v : n[s]) tot += (v = u(rng));
      for (double& v : n[s]) v /= tot;
    }
    StateStrategy m = mbs_best_response(n, t, cfg);
    for (int s = 0; s < t.num_states(); ++s) {
      double vertex = 0.0;
      for (int q = 0; q < t.num_actions(s); ++q)
        vertex += (packets_to_power_budget(q, cfg.energy) * 3e-12 + cfg.noise) * n[s][q];
      vertex *= cfg.target_sinr_mbs / cfg.gains(0, 0);
      int nearest = 0;
      for (int p = 1; p < 5; ++p)
        if (std::abs(cfg.mbs_power_levels[p] - vertex) < std::abs(cfg.mbs_power_levels[nearest] - vertex)) nearest = p;
      EXPECT_EQ(pure_choice(m)[s], nearest) << "trial " << trial << " s=" << s << " vertex=" << vertex;
    }
  }
}

TEST(MbsBestResponse, MatchesPerStateBruteForce) {
  GameConfig cfg = twotier::testing::desk_game(2, 3);
  PayoffTables t = build_payoff_tables(cfg);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  StateStrategy n(4);
  for (int s = 0; s < 4; ++s) {
    n[s].resize(t.num_actions(s));
    double tot = 0.0;
    for (double& v : n[s]) tot += (v = u(rng));
    for (double& v : n[s]) v /= tot;
  }
  auto m = pure_choice(mbs_best_response(n, t, cfg));
  for (int s = 0; s < 4; ++s) {
    double a = 0.0, b = 0.0;
    for (int q = 0; q < t.num_actions(s); ++q) {
      a += n[s][q] * utility_mbs(cfg.mbs_power_levels[0], q, cfg);
      b += n[s][q] * utility_mbs(cfg.mbs_power_levels[1], q, cfg);
    }
    EXPECT_EQ(m[s], b > a ? 1 : 0) << "s=" << s;
  }
}

TEST(EquilibriumGap, ZeroAtEquilibriumNegativeAfterPerturbation) {
  GameConfig cfg = twotier::testing::desk_game(3, 6);
  PayoffTables t = build_payoff_tables(cfg);
  EquilibriumSolution sol = solve_equilibrium(t, cfg);
  EXPECT_LE(std::abs(equilibrium_gap(sol, t, cfg)), 1e-6);

  // Move 0.1 mass at the initial state, where the MBS strictly prefers its choice.
  const int s = t.num_states() - 1;
  StateStrategy m = sol.strategies.m;
  int chosen = pure_choice(m)[s];
  m[s][chosen] = 0.9;
  m[s][1 - chosen] = 0.1;
  EquilibriumSolution perturbed = complete_candidate(m, t, cfg);
  EXPECT_LT(perturbed.gap, -1e-6);
}

TEST(EquilibriumGap, RejectsInfeasibleCandidatesNamingConstraint) {
  GameConfig cfg = twotier::testing::desk_game(3, 4);
  PayoffTables t = build_payoff_tables(cfg);
  EquilibriumSolution sol = solve_equilibrium(t, cfg);
  auto bad = sol;
  bad.occupancy[4][0] += 0.5;
  try {
    equilibrium_gap(bad, t, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("x'H = pi'"), std::string::npos) << e.what();
  }
  bad = sol;
  bad.ces_values[2] -= 1.0;
  try {
    equilibrium_gap(bad, t, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("H phi1 >= R1' m"), std::string::npos) << e.what();
  }
  bad = sol;
  bad.strategies.m[0] = {0.7, 0.7};
  EXPECT_THROW(equilibrium_gap(bad, t, cfg), Error);
}

TEST(SolveEquilibrium, SingleStateGameIsBimatrixArgmax) {
  GameConfig cfg = twotier::testing::desk_game(2, 0);
  PayoffTables t = build_payoff_tables(cfg);
  EquilibriumSolution sol = solve_equilibrium(t, cfg);
  int expected = t.r0(0, 1, 0) > t.r0(0, 0, 0) ? 1 : 0;
  EXPECT_EQ(pure_choice(sol.strategies.m)[0], expected);
  EXPECT_LE(std::abs(sol.gap), 1e-6);
  EXPECT_NEAR(sol.ces_values[0], t.r1(0, expected, 0) / (1 - cfg.discount), 1e-9);
}

TEST(SolveEquilibrium, DominantZeroPairInSingleStateGame) {
  GameConfig cfg = twotier::testing::desk_game(2, 0);
  cfg.target_sinr_sbs = 0.0;
  double target = cfg.target_sinr_mbs * cfg.noise / cfg.gains(0, 0);
  cfg.mbs_power_levels = {target / 2, target, 2 * target};
  PayoffTables t = build_payoff_tables(cfg);
  EquilibriumSolution sol = solve_equilibrium(t, cfg);
  EXPECT_EQ(pure_choice(sol.strategies.m)[0], 1);
  EXPECT_NEAR(sol.gap, 0.0, 1e-12);
}

TEST(SolveEquilibrium, EnumerateCertificates) {
  GameConfig cfg = twotier::testing::desk_game(3, 6);
  PayoffTables t = build_payoff_tables(cfg);
  EquilibriumSolution sol = solve_equilibrium(t, cfg);
  EXPECT_LE(std::abs(sol.gap), 1e-6);
  EXPECT_LE(sol.bellman_residual, 1e-9);
  EXPECT_LE(max_mbs_deviation_gain(sol, t, cfg), 1e-6);
  double rmin = 0.0;
  for (int p = 0; p < 2; ++p)
    for (int q = 0; q <= t.max_dispatch(); ++q) rmin = std::min(rmin, t.r1(6, p, q));
  for (double v : sol.ces_values) {
    EXPECT_LE(v, 1e-12);
    EXPECT_GE(v, rmin / (1 - cfg.discount) - 1e-9);
  }
  // x'H = π'
  auto pi = cfg.initial_distribution();
  for (int sp = 0; sp < 7; ++sp) {
    double lhs = 0.0;
    for (int s = 0; s < 7; ++s)
      for (int q = 0; q < t.num_actions(s); ++q)
        lhs += sol.occupancy[s][q] * ((s == sp) - cfg.discount * transition_row(cfg.energy, s, q)[sp]);
    EXPECT_NEAR(lhs, pi[sp], 1e-8);
  }
  auto all = enumerate_pure_equilibria(t, cfg);
  ASSERT_FALSE(all.empty());
  for (const auto& e : all) EXPECT_GE(sol.ces_objective, e.ces_objective - 1e-12);
}

TEST(SolveEquilibrium, TiesResolveToLexicographicallySmallest) {
  GameConfig cfg = twotier::testing::desk_game(3, 6);
  PayoffTables t = build_payoff_tables(cfg);
  auto all = enumerate_pure_equilibria(t, cfg);
  EquilibriumSolution sol = solve_equilibrium(t, cfg);
  double best = -INFINITY;
  for (const auto& e : all) best = std::max(best, e.ces_objective);
  for (const auto& e : all)
    if (e.ces_objective >= best - 1e-12 * (1 + std::abs(best))) {
      EXPECT_EQ(pure_choice(sol.strategies.m), e.m);
      break;
    }
}

TEST(SolveEquilibrium, BudgetIsEnforced) {
  GameConfig cfg = twotier::testing::desk_game(2, 6);
  PayoffTables t = build_payoff_tables(cfg);
  SolveOptions opt;
  opt.enumerate_budget = 100;
  try {
    solve_equilibrium(t, cfg, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::budget);
  }
}

TEST(SolveEquilibrium, EnumerateAndBestResponseIterationAgree) {
  GameConfig cfg = twotier::testing::desk_game(2, 3);
  PayoffTables t = build_payoff_tables(cfg);
  EquilibriumSolution a = solve_equilibrium(t, cfg);
  int converged = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SolveOptions opt;
    opt.mode = SolveMode::best_response_iteration;
    opt.seed = seed;
    try {
      EquilibriumSolution b = solve_equilibrium(t, cfg, opt);
      ++converged;
      EXPECT_LE(std::abs(b.gap), 1e-6);
      EXPECT_NEAR(a.ces_objective, b.ces_objective, 1e-6) << "seed " << seed;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::no_equilibrium);
    }
  }
  EXPECT_GT(converged, 0);
}

TEST(SolveEquilibrium, IncrementalReturnsCertifiedEquilibrium) {
  GameConfig cfg = twotier::testing::desk_game(3, 6);
  PayoffTables t = build_payoff_tables(cfg);
  SolveOptions opt;
  opt.mode = SolveMode::incremental;
  EquilibriumSolution sol = solve_equilibrium(t, cfg, opt);
  EXPECT_LE(std::abs(sol.gap), 1e-6);
  EXPECT_LE(max_mbs_deviation_gain(sol, t, cfg), 1e-6);
  EquilibriumSolution ref = solve_equilibrium(t, cfg);
  EXPECT_LE(sol.ces_objective, ref.ces_objective + 1e-9);
}

TEST(SolveEquilibrium, NoPureEquilibriumIsReported) {
  auto [t, cfg] = pennies_game();
  EXPECT_EQ(enumerate_pure_equilibria(t, cfg).size(), 0u);
  try {
    solve_equilibrium(t, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::no_equilibrium);
  }
  SolveOptions opt;
  opt.mode = SolveMode::best_response_iteration;
  try {
    solve_equilibrium(t, cfg, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::no_equilibrium);
    EXPECT_NE(std::string(e.what()).find("cycle"), std::string::npos);
  }
}

TEST(SolveMode, Parsing) {
  EXPECT_EQ(parse_mode("enumerate"), SolveMode::enumerate);
  EXPECT_EQ(parse_mode("bri"), SolveMode::best_response_iteration);
  EXPECT_EQ(parse_mode("incremental"), SolveMode::incremental);
  EXPECT_THROW(parse_mode("lp"), Error);
}

TEST(RunPolicy, ZeroArrivalsNeverRecharge) {
  GameConfig cfg = twotier::testing::desk_game(3, 6);
  cfg.energy.arrival = ArrivalDistribution::deterministic(0, 6);
  PayoffTables t = build_payoff_tables(cfg);
  EquilibriumSolution sol = solve_equilibrium(t, cfg);
  auto traj = run_policy(sol, t, cfg, 200, 4);
  for (size_t k = 1; k < traj.size(); ++k) EXPECT_LE(traj[k].state, traj[k - 1].state);
}

TEST(RunPolicy, PureStrategiesAreFunctionsOfState) {
  GameConfig cfg = twotier::testing::desk_game(3, 6);
  PayoffTables t = build_payoff_tables(cfg);
  EquilibriumSolution sol = solve_equilibrium(t, cfg);
  auto traj = run_policy(sol, t, cfg, 2000, 5);
  std::map<int, std::pair<double, double>> seen;
  for (const auto& r : traj) {
    auto key = static_cast<int>(r.state);
    auto it = seen.find(key);
    if (it == seen.end()) seen[key] = {r.dispatch, r.p0};
    else EXPECT_EQ(it->second, std::make_pair(r.dispatch, r.p0));
  }
  auto again = run_policy(sol, t, cfg, 2000, 5);
  for (size_t k = 0; k < traj.size(); ++k) EXPECT_EQ(traj[k].state, again[k].state);
}

TEST(RunPolicy, VisitFrequenciesMatchStationaryDistribution) {
  GameConfig cfg = twotier::testing::desk_game(3, 6);
  PayoffTables t = build_payoff_tables(cfg);
  EquilibriumSolution sol = solve_equilibrium(t, cfg);
  Eigen::MatrixXd P = induced_chain(sol.strategies.n, cfg);
  Eigen::EigenSolver<Eigen::MatrixXd> es(P.transpose());
  int k = 0;
  for (int i = 1; i < es.eigenvalues().size(); ++i)
    if (std::abs(es.eigenvalues()[i] - 1.0) < std::abs(es.eigenvalues()[k] - 1.0)) k = i;
  Eigen::VectorXd st = es.eigenvectors().col(k).real();
  st /= st.sum();

  const int slots = 1'000'000, batches = 100;
  auto traj = run_policy(sol, t, cfg, slots, 6);
  std::vector<std::vector<double>> batch(7, std::vector<double>(batches, 0.0));
  for (int i = 0; i < slots; ++i) batch[static_cast<int>(traj[i].state)][i / (slots / batches)] += 1.0 / (slots / batches);
  for (int s = 0; s < 7; ++s) {
    double mean = 0.0, var = 0.0;
    for (double v : batch[s]) mean += v / batches;
    for (double v : batch[s]) var += (v - mean) * (v - mean) / (batches - 1);
    double se = std::sqrt(var / batches);
    EXPECT_NEAR(mean, st[s], 3 * se + 1e-4) << "s=" << s;
  }
}
