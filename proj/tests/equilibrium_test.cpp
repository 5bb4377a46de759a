#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dyadlab/equilibrium.hpp"

using namespace dyadlab;

namespace {

Game st(Points s, Points t) { return Game{10, s, t, 5}; }

// Independent reference: the continuous flow x' = x(1-x)(pi_C - pi_D) with
// payoffs written out from the table, integrated by classical RK4.
double flow_limit(const Game& g, double x0, double horizon = 400.0, double h = 1e-3) {
  auto f = [&](double x) {
    const double pc = x * g.R + (1 - x) * g.S;
    const double pd = x * g.T + (1 - x) * g.P;
    return x * (1 - x) * (pc - pd);
  };
  double x = x0;
  for (double t = 0; t < horizon; t += h) {
    const double k1 = f(x), k2 = f(x + h / 2 * k1), k3 = f(x + h / 2 * k2), k4 = f(x + h * k3);
    x += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return x;
}

bool tie_cell(const Game& g) {
  return g.S == g.P || g.T == g.R || advantage_slope(g) == 0 || g.T == 5 + g.S;
}

}  // namespace

TEST(ReplicatorStep, HandEvaluated) {
  EXPECT_DOUBLE_EQ(replicator_step(0.5, st(8, 12)), 0.625);
  EXPECT_EQ(replicator_step(0.0, st(8, 12)), 0.0);
  EXPECT_EQ(replicator_step(1.0, st(8, 12)), 1.0);
}

TEST(ReplicatorStep, ClampedToUnitInterval) {
  for (const Game& g : build_grid(GridSpec::extended()))
    for (double x : {0.0, 0.1, 0.37, 0.5, 0.9, 1.0}) {
      const double y = replicator_step(x, g);
      EXPECT_GE(y, 0.0);
      EXPECT_LE(y, 1.0);
    }
}

TEST(SimulateReplicator, QuadrantExamples) {
  const auto mixed = simulate_replicator(st(8, 12));
  EXPECT_EQ(mixed.outcome, EquilibriumOutcome::MixedEquilibrium);
  EXPECT_NEAR(mixed.terminal_x, 0.6, 0.1);

  const auto pd = simulate_replicator(st(2, 12));
  EXPECT_EQ(pd.outcome, EquilibriumOutcome::TotalDefection);
  EXPECT_EQ(pd.terminal_x, 0.0);

  const auto harmony = simulate_replicator(st(8, 7));
  EXPECT_EQ(harmony.outcome, EquilibriumOutcome::TotalCooperation);
  EXPECT_EQ(harmony.terminal_x, 1.0);
}

TEST(SimulateReplicator, TightToleranceReachesFixedPoint) {
  ReplicatorParams p;
  p.tol = 1e-6;
  p.t_max = 100000;
  const auto r = simulate_replicator(st(8, 12), p);
  EXPECT_EQ(r.outcome, EquilibriumOutcome::MixedEquilibrium);
  EXPECT_NEAR(r.terminal_x, 0.6, 1e-5);
}

TEST(SimulateReplicator, LiteralMapIsAvailable) {
  ReplicatorParams p;
  p.integrator = Integrator::ForwardEuler;
  const auto r = simulate_replicator(st(2, 12), p);
  EXPECT_EQ(r.outcome, EquilibriumOutcome::TotalDefection);
  EXPECT_EQ(r.steps, 1u);  // 0.5 + 0.25 * (-2.5) < 0, clamped
  p.integrator = Integrator::StableSubstep;
  EXPECT_EQ(simulate_replicator(st(2, 12), p).outcome, EquilibriumOutcome::TotalDefection);
}

TEST(SimulateReplicator, MatchesContinuousFlowOffTies) {
  for (const Game& g : build_grid(GridSpec::extended())) {
    if (tie_cell(g)) continue;
    ReplicatorParams p;
    p.tol = 1e-4;
    p.t_max = 100000;
    const auto r = simulate_replicator(g, p);
    const double ref = flow_limit(g, 0.5);
    EXPECT_NEAR(r.terminal_x, ref, 2e-3) << describe_cell(g.S, g.T) << " " << to_string(r.outcome);
  }
}

TEST(SimulateReplicator, DefaultToleranceExceptionsAreTheNearBoundaryMixedCells) {
  // With tol = 0.1 a mixed equilibrium above 0.9 is reported as full
  // cooperation; on the extended grid that happens for S = 16..20, T = 11.
  std::vector<std::pair<Points, Points>> off;
  for (const Game& g : build_grid(GridSpec::extended())) {
    if (tie_cell(g)) continue;
    if (std::abs(simulate_replicator(g).terminal_x - nash_cooperation(g)) > 0.05) off.push_back({g.S, g.T});
  }
  const std::vector<std::pair<Points, Points>> expected{{16, 11}, {17, 11}, {18, 11}, {19, 11}, {20, 11}};
  EXPECT_EQ(off, expected);
  for (auto [s, t] : expected) EXPECT_GT(*interior_fixed_point(st(s, t)), 0.9);
}

TEST(SimulateReplicator, ParamsValidated) {
  ReplicatorParams p;
  p.x0 = 1.5;
  EXPECT_THROW(simulate_replicator(st(1, 1), p), Error);
  p = {};
  p.tol = 0;
  EXPECT_THROW(simulate_replicator(st(1, 1), p), Error);
}

TEST(InteriorFixedPoint, Examples) {
  EXPECT_DOUBLE_EQ(*interior_fixed_point(st(8, 12)), 0.6);
  EXPECT_DOUBLE_EQ(*interior_fixed_point(st(2, 7)), 0.5);
  EXPECT_FALSE(interior_fixed_point(st(8, 7)).has_value());
}

TEST(InteriorFixedPoint, ExistsExactlyInOffDiagonalQuadrants) {
  std::size_t mismatches = 0;
  for (const Game& g : build_grid(GridSpec::extended())) {
    const bool expected = (g.S < 5 && g.T < 10) || (g.S > 5 && g.T > 10);
    const auto x = interior_fixed_point(g);
    if (x.has_value() != expected) ++mismatches;
    if (x) {
      EXPECT_GT(*x, 0.0);
      EXPECT_LT(*x, 1.0);
      EXPECT_NEAR(cooperation_advantage(*x, g), 0.0, 1e-12);
    }
  }
  EXPECT_EQ(mismatches, 0u);
}

TEST(ClassifyStability, Examples) {
  EXPECT_EQ(classify_stability(st(2, 12)).kind, StabilityKind::DefectionDominant);
  const auto sh = classify_stability(st(2, 7));
  EXPECT_EQ(sh.kind, StabilityKind::Bistable);
  EXPECT_DOUBLE_EQ(*sh.interior_x, 0.5);
  const auto sd = classify_stability(st(8, 12));
  EXPECT_EQ(sd.kind, StabilityKind::MixedStable);
  EXPECT_DOUBLE_EQ(*sd.interior_x, 0.6);
  EXPECT_EQ(classify_stability(st(8, 7)).kind, StabilityKind::CooperationDominant);
  EXPECT_EQ(classify_stability(st(5, 10)).kind, StabilityKind::Neutral);
}

// Linearization at the endpoints: x = 0 attracts iff g(0) < 0, x = 1 iff g(1) > 0.
TEST(ClassifyStability, AgreesWithEndpointDerivatives) {
  for (const Game& g : build_grid(GridSpec::extended())) {
    const double g0 = cooperation_advantage(0.0, g), g1 = cooperation_advantage(1.0, g);
    if (g0 == 0 || g1 == 0) continue;
    const bool zero_stable = g0 < 0, one_stable = g1 > 0;
    const auto k = classify_stability(g).kind;
    if (zero_stable && one_stable) EXPECT_EQ(k, StabilityKind::Bistable);
    else if (zero_stable) EXPECT_EQ(k, StabilityKind::DefectionDominant);
    else if (one_stable) EXPECT_EQ(k, StabilityKind::CooperationDominant);
    else EXPECT_EQ(k, StabilityKind::MixedStable);
  }
}

TEST(NashCooperation, BasinRule) {
  EXPECT_EQ(nash_cooperation(st(2, 6)), 1.0);
  EXPECT_EQ(nash_cooperation(st(2, 8)), 0.0);
  EXPECT_EQ(nash_cooperation(st(2, 7)), 0.5);
  for (Points s = 0; s < 5; ++s)
    for (Points t = 5; t < 10; ++t) {
      const double expected = t < 5 + s ? 1.0 : (t == 5 + s ? 0.5 : 0.0);
      EXPECT_EQ(nash_cooperation(st(s, t)), expected) << describe_cell(s, t);
    }
}

TEST(NashCooperation, TieRules) {
  EXPECT_EQ(nash_cooperation(st(5, 12)), 0.0);  // S = P, T > R
  EXPECT_EQ(nash_cooperation(st(7, 10)), 1.0);  // T = R, S > P
  EXPECT_EQ(nash_cooperation(st(8, 7)), 1.0);   // D = 0, S > P
  EXPECT_EQ(nash_cooperation(st(2, 13)), 0.0);  // D = 0, S < P
  EXPECT_EQ(nash_cooperation(st(5, 10)), 0.5);  // D = 0, S = P
}

TEST(NashCooperation, StartingShareMovesBasin) {
  EXPECT_EQ(nash_cooperation(st(2, 7), 0.6), 1.0);
  EXPECT_EQ(nash_cooperation(st(2, 7), 0.4), 0.0);
  EXPECT_THROW(nash_cooperation(st(2, 7), -0.1), Error);
}

TEST(NashMatrix, OriginalRegionAverage) {
  const auto m = nash_matrix(GridSpec::original());
  double sum = 0;
  for (double v : m.matrix.cells()) sum += v;
  EXPECT_NEAR(sum / 121.0, 0.5, 1e-12);
}

TEST(NashMatrix, ReplicatorMethodFlagsNothingOnOriginalGrid) {
  const auto m = nash_matrix(GridSpec::original(), NashMethod::Replicator);
  EXPECT_TRUE(m.flagged.empty());
  EXPECT_EQ(m.matrix.size(), 121u);
}

TEST(SubstepIntegrator, MonotoneFromRandomStarts) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  const auto games = build_grid(GridSpec::extended());
  for (int k = 0; k < 2000; ++k) {
    const Game& g = games[rng() % games.size()];
    const double x = u(rng);
    ReplicatorParams p;
    const double y = detail::advance(x, g, p, detail::substeps_for(g, p.dt));
    const double adv = cooperation_advantage(x, g);
    if (adv > 0) {
      EXPECT_GE(y, x);
    }
    if (adv < 0) {
      EXPECT_LE(y, x);
    }
    if (const auto star = interior_fixed_point(g)) {
      // Never jumps across the interior fixed point.
      EXPECT_EQ(x < *star, y <= *star + 1e-12) << describe_cell(g.S, g.T) << " x=" << x;
    }
  }
}
