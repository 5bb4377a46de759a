#pragma once

// Nash cooperation rates for symmetric 2x2 games, computed two independent
// ways: iterating the replicator dynamics of the cooperator share x, and the
// closed-form fixed-point / stability analysis of
//
//   dx/dt = x (1 - x) g(x),   g(x) = pi_C(x) - pi_D(x) = D x + (S - P),
//   D = R - T - S + P.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "dyadlab/error.hpp"
#include "dyadlab/game.hpp"
#include "dyadlab/matrix.hpp"

namespace dyadlab {

namespace detail {
inline double cooperator_payoff(double x, const Game& g) { return x * g.R + (1.0 - x) * g.S; }
inline double defector_payoff(double x, const Game& g) { return x * g.T + (1.0 - x) * g.P; }
}  // namespace detail

// Payoff advantage of cooperation at cooperator share x.
inline double cooperation_advantage(double x, const Game& g) {
  return detail::cooperator_payoff(x, g) - detail::defector_payoff(x, g);
}

inline constexpr Points advantage_slope(const Game& g) { return g.R - g.T - g.S + g.P; }

// One unit-time step of the discrete replicator map, clamped to [0, 1].
inline double replicator_step(double x, const Game& g) {
  const double next = x * (1.0 - x) * cooperation_advantage(x, g) + x;
  return std::clamp(next, 0.0, 1.0);
}

enum class Integrator {
  // Each unit of time is split into sub-steps small enough that the map is
  // monotone on [0, 1]: it can neither leave the interval nor jump over x*.
  StableSubstep,
  // The literal unit-step map (replicator_step). Overshoots and oscillates for
  // large payoff spreads.
  ForwardEuler,
};

struct ReplicatorParams {
  double x0 = 0.5;
  double tol = 0.1;
  std::size_t t_max = 1000;
  double dt = 1.0;
  Integrator integrator = Integrator::StableSubstep;
};

inline void validate(const ReplicatorParams& p) {
  if (!(p.x0 >= 0.0 && p.x0 <= 1.0)) throw specification_error("x0 must lie in [0, 1]");
  if (!(p.tol > 0.0)) throw specification_error("tol must be > 0");
  if (p.t_max < 1) throw specification_error("t_max must be >= 1");
  if (!(p.dt > 0.0)) throw specification_error("dt must be > 0");
}

enum class EquilibriumOutcome {
  TotalCooperation,
  TotalDefection,
  MixedEquilibrium,
  Periodic,
  MaxIterations,
};

inline std::string_view to_string(EquilibriumOutcome o) {
  switch (o) {
    case EquilibriumOutcome::TotalCooperation: return "total-cooperation";
    case EquilibriumOutcome::TotalDefection: return "total-defection";
    case EquilibriumOutcome::MixedEquilibrium: return "mixed";
    case EquilibriumOutcome::Periodic: return "periodic";
    case EquilibriumOutcome::MaxIterations: return "max-iterations";
  }
  return "max-iterations";
}

struct EquilibriumResult {
  // Reported cooperation rate: 1 / 0 for the total outcomes, the state for a
  // mixed stop, the two-cycle mean for Periodic, the raw state otherwise.
  double terminal_x = 0.0;
  EquilibriumOutcome outcome = EquilibriumOutcome::MaxIterations;
  std::size_t steps = 0;
  double last_state = 0.0;  // x_t at the stopping step, unsnapped
  std::optional<std::pair<double, double>> periodic_pair;
};

namespace detail {

inline constexpr double kPeriodTolerance = 1e-9;

// Number of sub-steps per unit of time so that h * max|F'(x)| <= 1/2 with
// F(x) = x (1 - x) g(x). |F'| <= |1 - 2x| |g(x)| + x (1 - x) |D|.
inline std::size_t substeps_for(const Game& g, double dt) {
  const double g0 = std::abs(static_cast<double>(g.S - g.P));
  const double g1 = std::abs(static_cast<double>(g.R - g.T));
  const double lipschitz = std::max(g0, g1) + std::abs(static_cast<double>(advantage_slope(g))) / 4.0;
  const double n = std::ceil(dt * lipschitz / 0.5);
  return std::max<std::size_t>(1, static_cast<std::size_t>(n));
}

inline double advance(double x, const Game& g, const ReplicatorParams& p, std::size_t substeps) {
  if (p.integrator == Integrator::ForwardEuler) {
    if (p.dt == 1.0) return replicator_step(x, g);
    return std::clamp(x + p.dt * x * (1.0 - x) * cooperation_advantage(x, g), 0.0, 1.0);
  }
  const double h = p.dt / static_cast<double>(substeps);
  for (std::size_t i = 0; i < substeps; ++i)
    x = std::clamp(x + h * x * (1.0 - x) * cooperation_advantage(x, g), 0.0, 1.0);
  return x;
}

}  // namespace detail

// Iterates the dynamics from x0 until a stopping outcome. The mixed test runs
// first so an interior equilibrium within tol of a boundary is not mistaken
// for a total outcome.
inline EquilibriumResult simulate_replicator(const Game& game, const ReplicatorParams& params = {}) {
  validate(params);
  const std::size_t substeps = detail::substeps_for(game, params.dt);
  double prev2 = params.x0;
  double prev1 = params.x0;
  double x = params.x0;
  EquilibriumResult r;
  for (std::size_t t = 1; t <= params.t_max; ++t) {
    prev2 = prev1;
    prev1 = x;
    x = detail::advance(x, game, params, substeps);
    r.steps = t;
    r.last_state = x;
    if (x > 0.0 && x < 1.0 && std::abs(cooperation_advantage(x, game)) <= params.tol) {
      r.terminal_x = x;
      r.outcome = EquilibriumOutcome::MixedEquilibrium;
      return r;
    }
    if (x >= 1.0 - params.tol) {
      r.terminal_x = 1.0;
      r.outcome = EquilibriumOutcome::TotalCooperation;
      return r;
    }
    if (x <= params.tol) {
      r.terminal_x = 0.0;
      r.outcome = EquilibriumOutcome::TotalDefection;
      return r;
    }
    if (t >= 2 && std::abs(x - prev2) <= detail::kPeriodTolerance &&
        std::abs(x - prev1) > detail::kPeriodTolerance) {
      r.periodic_pair = std::make_pair(prev1, x);
      r.terminal_x = (prev1 + x) / 2.0;
      r.outcome = EquilibriumOutcome::Periodic;
      return r;
    }
  }
  r.terminal_x = x;
  r.outcome = EquilibriumOutcome::MaxIterations;
  return r;
}

// x* = (P - S) / D when it lies strictly inside (0, 1). Decided with integer
// sign tests; the division happens only once existence is established.
inline std::optional<double> interior_fixed_point(const Game& g) {
  const long long d = advantage_slope(g);
  const long long num = static_cast<long long>(g.P) - g.S;
  const long long one_minus = static_cast<long long>(g.R) - g.T;
  if (d == 0) return std::nullopt;
  if (num * d > 0 && one_minus * d > 0) return static_cast<double>(num) / static_cast<double>(d);
  return std::nullopt;
}

enum class StabilityKind {
  DefectionDominant,
  CooperationDominant,
  Bistable,     // both pure states stable, x* is the unstable basin boundary
  MixedStable,  // both pure states unstable, x* attracts
  Neutral,      // g == 0 everywhere (S == P and T == R)
};

inline std::string_view to_string(StabilityKind k) {
  switch (k) {
    case StabilityKind::DefectionDominant: return "defection-dominant";
    case StabilityKind::CooperationDominant: return "cooperation-dominant";
    case StabilityKind::Bistable: return "bistable";
    case StabilityKind::MixedStable: return "mixed-stable";
    case StabilityKind::Neutral: return "neutral";
  }
  return "neutral";
}

struct StabilityClass {
  StabilityKind kind = StabilityKind::Neutral;
  std::optional<double> interior_x;
};

// g is linear, so its sign on (0, 1) follows from g(0) = S - P and g(1) = R - T.
// A zero endpoint (tie) takes the sign of the other endpoint.
inline StabilityClass classify_stability(const Game& g) {
  const Points at0 = g.S - g.P;
  const Points at1 = g.R - g.T;
  if (at0 == 0 && at1 == 0) return {StabilityKind::Neutral, std::nullopt};
  if (at0 >= 0 && at1 >= 0) return {StabilityKind::CooperationDominant, std::nullopt};
  if (at0 <= 0 && at1 <= 0) return {StabilityKind::DefectionDominant, std::nullopt};
  if (at0 < 0) return {StabilityKind::Bistable, interior_fixed_point(g)};
  return {StabilityKind::MixedStable, interior_fixed_point(g)};
}

// Analytic prediction of the cooperation rate reached from x0.
inline double nash_cooperation(const Game& g, double x0 = 0.5) {
  if (!(x0 >= 0.0 && x0 <= 1.0)) throw specification_error("x0 must lie in [0, 1]");
  const StabilityClass sc = classify_stability(g);
  switch (sc.kind) {
    case StabilityKind::CooperationDominant: return 1.0;
    case StabilityKind::DefectionDominant: return 0.0;
    case StabilityKind::Neutral: return 0.5;
    case StabilityKind::MixedStable: return *sc.interior_x;
    case StabilityKind::Bistable: {
      // Compare x0 with x* = (P - S) / D exactly; D > 0 here.
      const double lhs = x0 * static_cast<double>(advantage_slope(g));
      const double rhs = static_cast<double>(g.P - g.S);
      if (lhs > rhs) return 1.0;
      if (lhs < rhs) return 0.0;
      return 0.5;
    }
  }
  return 0.5;
}

struct NashCell {
  Game game;
  EquilibriumResult result;
};

// Replicator sweep over a set of games. Cells that hit MaxIterations or
// Periodic are returned as diagnostics; their values are kept as computed.
struct ReplicatorSweep {
  std::vector<double> values;
  std::vector<NashCell> flagged;
};

inline ReplicatorSweep replicator_sweep(const std::vector<Game>& games, const ReplicatorParams& params) {
  ReplicatorSweep out;
  out.values.reserve(games.size());
  for (const Game& g : games) {
    EquilibriumResult r = simulate_replicator(g, params);
    out.values.push_back(r.terminal_x);
    if (r.outcome == EquilibriumOutcome::MaxIterations || r.outcome == EquilibriumOutcome::Periodic)
      out.flagged.push_back({g, r});
  }
  return out;
}

enum class NashMethod { Analytic, Replicator };

struct NashMatrix {
  CooperationMatrix matrix;
  std::vector<NashCell> flagged;  // replicator cells without a convergent stop
};

inline NashMatrix nash_matrix(const GridSpec& grid, NashMethod method = NashMethod::Analytic,
                              const ReplicatorParams& params = {}) {
  const std::vector<Game> games = build_grid(grid);
  if (method == NashMethod::Analytic) {
    std::vector<double> cells;
    cells.reserve(games.size());
    for (const Game& g : games) cells.push_back(nash_cooperation(g, params.x0));
    return {CooperationMatrix(grid, std::move(cells)), {}};
  }
  ReplicatorSweep sweep = replicator_sweep(games, params);
  return {CooperationMatrix(grid, std::move(sweep.values)), std::move(sweep.flagged)};
}

}  // namespace dyadlab
