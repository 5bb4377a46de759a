#pragma once

// Symmetric 2x2 dyadic games parameterized by (R, S, T, P), their
// classification into the four classical quadrants, and (S, T) grids.

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <system_error>
#include <tuple>
#include <utility>
#include <vector>

#include "dyadlab/error.hpp"

namespace dyadlab {

using Points = std::int32_t;

enum class Choice : std::uint8_t { Cooperate, Defect };

inline constexpr int as_binary(Choice c) { return c == Choice::Cooperate ? 1 : 0; }
inline constexpr Choice other(Choice c) {
  return c == Choice::Cooperate ? Choice::Defect : Choice::Cooperate;
}

inline constexpr Points kDefaultReward = 10;
inline constexpr Points kDefaultPunishment = 5;

struct Game {
  Points R = kDefaultReward;      // mutual cooperation
  Points S = 0;                   // sucker's payoff
  Points T = 0;                   // temptation
  Points P = kDefaultPunishment;  // mutual defection

  static constexpr Game with_st(Points s, Points t, Points r = kDefaultReward,
                                Points p = kDefaultPunishment) {
    return Game{r, s, t, p};
  }

  friend bool operator==(const Game&, const Game&) = default;
};

inline void validate(const Game& g) {
  if (g.R < 0 || g.S < 0 || g.T < 0 || g.P < 0)
    throw specification_error("payoffs must be non-negative");
}

enum class GameClass { Harmony, Snowdrift, StagHunt, PrisonersDilemma, NonStandard };

inline std::string_view to_string(GameClass c) {
  switch (c) {
    case GameClass::Harmony: return "harmony";
    case GameClass::Snowdrift: return "snowdrift";
    case GameClass::StagHunt: return "stag-hunt";
    case GameClass::PrisonersDilemma: return "prisoners-dilemma";
    case GameClass::NonStandard: return "non-standard";
  }
  return "non-standard";
}

// Boundary cells (S == P or T == R) fall through to NonStandard.
constexpr GameClass classify_game(const Game& g) {
  const auto [R, S, T, P] = g;
  if (S > P && R > T) return GameClass::Harmony;
  if (T > R && R > S && S > P) return GameClass::Snowdrift;
  if (R > T && T >= P && P > S) return GameClass::StagHunt;
  if (T > R && P > S) return GameClass::PrisonersDilemma;
  return GameClass::NonStandard;
}

constexpr Points payoff(const Game& g, Choice mine, Choice theirs) {
  if (mine == Choice::Cooperate) return theirs == Choice::Cooperate ? g.R : g.S;
  return theirs == Choice::Cooperate ? g.T : g.P;
}

struct GridSpec {
  Points s_min = 0;
  Points s_max = 10;
  Points t_min = 5;
  Points t_max = 15;
  Points step = 1;
  Points R = kDefaultReward;
  Points P = kDefaultPunishment;

  static constexpr GridSpec original() { return GridSpec{}; }
  static constexpr GridSpec extended() { return GridSpec{0, 20, 0, 20, 1}; }
  static constexpr GridSpec single(Points s, Points t) { return GridSpec{s, s, t, t, 1}; }

  std::size_t s_count() const { return static_cast<std::size_t>((s_max - s_min) / step + 1); }
  std::size_t t_count() const { return static_cast<std::size_t>((t_max - t_min) / step + 1); }
  std::size_t size() const { return s_count() * t_count(); }

  bool contains(Points s, Points t) const {
    return s >= s_min && s <= s_max && t >= t_min && t <= t_max && (s - s_min) % step == 0 &&
           (t - t_min) % step == 0;
  }
  // Row-major index: S outer, T inner.
  std::size_t index_of(Points s, Points t) const {
    return static_cast<std::size_t>((s - s_min) / step) * t_count() +
           static_cast<std::size_t>((t - t_min) / step);
  }
  Points s_at(std::size_t index) const {
    return s_min + static_cast<Points>(index / t_count()) * step;
  }
  Points t_at(std::size_t index) const {
    return t_min + static_cast<Points>(index % t_count()) * step;
  }
  Game game_at(std::size_t index) const { return Game{R, s_at(index), t_at(index), P}; }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

inline void validate(const GridSpec& g) {
  if (g.step < 1) throw specification_error("grid step must be >= 1");
  if (g.s_min > g.s_max) throw specification_error("grid s_min > s_max");
  if (g.t_min > g.t_max) throw specification_error("grid t_min > t_max");
  if (g.s_min < 0 || g.t_min < 0 || g.R < 0 || g.P < 0)
    throw specification_error("grid payoffs must be non-negative");
  if ((g.s_max - g.s_min) % g.step != 0 || (g.t_max - g.t_min) % g.step != 0)
    throw specification_error("grid bounds are not aligned to the step");
}

inline std::vector<Game> build_grid(const GridSpec& spec) {
  validate(spec);
  std::vector<Game> games;
  games.reserve(spec.size());
  for (Points s = spec.s_min; s <= spec.s_max; s += spec.step)
    for (Points t = spec.t_min; t <= spec.t_max; t += spec.step)
      games.push_back(Game{spec.R, s, t, spec.P});
  return games;
}

inline std::string describe_cell(Points s, Points t) {
  return "(S=" + std::to_string(s) + ",T=" + std::to_string(t) + ")";
}

// Grid names: "original", "extended", "NxM" (N values of S from 0, M values of
// T from 5) or an explicit range "s0-s1:t0-t1".
inline GridSpec parse_grid(std::string_view text) {
  if (text == "original") return GridSpec::original();
  if (text == "extended") return GridSpec::extended();
  auto number = [&](std::string_view v) {
    Points out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
      throw specification_error("bad grid '" + std::string(text) + "'");
    return out;
  };
  auto range = [&](std::string_view v) {
    const auto dash = v.find('-');
    if (dash == std::string_view::npos) throw specification_error("bad grid range '" + std::string(text) + "'");
    return std::pair{number(v.substr(0, dash)), number(v.substr(dash + 1))};
  };
  GridSpec g;
  if (const auto colon = text.find(':'); colon != std::string_view::npos) {
    std::tie(g.s_min, g.s_max) = range(text.substr(0, colon));
    std::tie(g.t_min, g.t_max) = range(text.substr(colon + 1));
  } else if (const auto x = text.find('x'); x != std::string_view::npos) {
    const Points n = number(text.substr(0, x)), m = number(text.substr(x + 1));
    if (n < 1 || m < 1) throw specification_error("grid dimensions must be >= 1");
    g.s_min = 0;
    g.s_max = n - 1;
    g.t_min = 5;
    g.t_max = 5 + m - 1;
  } else {
    throw specification_error("unknown grid '" + std::string(text) + "' (original, extended, NxM, s0-s1:t0-t1)");
  }
  validate(g);
  return g;
}

}  // namespace dyadlab
