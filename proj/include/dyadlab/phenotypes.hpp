#pragma once

// Behavioral phenotypes: decision rules observed in human play, mixtures of
// them, and the SD-normalized deviation check against observed data.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dyadlab/error.hpp"
#include "dyadlab/game.hpp"
#include "dyadlab/matrix.hpp"

namespace dyadlab {

enum class Phenotype { Optimist, Pessimist, Envious, Trustful, Undefined };

inline constexpr std::array<Phenotype, 5> kAllPhenotypes = {
    Phenotype::Optimist, Phenotype::Pessimist, Phenotype::Envious, Phenotype::Trustful,
    Phenotype::Undefined};

inline std::string_view to_string(Phenotype p) {
  switch (p) {
    case Phenotype::Optimist: return "optimist";
    case Phenotype::Pessimist: return "pessimist";
    case Phenotype::Envious: return "envious";
    case Phenotype::Trustful: return "trustful";
    case Phenotype::Undefined: return "undefined";
  }
  return "undefined";
}

inline std::optional<Phenotype> parse_phenotype(std::string_view s) {
  for (Phenotype p : kAllPhenotypes)
    if (to_string(p) == s) return p;
  return std::nullopt;
}

// Expected cooperation rate. Undefined is the only stochastic rule.
inline double phenotype_cooperation(Phenotype p, const Game& g) {
  switch (p) {
    case Phenotype::Optimist: return g.R > g.T ? 1.0 : 0.0;
    case Phenotype::Pessimist: return g.S > g.P ? 1.0 : 0.0;
    case Phenotype::Envious: return g.S >= g.T ? 1.0 : 0.0;
    case Phenotype::Trustful: return 1.0;
    case Phenotype::Undefined: return 0.5;
  }
  return 0.5;
}

// Live decision: deterministic rules, Bernoulli(0.5) for Undefined.
template <class Rng>
Choice phenotype_decide(Phenotype p, const Game& g, Rng& rng) {
  if (p == Phenotype::Undefined)
    return std::bernoulli_distribution(0.5)(rng) ? Choice::Cooperate : Choice::Defect;
  return phenotype_cooperation(p, g) >= 1.0 ? Choice::Cooperate : Choice::Defect;
}

struct MixtureWeights {
  std::array<double, 5> weight{};  // indexed by Phenotype

  double& operator[](Phenotype p) { return weight[static_cast<std::size_t>(p)]; }
  double operator[](Phenotype p) const { return weight[static_cast<std::size_t>(p)]; }

  // Population shares of the human experiment.
  static MixtureWeights human_population() {
    MixtureWeights w;
    w[Phenotype::Optimist] = 0.20;
    w[Phenotype::Pessimist] = 0.21;
    w[Phenotype::Envious] = 0.30;
    w[Phenotype::Trustful] = 0.17;
    w[Phenotype::Undefined] = 0.12;
    return w;
  }
  static MixtureWeights pure(Phenotype p) {
    MixtureWeights w;
    w[p] = 1.0;
    return w;
  }
};

inline void validate(const MixtureWeights& w) {
  double sum = 0.0;
  for (double v : w.weight) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw specification_error("mixture weights must be >= 0");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw specification_error("mixture weights must sum to 1");
}

// Accepts "paper"/"human", a single phenotype name, or a list such as
// "optimist=0.2,pessimist=0.21,envious=0.3,trustful=0.17,undefined=0.12".
inline MixtureWeights parse_weights(std::string_view text) {
  if (text == "paper" || text == "human") return MixtureWeights::human_population();
  if (auto p = parse_phenotype(text)) return MixtureWeights::pure(*p);
  MixtureWeights w;
  for (auto item : detail::split(text, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw specification_error("bad weight entry '" + std::string(item) + "'");
    auto p = parse_phenotype(detail::trim(item.substr(0, eq)));
    double v = 0;
    if (!p || !detail::parse_number(item.substr(eq + 1), v))
      throw specification_error("bad weight entry '" + std::string(item) + "'");
    w[*p] = v;
  }
  validate(w);
  return w;
}

template <class Rng>
Phenotype sample_phenotype(const MixtureWeights& w, Rng& rng) {
  std::discrete_distribution<std::size_t> pick(w.weight.begin(), w.weight.end());
  return kAllPhenotypes[pick(rng)];
}

inline double mixture_cooperation(const MixtureWeights& w, const Game& g) {
  double v = 0.0;
  for (Phenotype p : kAllPhenotypes) v += w[p] * phenotype_cooperation(p, g);
  return std::clamp(v, 0.0, 1.0);
}

inline CooperationMatrix mixture_matrix(const MixtureWeights& weights, const GridSpec& grid) {
  validate(weights);
  std::vector<double> cells;
  for (const Game& g : build_grid(grid)) cells.push_back(mixture_cooperation(weights, g));
  return CooperationMatrix(grid, std::move(cells));
}

inline CooperationMatrix phenotype_matrix(Phenotype p, const GridSpec& grid) {
  return mixture_matrix(MixtureWeights::pure(p), grid);
}

inline constexpr double kDeviationThreshold = 2.575;  // 99% two-sided, in SD units

struct DeviationEntry {
  double mean_deviation = 0.0;
  bool pass = true;
  std::size_t cells_used = 0;
  std::size_t cells_skipped = 0;  // sd == 0
};

// Mean of |predicted - observed| / sd over cells with sd > 0, games weighted equally.
inline DeviationEntry phenotype_deviation(const CooperationMatrix& predicted, const CooperationMatrix& observed,
                                          const CooperationMatrix& sd) {
  if (!same_shape(predicted.grid(), observed.grid()) || !same_shape(predicted.grid(), sd.grid()))
    throw specification_error("deviation inputs must share a grid");
  DeviationEntry e;
  double total = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (!(sd[i] > 0.0)) {
      ++e.cells_skipped;
      continue;
    }
    total += std::abs(predicted[i] - observed[i]) / sd[i];
    ++e.cells_used;
  }
  if (e.cells_used == 0) throw specification_error("every cell has zero standard deviation");
  e.mean_deviation = total / static_cast<double>(e.cells_used);
  e.pass = e.mean_deviation < kDeviationThreshold;
  return e;
}

struct DeviationReport {
  std::array<DeviationEntry, 5> entry{};
  const DeviationEntry& operator[](Phenotype p) const { return entry[static_cast<std::size_t>(p)]; }
};

inline DeviationReport phenotype_deviation_report(const CooperationMatrix& observed, const CooperationMatrix& sd) {
  DeviationReport r;
  for (Phenotype p : kAllPhenotypes)
    r.entry[static_cast<std::size_t>(p)] = phenotype_deviation(phenotype_matrix(p, observed.grid()), observed, sd);
  return r;
}

}  // namespace dyadlab
