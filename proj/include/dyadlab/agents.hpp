#pragma once

// Players for the experiment runner. Every agent turns one play attempt
// (game, seed components, relaxation flag) into a PlayOutcome. Non-LLM agents
// decide directly; the LLM agent runs the staged model pipeline.

#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dyadlab/equilibrium.hpp"
#include "dyadlab/game.hpp"
#include "dyadlab/llm/chat.hpp"
#include "dyadlab/llm/labels.hpp"
#include "dyadlab/llm/pipeline.hpp"
#include "dyadlab/llm/prompts.hpp"
#include "dyadlab/phenotypes.hpp"
#include "dyadlab/seeding.hpp"

namespace dyadlab {

struct PlayContext {
  Game game;
  PlaySeed seed;
  bool relaxed = false;  // verifier disabled for this game
};

enum class InvalidReason { None, Verifier, Extraction };

inline std::string_view to_string(InvalidReason r) {
  switch (r) {
    case InvalidReason::None: return "none";
    case InvalidReason::Verifier: return "verifier";
    case InvalidReason::Extraction: return "extraction";
  }
  return "none";
}

struct PlayOutcome {
  llm::LabelMapping mapping;
  std::optional<llm::Stage> stage;  // absent for non-LLM agents
  std::string long_answer;
  std::optional<llm::Verdict> verdict;
  llm::Extracted extracted = llm::Extracted::Invalid;
  bool verifier_bypassed = false;
  InvalidReason invalid_reason = InvalidReason::None;
  std::vector<llm::CallRecord> calls;

  std::optional<Choice> choice() const {
    if (auto l = llm::as_label(extracted)) return mapping.decode(*l);
    return std::nullopt;
  }
  bool valid() const { return choice().has_value(); }
};

class Agent {
 public:
  virtual ~Agent() = default;
  // Must be safe to call concurrently.
  virtual PlayOutcome play(const PlayContext& ctx) const = 0;
  virtual std::optional<llm::Stage> stage() const { return std::nullopt; }
};

namespace detail {

// Random streams of one attempt: the label draw and the decision draw never share state.
inline std::uint64_t label_seed(const PlaySeed& s) { return combine_seed(s.value(), 0x6c6162656c); }
inline std::mt19937_64 decision_rng(const PlaySeed& s) { return std::mt19937_64(combine_seed(s.value(), 0x6465636964)); }

inline PlayOutcome direct_outcome(const PlayContext& ctx, Choice c) {
  PlayOutcome o;
  o.mapping = llm::randomize_labels(label_seed(ctx.seed));
  o.extracted = o.mapping.encode(c) == llm::Label::A ? llm::Extracted::A : llm::Extracted::B;
  return o;
}

}  // namespace detail

class NashAgent : public Agent {
 public:
  explicit NashAgent(double x0 = 0.5) : x0_(x0) {}
  PlayOutcome play(const PlayContext& ctx) const override {
    auto rng = detail::decision_rng(ctx.seed);
    const bool coop = std::bernoulli_distribution(nash_cooperation(ctx.game, x0_))(rng);
    return detail::direct_outcome(ctx, coop ? Choice::Cooperate : Choice::Defect);
  }

 private:
  double x0_;
};

class PhenotypeAgent : public Agent {
 public:
  explicit PhenotypeAgent(Phenotype p) : phenotype_(p) {}
  PlayOutcome play(const PlayContext& ctx) const override {
    auto rng = detail::decision_rng(ctx.seed);
    return detail::direct_outcome(ctx, phenotype_decide(phenotype_, ctx.game, rng));
  }

 private:
  Phenotype phenotype_;
};

class MixtureAgent : public Agent {
 public:
  explicit MixtureAgent(MixtureWeights w) : weights_(w) { validate(weights_); }
  PlayOutcome play(const PlayContext& ctx) const override {
    auto rng = detail::decision_rng(ctx.seed);
    const Phenotype p = sample_phenotype(weights_, rng);
    return detail::direct_outcome(ctx, phenotype_decide(p, ctx.game, rng));
  }

 private:
  MixtureWeights weights_;
};

// Cooperation probability per (S, T) cell, with a fallback for unlisted cells.
class ScriptedAgent : public Agent {
 public:
  explicit ScriptedAgent(double default_p = 1.0, std::map<std::pair<Points, Points>, double> cells = {})
      : default_p_(default_p), cells_(std::move(cells)) {
    auto check = [](double p) {
      if (!(p >= 0.0 && p <= 1.0)) throw specification_error("scripted cooperation probability outside [0, 1]");
    };
    check(default_p_);
    for (const auto& [k, p] : cells_) check(p);
  }
  PlayOutcome play(const PlayContext& ctx) const override {
    const auto it = cells_.find({ctx.game.S, ctx.game.T});
    const double p = it == cells_.end() ? default_p_ : it->second;
    auto rng = detail::decision_rng(ctx.seed);
    const bool coop = p >= 1.0 || (p > 0.0 && std::bernoulli_distribution(p)(rng));
    return detail::direct_outcome(ctx, coop ? Choice::Cooperate : Choice::Defect);
  }

 private:
  double default_p_;
  std::map<std::pair<Points, Points>, double> cells_;
};

// The tested model answers; depending on the stage, a verifier screens the
// answer and an extractor pulls out the letter.
class LlmAgent : public Agent {
 public:
  struct Models {
    std::shared_ptr<llm::ChatClient> tested_client;
    std::string tested_model;
    std::shared_ptr<llm::ChatClient> extractor_client;
    std::string extractor_model;
    std::shared_ptr<llm::ChatClient> verifier_client;  // required for Stage::Verified
    std::string verifier_model;
  };

  LlmAgent(Models models, llm::Stage stage, bool force_identity_labels = false, bool send_seed = true)
      : m_(std::move(models)), stage_(stage), force_identity_(force_identity_labels), send_seed_(send_seed) {
    if (!m_.tested_client) throw specification_error("LLM agent needs a tested model endpoint");
    if (stage_ != llm::Stage::Simple && !m_.extractor_client)
      throw specification_error("stage " + std::string(llm::to_string(stage_)) + " needs an extractor endpoint");
    if (stage_ == llm::Stage::Verified && !m_.verifier_client)
      throw specification_error("stage verified needs a verifier endpoint");
  }

  std::optional<llm::Stage> stage() const override { return stage_; }

  PlayOutcome play(const PlayContext& ctx) const override {
    PlayOutcome o;
    o.stage = stage_;
    o.mapping = llm::randomize_labels(detail::label_seed(ctx.seed), force_identity_);
    const auto seed = send_seed_ ? std::optional<std::uint64_t>(ctx.seed.value() >> 1) : std::nullopt;
    const llm::ModelHandle tested{m_.tested_client.get(), m_.tested_model};
    const auto prompt = llm::build_prompt(ctx.game, o.mapping, stage_);
    o.long_answer = llm::generate_long_answer(tested, prompt, seed, &o.calls);

    if (stage_ == llm::Stage::Simple) {
      o.extracted = llm::parse_choice_reply(o.long_answer);
    } else {
      if (stage_ == llm::Stage::Verified) {
        if (ctx.relaxed) {
          o.verifier_bypassed = true;
        } else {
          const llm::ModelHandle verifier{m_.verifier_client.get(), m_.verifier_model};
          o.verdict = llm::verify_logic(o.long_answer, ctx.game, o.mapping, verifier, seed, &o.calls);
          if (*o.verdict != llm::Verdict::Good) {
            o.extracted = llm::Extracted::Invalid;
            o.invalid_reason = InvalidReason::Verifier;
            return o;
          }
        }
      }
      const llm::ModelHandle extractor{m_.extractor_client.get(), m_.extractor_model};
      o.extracted = llm::extract_choice(o.long_answer, extractor, seed, &o.calls);
    }
    if (o.extracted == llm::Extracted::Invalid) o.invalid_reason = InvalidReason::Extraction;
    return o;
  }

 private:
  Models m_;
  llm::Stage stage_;
  bool force_identity_;
  bool send_seed_;
};

}  // namespace dyadlab
