#pragma once

// An offline stand-in for the tested, extractor and verifier models. It reads
// the same prompts a real model would get, so the whole pipeline (label
// mapping, prompt text, verification, extraction) runs without a network.
//
//   tested    parses the outcome lines, decides per its policy, and writes a
//             short structured analysis ending in "I choose X."
//   verifier  checks every "(X,Y) gives me N points" claim against the rules
//             in the verifier prompt; all claims correct -> "good".
//   extractor replies with the letter of the last "I choose X", else "neither".

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <regex>
#include <string>
#include <string_view>

#include "dyadlab/equilibrium.hpp"
#include "dyadlab/error.hpp"
#include "dyadlab/game.hpp"
#include "dyadlab/llm/chat.hpp"
#include "dyadlab/llm/labels.hpp"
#include "dyadlab/llm/prompts.hpp"
#include "dyadlab/phenotypes.hpp"

namespace dyadlab::llm {

enum class FakePolicy {
  Cooperate,
  Defect,
  Nash,               // cooperates with the analytic Nash probability
  Mixture,            // draws a phenotype from the human population shares
  FailVerification,   // misstates payoffs, so the verifier always rejects
  Flaky,              // roughly one answer in three states no choice
};

inline std::string_view to_string(FakePolicy p) {
  switch (p) {
    case FakePolicy::Cooperate: return "cooperate";
    case FakePolicy::Defect: return "defect";
    case FakePolicy::Nash: return "nash";
    case FakePolicy::Mixture: return "mixture";
    case FakePolicy::FailVerification: return "fail-verification";
    case FakePolicy::Flaky: return "flaky";
  }
  return "cooperate";
}

inline std::optional<FakePolicy> parse_fake_policy(std::string_view s) {
  for (auto p : {FakePolicy::Cooperate, FakePolicy::Defect, FakePolicy::Nash, FakePolicy::Mixture,
                 FakePolicy::FailVerification, FakePolicy::Flaky})
    if (to_string(p) == s) return p;
  return std::nullopt;
}

// Recovers the game and the label mapping from stated outcomes. The label
// whose mutual outcome pays more is read as cooperation (R > P on every grid
// this tool builds); ties resolve to A.
struct DecodedPrompt {
  Game game;
  LabelMapping mapping;
};

inline std::optional<DecodedPrompt> decode_outcomes(const StatedOutcomes& o) {
  if (o.size() != 4) return std::nullopt;
  const int aa = o.at({'A', 'A'}).mine;
  const int bb = o.at({'B', 'B'}).mine;
  const LabelMapping m{bb > aa ? Label::B : Label::A};
  const char c = to_char(m.cooperate);
  const char d = to_char(m.defect());
  DecodedPrompt out;
  out.mapping = m;
  out.game = Game{o.at({c, c}).mine, o.at({c, d}).mine, o.at({d, c}).mine, o.at({d, d}).mine};
  return out;
}

class FakeChatModel : public ChatClient {
 public:
  explicit FakeChatModel(FakePolicy policy = FakePolicy::Cooperate) : policy_(policy) {}

  CompletionResponse complete(const CompletionRequest& request) override {
    validate(request);
    const std::string& user = request.messages.back().content;
    CompletionResponse res;
    res.finish_reason = "stop";
    if (user.find("output good or bad") != std::string::npos) res.text = verify(user);
    else if (user.find("Identify only the final choice") != std::string::npos) res.text = extract(user);
    else res.text = answer(user, request.seed.value_or(std::hash<std::string>{}(user)));
    res.usage.prompt_tokens = static_cast<long long>(user.size() / 4);
    res.usage.completion_tokens = static_cast<long long>(res.text.size() / 4);
    res.usage.total_tokens = res.usage.prompt_tokens + res.usage.completion_tokens;
    return res;
  }

 private:
  std::string answer(const std::string& prompt, std::uint64_t seed) const {
    const auto decoded = decode_outcomes(parse_outcome_lines(prompt));
    if (!decoded) return "I cannot tell what the options are.";
    const Game& g = decoded->game;
    const LabelMapping m = decoded->mapping;
    std::mt19937_64 rng(seed);

    Choice choice = Choice::Cooperate;
    switch (policy_) {
      case FakePolicy::Cooperate:
      case FakePolicy::FailVerification:
      case FakePolicy::Flaky: choice = Choice::Cooperate; break;
      case FakePolicy::Defect: choice = Choice::Defect; break;
      case FakePolicy::Nash:
        choice = std::bernoulli_distribution(nash_cooperation(g))(rng) ? Choice::Cooperate : Choice::Defect;
        break;
      case FakePolicy::Mixture: {
        const auto w = MixtureWeights::human_population();
        choice = phenotype_decide(sample_phenotype(w, rng), g, rng);
        break;
      }
    }
    const char pick = to_char(m.encode(choice));
    if (prompt.find(templates::kSimpleAnswer) != std::string::npos) return std::string(1, pick);
    if (policy_ == FakePolicy::Flaky && seed % 3 == 0) return "It is hard to say; both options have merit.";

    const int skew = policy_ == FakePolicy::FailVerification ? 1 : 0;
    std::string text;
    for (Label mine : {Label::A, Label::B}) {
      text += "If I choose ";
      text += to_char(mine);
      text += ":";
      for (Label theirs : {Label::A, Label::B}) {
        const int pts = payoff(g, m.decode(mine), m.decode(theirs)) + skew;
        text += std::string(" (") + to_char(mine) + "," + to_char(theirs) + ") gives me " + std::to_string(pts) +
                " points" + (theirs == Label::A ? " and" : ".");
      }
      text += "\n";
    }
    text += "Based on this analysis, I choose ";
    text += pick;
    text += ".";
    return text;
  }

  static std::string section(const std::string& text, std::string_view begin, std::string_view end) {
    const auto b = text.rfind(begin);
    if (b == std::string::npos) return {};
    const auto start = b + begin.size();
    const auto e = text.find(end, start);
    return text.substr(start, e == std::string::npos ? std::string::npos : e - start);
  }

  static std::string verify(const std::string& prompt) {
    const auto rules = parse_outcome_lines(section(prompt, "Rules of game to analyze:", "Answer of Player 1"));
    const std::string answer = section(prompt, "Answer of Player 1, to analyze:", "\nImportant:");
    if (rules.size() != 4) return "bad";
    static const std::regex claim_re(R"(\(([AB]),([AB])\) gives me (\d+) points)");
    int claims = 0;
    for (auto it = std::sregex_iterator(answer.begin(), answer.end(), claim_re); it != std::sregex_iterator();
         ++it) {
      const auto key = std::make_pair((*it)[1].str()[0], (*it)[2].str()[0]);
      if (rules.at(key).mine != std::stoi((*it)[3].str())) return "bad";
      ++claims;
    }
    if (claims != 4 || answer.find("I choose ") == std::string::npos) return "bad";
    return "good";
  }

  static std::string extract(const std::string& prompt) {
    static const std::regex choice_re(R"(I choose ([AB])\b)");
    const std::string answer = section(prompt, "Answer of the player:", "\x01");
    std::string last;
    for (auto it = std::sregex_iterator(answer.begin(), answer.end(), choice_re); it != std::sregex_iterator(); ++it)
      last = (*it)[1].str();
    return last.empty() ? "neither" : last;
  }

  FakePolicy policy_;
};

}  // namespace dyadlab::llm
