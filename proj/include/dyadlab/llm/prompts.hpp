#pragma once

// Prompt construction for the tested model, the extractor and the verifier.

#include <array>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <utility>

#include "dyadlab/game.hpp"
#include "dyadlab/llm/labels.hpp"
#include "dyadlab/llm/prompt_templates.hpp"

namespace dyadlab::llm {

enum class Stage { Simple, Double, MultiStep, Verified };

inline std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Simple: return "simple";
    case Stage::Double: return "double";
    case Stage::MultiStep: return "multi-step";
    case Stage::Verified: return "verified";
  }
  return "verified";
}

inline std::optional<Stage> parse_stage(std::string_view s) {
  for (Stage st : {Stage::Simple, Stage::Double, Stage::MultiStep, Stage::Verified})
    if (to_string(st) == s) return st;
  return std::nullopt;
}

struct PromptBundle {
  std::string system;
  std::string user;
  Stage stage = Stage::Double;
};

namespace detail {

inline void replace_all(std::string& text, std::string_view key, std::string_view value) {
  std::size_t pos = 0;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    text.replace(pos, key.size(), value);
    pos += value.size();
  }
}

}  // namespace detail

inline std::string outcome_line(const Game& g, const LabelMapping& m, Choice mine, Choice theirs) {
  std::string line = "If you choose ";
  line += to_char(m.encode(mine));
  line += " and the other player chooses ";
  line += to_char(m.encode(theirs));
  line += ". You earn " + std::to_string(payoff(g, mine, theirs)) + " points, the other player earns " +
          std::to_string(payoff(g, theirs, mine)) + " points.";
  return line;
}

// The four outcome lines, cooperation label first: (c,c), (c,d), (d,c), (d,d).
inline std::string outcome_block(const Game& g, const LabelMapping& m) {
  constexpr auto C = Choice::Cooperate;
  constexpr auto D = Choice::Defect;
  return outcome_line(g, m, C, C) + "\n" + outcome_line(g, m, C, D) + "\n" + outcome_line(g, m, D, C) + "\n" +
         outcome_line(g, m, D, D);
}

inline PromptBundle build_prompt(const Game& g, const LabelMapping& m, Stage stage) {
  PromptBundle b;
  b.stage = stage;
  b.system = std::string(templates::kSystem);
  b.user = std::string(templates::kInstructionRules);
  b.user += templates::kRulesToOutcomes;
  b.user += outcome_block(g, m);
  switch (stage) {
    case Stage::Simple:
      b.user += "\n\n";
      b.user += templates::kSimpleAnswer;
      break;
    case Stage::Double: break;
    case Stage::MultiStep:
    case Stage::Verified:
      b.user += "\n\n";
      b.user += templates::kMultiStep;
      break;
  }
  return b;
}

// Payoffs stated in a prompt, keyed by (my label, their label).
struct StatedOutcome {
  int mine = 0;
  int theirs = 0;
};
using StatedOutcomes = std::map<std::pair<char, char>, StatedOutcome>;

// Reads every outcome line of the form used by outcome_line() out of a text.
inline StatedOutcomes parse_outcome_lines(std::string_view text) {
  static const std::regex line_re(
      R"(If you choose ([AB]) and the other player chooses ([AB])\.\s*You earn (\d+) points, the other player earns (\d+) points\.)");
  StatedOutcomes out;
  const std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), line_re); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    out[{m[1].str()[0], m[2].str()[0]}] = StatedOutcome{std::stoi(m[3].str()), std::stoi(m[4].str())};
  }
  return out;
}

inline std::string extraction_prompt(std::string_view long_answer) {
  std::string text(templates::kExtraction);
  detail::replace_all(text, "{answer}", long_answer);
  return text;
}

// Short form of the rules given to the verifier: the instruction rules without
// the outcome lines (those go into the {points} slot).
inline std::string verifier_prompt(const Game& g, const LabelMapping& m, std::string_view long_answer) {
  std::string text(templates::kVerifier);
  // {answer1} last so text inside the answer is never treated as a placeholder.
  detail::replace_all(text, "{instructions_script_short}", templates::kInstructionRules);
  detail::replace_all(text, "{points}", outcome_block(g, m));
  const auto pos = text.find("{answer1}");
  if (pos != std::string::npos) text.replace(pos, 9, long_answer);
  return text;
}

}  // namespace dyadlab::llm
