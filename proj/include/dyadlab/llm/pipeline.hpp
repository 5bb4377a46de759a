#pragma once

// The staged answer pipeline: long-answer generation, logical verification,
// and short-answer extraction, each a separate model call.

#include <cctype>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dyadlab/game.hpp"
#include "dyadlab/llm/chat.hpp"
#include "dyadlab/llm/labels.hpp"
#include "dyadlab/llm/prompts.hpp"

namespace dyadlab::llm {

enum class Extracted { A, B, Invalid };

inline std::string_view to_string(Extracted e) {
  switch (e) {
    case Extracted::A: return "A";
    case Extracted::B: return "B";
    case Extracted::Invalid: return "invalid";
  }
  return "invalid";
}

inline std::optional<Label> as_label(Extracted e) {
  if (e == Extracted::A) return Label::A;
  if (e == Extracted::B) return Label::B;
  return std::nullopt;
}

enum class Verdict { Good, Bad, Unparseable };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Good: return "good";
    case Verdict::Bad: return "bad";
    case Verdict::Unparseable: return "unparseable";
  }
  return "unparseable";
}

// Verbatim record of one model call.
struct CallRecord {
  std::string role;  // generate | verify | extract
  nlohmann::json request;
  nlohmann::json response;
};

// Parses a short extractor (or simple-stage) reply. A reply that is only a
// letter, up to surrounding punctuation, is taken case-insensitively. In prose
// only standalone capital A/B tokens count, so English "a" is not read as a
// choice. Zero or two distinct tokens make the reply Invalid.
inline Extracted parse_choice_reply(std::string_view reply) {
  std::string core;
  for (char c : reply)
    if (!std::isspace(static_cast<unsigned char>(c)) && !std::ispunct(static_cast<unsigned char>(c))) core += c;
  if (core == "A" || core == "a") return Extracted::A;
  if (core == "B" || core == "b") return Extracted::B;

  static const std::regex token_re(R"((^|[^A-Za-z0-9_])([AB])(?=$|[^A-Za-z0-9_]))");
  const std::string s(reply);
  bool seen_a = false;
  bool seen_b = false;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), token_re); it != std::sregex_iterator(); ++it) {
    if ((*it)[2].str() == "A") seen_a = true;
    else seen_b = true;
  }
  if (seen_a == seen_b) return Extracted::Invalid;
  return seen_a ? Extracted::A : Extracted::B;
}

inline Verdict parse_verdict(std::string_view reply) {
  auto edge = [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) || std::ispunct(static_cast<unsigned char>(c));
  };
  while (!reply.empty() && edge(reply.front())) reply.remove_prefix(1);
  while (!reply.empty() && edge(reply.back())) reply.remove_suffix(1);
  std::string word;
  for (char c : reply) word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (word == "good") return Verdict::Good;
  if (word == "bad") return Verdict::Bad;
  return Verdict::Unparseable;
}

struct ModelHandle {
  ChatClient* client = nullptr;
  std::string model;
};

namespace detail {

inline CompletionResponse call(const ModelHandle& h, const std::string& system, const std::string& user,
                               CallParams params, std::optional<std::uint64_t> seed, std::string role,
                               std::vector<CallRecord>* log) {
  CompletionRequest req;
  req.model = h.model;
  if (!system.empty()) req.messages.push_back({"system", system});
  req.messages.push_back({"user", user});
  req.temperature = params.temperature;
  req.max_tokens = params.max_tokens;
  req.seed = seed;
  CompletionResponse res = h.client->complete(req);
  if (log) log->push_back({std::move(role), to_json(req), to_json(res)});
  return res;
}

}  // namespace detail

inline std::string generate_long_answer(const ModelHandle& tested, const PromptBundle& prompt,
                                        std::optional<std::uint64_t> seed = std::nullopt,
                                        std::vector<CallRecord>* log = nullptr) {
  return detail::call(tested, prompt.system, prompt.user, kGenerationParams, seed, "generate", log).text;
}

inline Extracted extract_choice(std::string_view long_answer, const ModelHandle& extractor,
                                std::optional<std::uint64_t> seed = std::nullopt,
                                std::vector<CallRecord>* log = nullptr) {
  if (long_answer.find_first_not_of(" \t\r\n") == std::string_view::npos) return Extracted::Invalid;
  const auto res = detail::call(extractor, std::string(templates::kSystem), extraction_prompt(long_answer),
                                kExtractionParams, seed, "extract", log);
  return parse_choice_reply(res.text);
}

inline Verdict verify_logic(std::string_view long_answer, const Game& game, const LabelMapping& mapping,
                            const ModelHandle& verifier, std::optional<std::uint64_t> seed = std::nullopt,
                            std::vector<CallRecord>* log = nullptr) {
  if (long_answer.find_first_not_of(" \t\r\n") == std::string_view::npos) return Verdict::Bad;
  const auto res = detail::call(verifier, std::string(templates::kSystem),
                                verifier_prompt(game, mapping, long_answer), kVerifierParams, seed, "verify", log);
  return parse_verdict(res.text);
}

}  // namespace dyadlab::llm
