#pragma once

// Chat-completions request/response types and their JSON wire form:
//
//   request  {"model", "messages": [{"role", "content"}...], "temperature", "max_tokens"[, "seed"]}
//   response {"choices": [{"message": {"content"}, "finish_reason"}], "usage": {...}}

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dyadlab/error.hpp"

namespace dyadlab::llm {

struct Message {
  std::string role;
  std::string content;
};

struct CompletionRequest {
  std::string model;
  std::vector<Message> messages;
  double temperature = 0.8;
  int max_tokens = 1000;
  std::optional<std::uint64_t> seed;
};

struct Usage {
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  long long total_tokens = 0;
};

struct CompletionResponse {
  std::string text;
  std::string finish_reason;
  Usage usage;
};

// Sampling settings per call role.
struct CallParams {
  double temperature;
  int max_tokens;
};
inline constexpr CallParams kGenerationParams{0.8, 1000};
inline constexpr CallParams kExtractionParams{0.3, 50};
inline constexpr CallParams kVerifierParams{0.0, 5};

inline void validate(const CompletionRequest& r) {
  if (!(r.temperature >= 0.0 && r.temperature <= 2.0))
    throw specification_error("temperature must lie in [0, 2]");
  if (r.max_tokens < 1) throw specification_error("max_tokens must be >= 1");
  if (r.messages.empty()) throw specification_error("request has no messages");
}

inline nlohmann::json to_json(const CompletionRequest& r) {
  nlohmann::json j;
  j["model"] = r.model;
  j["messages"] = nlohmann::json::array();
  for (const auto& m : r.messages) j["messages"].push_back({{"role", m.role}, {"content", m.content}});
  j["temperature"] = r.temperature;
  j["max_tokens"] = r.max_tokens;
  if (r.seed) j["seed"] = *r.seed;
  return j;
}

inline CompletionRequest request_from_json(const nlohmann::json& j) {
  try {
    CompletionRequest r;
    r.model = j.value("model", "");
    for (const auto& m : j.at("messages"))
      r.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
    r.temperature = j.value("temperature", 1.0);
    r.max_tokens = j.value("max_tokens", 16);
    if (j.contains("seed") && j["seed"].is_number_unsigned()) r.seed = j["seed"].get<std::uint64_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::Protocol, std::string("malformed request body: ") + e.what());
  }
}

inline nlohmann::json to_json(const CompletionResponse& r) {
  return {{"choices", {{{"index", 0},
                        {"message", {{"role", "assistant"}, {"content", r.text}}},
                        {"finish_reason", r.finish_reason}}}},
          {"usage",
           {{"prompt_tokens", r.usage.prompt_tokens},
            {"completion_tokens", r.usage.completion_tokens},
            {"total_tokens", r.usage.total_tokens}}}};
}

inline CompletionResponse response_from_json(const nlohmann::json& j) {
  try {
    CompletionResponse r;
    const auto& choice = j.at("choices").at(0);
    const auto& content = choice.at("message").at("content");
    r.text = content.is_null() ? std::string() : content.get<std::string>();
    if (choice.contains("finish_reason") && choice["finish_reason"].is_string())
      r.finish_reason = choice["finish_reason"].get<std::string>();
    if (j.contains("usage") && j["usage"].is_object()) {
      const auto& u = j["usage"];
      r.usage.prompt_tokens = u.value("prompt_tokens", 0LL);
      r.usage.completion_tokens = u.value("completion_tokens", 0LL);
      r.usage.total_tokens = u.value("total_tokens", 0LL);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::Protocol, std::string("malformed completion body: ") + e.what());
  }
}

inline CompletionResponse response_from_body(const std::string& body) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCategory::Protocol, "completion body is not JSON");
  return response_from_json(j);
}

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual CompletionResponse complete(const CompletionRequest& request) = 0;
};

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds initial_delay{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{8000};
};

// Retries transport errors with exponential backoff. Other errors propagate
// immediately. The last transport error is rethrown once attempts run out.
template <class Fn>
auto with_retries(const RetryPolicy& policy, Fn&& fn,
                  const std::function<void(std::chrono::milliseconds)>& sleep =
                      [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) -> decltype(fn()) {
  auto delay = policy.initial_delay;
  for (int attempt = 1;; ++attempt) {
    try {
      return fn();
    } catch (const Error& e) {
      if (!e.retriable() || attempt >= policy.max_attempts) {
        if (e.retriable())
          throw Error(ErrorCategory::Transport,
                      std::string(e.what()) + " (after " + std::to_string(attempt) + " attempts)");
        throw;
      }
    }
    sleep(delay);
    delay = std::min(policy.max_delay,
                     std::chrono::milliseconds(static_cast<long long>(delay.count() * policy.multiplier)));
  }
}

}  // namespace dyadlab::llm
