#pragma once

// HTTP transport for any endpoint speaking the chat-completions protocol.
// https requires building with CPPHTTPLIB_OPENSSL_SUPPORT.

#include <chrono>
#include <cstdlib>
#include <string>

#include <httplib.h>

#include "dyadlab/error.hpp"
#include "dyadlab/llm/chat.hpp"

namespace dyadlab::llm {

struct EndpointUrl {
  std::string scheme_host_port;  // e.g. "http://localhost:8000"
  std::string path;              // e.g. "/v1/chat/completions"
};

inline EndpointUrl parse_endpoint_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw specification_error("endpoint URL needs a scheme: " + url);
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw specification_error("unsupported endpoint scheme: " + scheme);
  const auto path_start = url.find('/', scheme_end + 3);
  EndpointUrl e;
  e.scheme_host_port = url.substr(0, path_start);
  e.path = path_start == std::string::npos ? "/v1/chat/completions" : url.substr(path_start);
  if (e.scheme_host_port.size() <= scheme_end + 3) throw specification_error("endpoint URL has no host: " + url);
  return e;
}

struct HttpEndpointConfig {
  std::string url;
  std::string api_key_env;  // name of the variable holding the key; empty for none
  std::chrono::seconds timeout{120};
  RetryPolicy retry{};
};

class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(HttpEndpointConfig cfg) : cfg_(std::move(cfg)), url_(parse_endpoint_url(cfg_.url)) {
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (url_.scheme_host_port.starts_with("https://"))
      throw specification_error("https endpoints need a build with OpenSSL: " + cfg_.url);
#endif
    if (!cfg_.api_key_env.empty()) {
      const char* key = std::getenv(cfg_.api_key_env.c_str());
      if (key == nullptr || *key == '\0')
        throw specification_error("environment variable " + cfg_.api_key_env + " is not set");
      api_key_ = key;
    }
  }

  CompletionResponse complete(const CompletionRequest& request) override {
    validate(request);
    const std::string body = to_json(request).dump();
    return with_retries(cfg_.retry, [&] { return post_once(body); });
  }

 private:
  CompletionResponse post_once(const std::string& body) const {
    httplib::Client client(url_.scheme_host_port);
    client.set_connection_timeout(cfg_.timeout);
    client.set_read_timeout(cfg_.timeout);
    client.set_write_timeout(cfg_.timeout);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = client.Post(url_.path, headers, body, "application/json");
    if (!res)
      throw Error(ErrorCategory::Transport,
                  "request to " + url_.scheme_host_port + " failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
      throw Error(ErrorCategory::Transport, "endpoint returned HTTP " + std::to_string(res->status));
    return response_from_body(res->body);
  }

  HttpEndpointConfig cfg_;
  EndpointUrl url_;
  std::string api_key_;
};

}  // namespace dyadlab::llm
