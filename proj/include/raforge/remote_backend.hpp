#pragma once

#include <chrono>
#include <cstdlib>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "raforge/errors.hpp"
#include "raforge/llm_optimizer.hpp"

namespace raforge {

inline constexpr const char* kApiKeyEnvVar = "RAO_API_KEY";
inline constexpr const char* kBaseUrlEnvVar = "RAO_BASE_URL";
inline constexpr const char* kDefaultBaseUrl = "https://api.openai.com/v1";

struct RemoteConfig {
  std::string base_url;  // falls back to $RAO_BASE_URL, then the public endpoint
  std::string api_key;   // falls back to $RAO_API_KEY; required
  std::string model = "gpt-3.5-turbo";
  double temperature = 1.0;
  int max_tokens = 1024;
  std::chrono::milliseconds timeout{60'000};
  // One sleep per retry; 5xx and transport failures retry, 4xx is fatal.
  std::vector<std::chrono::milliseconds> retry_delays{
      std::chrono::milliseconds{1'000}, std::chrono::milliseconds{2'000},
      std::chrono::milliseconds{4'000}};
};

/// Chat-completions client: POST {base_url}/chat/completions with the
/// rendered prompt as a single user message, candidates read from
/// choices[*].message.content.
class RemoteBackend : public ProposalBackend {
 public:
  explicit RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
    if (config_.api_key.empty()) {
      if (const char* key = std::getenv(kApiKeyEnvVar)) config_.api_key = key;
    }
    if (config_.api_key.empty())
      throw ConfigError(std::string(kApiKeyEnvVar) + " is not set");
    if (config_.base_url.empty()) {
      const char* url = std::getenv(kBaseUrlEnvVar);
      config_.base_url = url ? url : kDefaultBaseUrl;
    }
    split_url(config_.base_url, origin_, path_prefix_);
  }

  std::string name() const override { return "llm-remote"; }

  std::vector<std::string> propose(const std::string& prompt, int count, Rng&) override {
    nlohmann::json body;
    body["model"] = config_.model;
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
    body["n"] = count;
    body["temperature"] = config_.temperature;
    body["max_tokens"] = config_.max_tokens;
    const std::string payload = body.dump();

    const std::size_t attempts = config_.retry_delays.size() + 1;
    int last_status = 0;
    std::string last_error;
    for (std::size_t attempt = 0; attempt < attempts; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(config_.retry_delays[attempt - 1]);

      httplib::Client client(origin_);
      client.set_connection_timeout(config_.timeout);
      client.set_read_timeout(config_.timeout);
      client.set_write_timeout(config_.timeout);
      httplib::Headers headers{{"Authorization", "Bearer " + config_.api_key}};

      auto res = client.Post(path_prefix_ + "/chat/completions", headers, payload,
                             "application/json");
      if (!res) {
        last_status = 0;
        last_error = "transport failure: " + httplib::to_string(res.error());
        continue;
      }
      last_status = res->status;
      if (res->status >= 200 && res->status < 300) return extract_candidates(res->body);
      if (res->status >= 400 && res->status < 500)
        throw TransportError("chat completions request rejected (HTTP " +
                                 std::to_string(res->status) + "): " + res->body,
                             res->status);
      last_error = "server error HTTP " + std::to_string(res->status);
    }
    throw TransportError(last_error + " after " +
                             std::to_string(config_.retry_delays.size()) + " retries",
                         last_status);
  }

  const RemoteConfig& config() const { return config_; }

 private:
  static void split_url(const std::string& url, std::string& origin, std::string& path) {
    const std::size_t scheme = url.find("://");
    if (scheme == std::string::npos)
      throw ConfigError("base URL must include a scheme: " + url);
    const std::size_t slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) {
      origin = url;
      path.clear();
    } else {
      origin = url.substr(0, slash);
      path = url.substr(slash);
      while (!path.empty() && path.back() == '/') path.pop_back();
    }
  }

  static std::vector<std::string> extract_candidates(const std::string& body) {
    nlohmann::json doc = nlohmann::json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("choices"))
      throw TransportError("unparseable chat completions response", 200);
    std::vector<std::string> out;
    for (const auto& choice : doc["choices"]) {
      if (choice.contains("message") && choice["message"].contains("content"))
        out.push_back(choice["message"]["content"].get<std::string>());
    }
    return out;
  }

  RemoteConfig config_;
  std::string origin_;
  std::string path_prefix_;
};

inline std::unique_ptr<ProposalBackend> remote_backend(RemoteConfig config = {}) {
  return std::make_unique<RemoteBackend>(std::move(config));
}

}  // namespace raforge
