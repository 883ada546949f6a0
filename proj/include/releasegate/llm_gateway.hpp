// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace releasegate {

struct ChatMessage {
  std::string role;  // "user" or "assistant"
  std::string text;
};

struct ChatRequest {
  std::string system_prompt;
  std::vector<ChatMessage> messages;
  double temperature = 0.7;
  int max_tokens = 1024;
  /// Correlates the samples of one self-consistency draw; complete_n appends `#<index>`.
  std::string sample_tag;
};

struct TokenUsage {
  std::int64_t prompt = 0;
  std::int64_t completion = 0;
};

struct ChatResponse {
  std::string text;
  double latency_ms = 0;
  std::string backend_id;
  std::optional<TokenUsage> usage;
};

enum class BackendKind { http, scripted };

/// Backend selection. For http, `credential_env` names the environment variable holding
/// the API key; the key itself is never stored.
struct BackendConfig {
  BackendKind kind = BackendKind::scripted;
  std::string endpoint;
  std::string credential_env;
  std::string model;
  double timeout_s = 60;
  int max_retries_transport = 2;
  /// First retry delay; doubles per attempt.
  int backoff_ms = 500;
  /// Scripted backend fixture file.
  std::string fixtures;
};

enum class GatewayErrorKind { config, credential, transport, protocol, no_fixture, invalid_request, sampling };

class GatewayError : public std::runtime_error {
 public:
  GatewayError(GatewayErrorKind kind, std::string message, std::vector<std::size_t> failed_samples = {});

  GatewayErrorKind kind() const { return kind_; }
  /// Sample indices that failed, for sampling errors.
  const std::vector<std::size_t>& failed_samples() const { return failed_samples_; }

 private:
  GatewayErrorKind kind_;
  std::vector<std::size_t> failed_samples_;
};

std::string_view to_string(GatewayErrorKind kind);

/// Throws GatewayError(config) when the config cannot produce a working backend.
void check_backend_config(const BackendConfig& config);
BackendConfig backend_config_from_json(const nlohmann::json& j);
/// Serialized form; carries the credential variable name only.
nlohmann::json backend_config_to_json(const BackendConfig& config);

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual std::string id() const = 0;
  /// Upper bound on concurrent complete() calls the backend wants.
  virtual std::size_t max_parallelism() const { return static_cast<std::size_t>(-1); }
};

// ---------------------------------------------------------------------------
// Scripted backend
// ---------------------------------------------------------------------------

/// One canned reply. Every matcher that is set must hold: `match` is a substring test,
/// `regex` a search and `equals` an exact comparison, all over the last user message;
/// `tag` is a substring test over the request's sample tag. With no matcher set the fixture
/// matches anything. `fail = "timeout"` simulates a transport failure instead of replying.
struct Fixture {
  std::optional<std::string> match;
  std::optional<std::string> regex;
  std::optional<std::string> equals;
  std::optional<std::string> tag;
  std::string response;
  std::optional<std::string> fail;
  /// Stays available after use.
  bool repeat = false;
};

std::vector<Fixture> fixtures_from_json(const nlohmann::json& j);
nlohmann::json fixtures_to_json(const std::vector<Fixture>& fixtures);
std::vector<Fixture> load_fixtures(const std::filesystem::path& path);

/// Replies from fixtures in file order: each call takes the first unused fixture whose
/// matchers accept the request. Calls are serialized so consumption is deterministic.
class ScriptedBackend : public ChatBackend {
 public:
  explicit ScriptedBackend(std::vector<Fixture> fixtures);

  ChatResponse complete(const ChatRequest& request) override;
  std::string id() const override { return "scripted"; }
  std::size_t max_parallelism() const override { return 1; }

  std::size_t remaining() const;
  std::size_t calls() const;

 private:
  struct Entry {
    Fixture fixture;
    std::optional<std::regex> pattern;
    bool used = false;
  };
  mutable std::mutex mu_;
  std::vector<Entry> entries_;
  std::size_t calls_ = 0;
};

// ---------------------------------------------------------------------------
// HTTP backend (OpenAI-compatible chat/completions)
// ---------------------------------------------------------------------------

class HttpBackend : public ChatBackend {
 public:
  /// Throws GatewayError(config) on a malformed endpoint.
  explicit HttpBackend(BackendConfig config);

  ChatResponse complete(const ChatRequest& request) override;
  std::string id() const override;

 private:
  BackendConfig config_;
  std::string base_;  // scheme://host[:port]
  std::string path_;
};

std::shared_ptr<ChatBackend> make_backend(const BackendConfig& config);

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

class LlmGateway {
 public:
  explicit LlmGateway(std::shared_ptr<ChatBackend> backend);
  explicit LlmGateway(const BackendConfig& config);

  /// Throws GatewayError(invalid_request) for an empty message list or a temperature
  /// outside [0, 2].
  ChatResponse complete(const ChatRequest& request) const;

  /// `n` completions of the same request, at most `parallelism` in flight, returned in
  /// sample order. All-or-nothing: any failed sample fails the call with a sampling error
  /// listing every failed index.
  std::vector<ChatResponse> complete_n(const ChatRequest& request, std::size_t n, std::size_t parallelism) const;

  const ChatBackend& backend() const { return *backend_; }

 private:
  std::shared_ptr<ChatBackend> backend_;
};

}  // namespace releasegate
