// SPDX-License-Identifier: Apache-2.0
#include <chrono>
#include <cstdlib>
#include <regex>
#include <thread>

#include <httplib.h>

#include "releasegate/llm_gateway.hpp"

namespace releasegate {

using nlohmann::json;

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {
  static const std::regex url(R"(^(https?)://([^/:]+)(:\d+)?(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.endpoint, m, url)) {
    throw GatewayError(GatewayErrorKind::config, "malformed backend.endpoint '" + config_.endpoint + "'");
  }
  base_ = m[1].str() + "://" + m[2].str() + m[3].str();
  path_ = m[4].matched ? m[4].str() : "/v1/chat/completions";
}

std::string HttpBackend::id() const { return "http:" + (config_.model.empty() ? base_ : config_.model); }

namespace {

json request_body(const ChatRequest& request, const std::string& model) {
  json messages = json::array();
  if (!request.system_prompt.empty()) messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.text}});
  json body = {{"messages", std::move(messages)}, {"temperature", request.temperature}, {"max_tokens", request.max_tokens}};
  if (!model.empty()) body["model"] = model;
  return body;
}

ChatResponse parse_reply(const std::string& body, const std::string& backend_id) {
  ChatResponse r;
  r.backend_id = backend_id;
  try {
    auto j = json::parse(body);
    r.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
    if (j.contains("usage") && j["usage"].is_object()) {
      TokenUsage u;
      u.prompt = j["usage"].value("prompt_tokens", std::int64_t{0});
      u.completion = j["usage"].value("completion_tokens", std::int64_t{0});
      r.usage = u;
    }
  } catch (const json::exception& e) {
    throw GatewayError(GatewayErrorKind::protocol, std::string("unexpected chat-completion reply: ") + e.what());
  }
  return r;
}

}  // namespace

ChatResponse HttpBackend::complete(const ChatRequest& request) {
  const char* secret = std::getenv(config_.credential_env.c_str());
  if (secret == nullptr || *secret == '\0') {
    throw GatewayError(GatewayErrorKind::credential,
                       "credential variable " + config_.credential_env + " is not set");
  }
  const std::string payload = request_body(request, config_.model).dump();
  const auto timeout = std::chrono::milliseconds(static_cast<std::int64_t>(config_.timeout_s * 1000));

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries_transport; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<std::int64_t>(config_.backoff_ms) << (attempt - 1)));
    }
    httplib::Client client(base_);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    client.set_bearer_token_auth(secret);
    const auto start = std::chrono::steady_clock::now();
    auto res = client.Post(path_, payload, "application/json");
    const double elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "server returned HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status == 401 || res->status == 403) {
      throw GatewayError(GatewayErrorKind::credential, "endpoint rejected credentials (HTTP " + std::to_string(res->status) + ")");
    }
    if (res->status != 200) {
      throw GatewayError(GatewayErrorKind::protocol, "endpoint returned HTTP " + std::to_string(res->status));
    }
    auto reply = parse_reply(res->body, id());
    reply.latency_ms = elapsed;
    return reply;
  }
  throw GatewayError(GatewayErrorKind::transport,
                     "gave up after " + std::to_string(config_.max_retries_transport + 1) + " attempts: " + last_error);
}

}  // namespace releasegate
