// SPDX-License-Identifier: Apache-2.0
#include "releasegate/llm_gateway.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <thread>

namespace releasegate {

using nlohmann::json;

GatewayError::GatewayError(GatewayErrorKind kind, std::string message, std::vector<std::size_t> failed_samples)
    : std::runtime_error(std::move(message)), kind_(kind), failed_samples_(std::move(failed_samples)) {}

std::string_view to_string(GatewayErrorKind kind) {
  switch (kind) {
    case GatewayErrorKind::config: return "config";
    case GatewayErrorKind::credential: return "credential";
    case GatewayErrorKind::transport: return "transport";
    case GatewayErrorKind::protocol: return "protocol";
    case GatewayErrorKind::no_fixture: return "no_fixture";
    case GatewayErrorKind::invalid_request: return "invalid_request";
    case GatewayErrorKind::sampling: return "sampling";
  }
  return "?";
}

void check_backend_config(const BackendConfig& c) {
  if (c.kind == BackendKind::http) {
    if (c.endpoint.empty()) throw GatewayError(GatewayErrorKind::config, "http backend requires backend.endpoint");
    if (c.credential_env.empty()) {
      throw GatewayError(GatewayErrorKind::config, "http backend requires backend.credential_env");
    }
  } else if (c.fixtures.empty()) {
    throw GatewayError(GatewayErrorKind::config, "scripted backend requires backend.fixtures");
  }
  if (!(c.timeout_s > 0)) throw GatewayError(GatewayErrorKind::config, "backend.timeout_s must be positive");
  if (c.max_retries_transport < 0) {
    throw GatewayError(GatewayErrorKind::config, "backend.max_retries_transport must be >= 0");
  }
}

BackendConfig backend_config_from_json(const json& j) {
  if (!j.is_object()) throw GatewayError(GatewayErrorKind::config, "backend config must be an object");
  BackendConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "kind") {
        const auto kind = value.get<std::string>();
        if (kind == "http") {
          c.kind = BackendKind::http;
        } else if (kind == "scripted") {
          c.kind = BackendKind::scripted;
        } else {
          throw GatewayError(GatewayErrorKind::config, "unknown backend.kind '" + kind + "'");
        }
      } else if (key == "endpoint") {
        c.endpoint = value.get<std::string>();
      } else if (key == "credential_env") {
        c.credential_env = value.get<std::string>();
      } else if (key == "model") {
        c.model = value.get<std::string>();
      } else if (key == "timeout_s") {
        c.timeout_s = value.get<double>();
      } else if (key == "max_retries_transport") {
        c.max_retries_transport = value.get<int>();
      } else if (key == "backoff_ms") {
        c.backoff_ms = value.get<int>();
      } else if (key == "fixtures") {
        c.fixtures = value.get<std::string>();
      } else {
        throw GatewayError(GatewayErrorKind::config, "unknown backend key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw GatewayError(GatewayErrorKind::config, std::string("bad backend config: ") + e.what());
  }
  return c;
}

json backend_config_to_json(const BackendConfig& c) {
  json j;
  j["kind"] = c.kind == BackendKind::http ? "http" : "scripted";
  if (!c.endpoint.empty()) j["endpoint"] = c.endpoint;
  if (!c.credential_env.empty()) j["credential_env"] = c.credential_env;
  if (!c.model.empty()) j["model"] = c.model;
  j["timeout_s"] = c.timeout_s;
  j["max_retries_transport"] = c.max_retries_transport;
  j["backoff_ms"] = c.backoff_ms;
  if (!c.fixtures.empty()) j["fixtures"] = c.fixtures;
  return j;
}

// ---------------------------------------------------------------------------
// Fixtures
// ---------------------------------------------------------------------------

std::vector<Fixture> fixtures_from_json(const json& j) {
  const json* list = &j;
  if (j.is_object() && j.contains("fixtures")) list = &j.at("fixtures");
  if (!list->is_array()) throw GatewayError(GatewayErrorKind::config, "fixture file must be a list of records");
  std::vector<Fixture> out;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const auto& item = (*list)[i];
    if (!item.is_object()) throw GatewayError(GatewayErrorKind::config, "fixture " + std::to_string(i) + " is not an object");
    Fixture f;
    try {
      for (const auto& [key, value] : item.items()) {
        if (key == "match") {
          f.match = value.get<std::string>();
        } else if (key == "regex") {
          f.regex = value.get<std::string>();
        } else if (key == "equals") {
          f.equals = value.get<std::string>();
        } else if (key == "tag") {
          f.tag = value.get<std::string>();
        } else if (key == "response") {
          f.response = value.get<std::string>();
        } else if (key == "fail") {
          f.fail = value.get<std::string>();
        } else if (key == "repeat") {
          f.repeat = value.get<bool>();
        } else {
          throw GatewayError(GatewayErrorKind::config, "fixture " + std::to_string(i) + ": unknown key '" + key + "'");
        }
      }
    } catch (const json::exception& e) {
      throw GatewayError(GatewayErrorKind::config, "fixture " + std::to_string(i) + ": " + e.what());
    }
    if (!item.contains("response") && !f.fail) {
      throw GatewayError(GatewayErrorKind::config, "fixture " + std::to_string(i) + " has neither response nor fail");
    }
    out.push_back(std::move(f));
  }
  return out;
}

json fixtures_to_json(const std::vector<Fixture>& fixtures) {
  json out = json::array();
  for (const auto& f : fixtures) {
    json j;
    if (f.match) j["match"] = *f.match;
    if (f.regex) j["regex"] = *f.regex;
    if (f.equals) j["equals"] = *f.equals;
    if (f.tag) j["tag"] = *f.tag;
    if (f.fail) {
      j["fail"] = *f.fail;
    } else {
      j["response"] = f.response;
    }
    if (f.repeat) j["repeat"] = true;
    out.push_back(std::move(j));
  }
  return out;
}

std::vector<Fixture> load_fixtures(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GatewayError(GatewayErrorKind::config, "cannot read fixture file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw GatewayError(GatewayErrorKind::config, "fixture file " + path.string() + ": " + e.what());
  }
  return fixtures_from_json(j);
}

ScriptedBackend::ScriptedBackend(std::vector<Fixture> fixtures) {
  for (auto& f : fixtures) {
    Entry e;
    if (f.regex) {
      try {
        e.pattern.emplace(*f.regex, std::regex::ECMAScript);
      } catch (const std::regex_error& err) {
        throw GatewayError(GatewayErrorKind::config, "bad fixture regex '" + *f.regex + "': " + err.what());
      }
    }
    e.fixture = std::move(f);
    entries_.push_back(std::move(e));
  }
}

ChatResponse ScriptedBackend::complete(const ChatRequest& request) {
  const auto start = std::chrono::steady_clock::now();
  std::string last_user;
  for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
    if (it->role == "user") {
      last_user = it->text;
      break;
    }
  }
  std::lock_guard lock(mu_);
  ++calls_;
  for (auto& e : entries_) {
    if (e.used) continue;
    const auto& f = e.fixture;
    if (f.match && last_user.find(*f.match) == std::string::npos) continue;
    if (f.equals && last_user != *f.equals) continue;
    if (e.pattern && !std::regex_search(last_user, *e.pattern)) continue;
    if (f.tag && request.sample_tag.find(*f.tag) == std::string::npos) continue;
    if (!f.repeat) e.used = true;
    if (f.fail) {
      throw GatewayError(GatewayErrorKind::transport, "scripted " + *f.fail + " for tag '" + request.sample_tag + "'");
    }
    ChatResponse r;
    r.text = f.response;
    r.backend_id = id();
    r.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return r;
  }
  std::string shown = last_user.size() > 200 ? last_user.substr(0, 200) + "..." : last_user;
  throw GatewayError(GatewayErrorKind::no_fixture,
                     "no fixture matches message '" + shown + "' (tag '" + request.sample_tag + "')");
}

std::size_t ScriptedBackend::remaining() const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(), [](const Entry& e) { return !e.used; }));
}

std::size_t ScriptedBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::shared_ptr<ChatBackend> make_backend(const BackendConfig& config) {
  check_backend_config(config);
  if (config.kind == BackendKind::http) return std::make_shared<HttpBackend>(config);
  return std::make_shared<ScriptedBackend>(load_fixtures(config.fixtures));
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

LlmGateway::LlmGateway(std::shared_ptr<ChatBackend> backend) : backend_(std::move(backend)) {
  if (!backend_) throw GatewayError(GatewayErrorKind::config, "gateway needs a backend");
}

LlmGateway::LlmGateway(const BackendConfig& config) : LlmGateway(make_backend(config)) {}

namespace {

void check_request(const ChatRequest& r) {
  if (r.messages.empty()) throw GatewayError(GatewayErrorKind::invalid_request, "request has no messages");
  if (!(r.temperature >= 0 && r.temperature <= 2)) {
    throw GatewayError(GatewayErrorKind::invalid_request, "temperature must be within [0, 2]");
  }
  for (const auto& m : r.messages) {
    if (m.role != "user" && m.role != "assistant") {
      throw GatewayError(GatewayErrorKind::invalid_request, "message role must be user or assistant");
    }
  }
}

}  // namespace

ChatResponse LlmGateway::complete(const ChatRequest& request) const {
  check_request(request);
  return backend_->complete(request);
}

std::vector<ChatResponse> LlmGateway::complete_n(const ChatRequest& request, std::size_t n,
                                                 std::size_t parallelism) const {
  if (n < 1) throw GatewayError(GatewayErrorKind::invalid_request, "n must be at least 1");
  if (parallelism < 1) throw GatewayError(GatewayErrorKind::invalid_request, "parallelism must be at least 1");
  check_request(request);

  std::vector<ChatRequest> requests(n, request);
  for (std::size_t i = 0; i < n; ++i) requests[i].sample_tag = request.sample_tag + "#" + std::to_string(i);

  std::vector<std::optional<ChatResponse>> results(n);
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        results[i] = backend_->complete(requests[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const std::size_t width = std::min({parallelism, n, backend_->max_parallelism()});
  if (width <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(width);
    for (std::size_t t = 0; t < width; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  std::vector<std::size_t> failed;
  std::string message;
  for (std::size_t i = 0; i < n; ++i) {
    if (!results[i]) {
      failed.push_back(i);
      message += (message.empty() ? "" : "; ") + std::string("sample ") + std::to_string(i) + ": " + errors[i];
    }
  }
  if (!failed.empty()) {
    std::string summary =
        std::to_string(failed.size()) + " of " + std::to_string(n) + " samples failed: " + message;
    throw GatewayError(GatewayErrorKind::sampling, std::move(summary), std::move(failed));
  }
  std::vector<ChatResponse> out;
  out.reserve(n);
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

}  // namespace releasegate
