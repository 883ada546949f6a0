// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "releasegate/llm_gateway.hpp"
#include "support/fake_endpoint.hpp"

namespace releasegate {
namespace {

ChatRequest user_request(const std::string& text, const std::string& tag = "") {
  ChatRequest r;
  r.system_prompt = "system";
  r.messages.push_back({"user", text});
  r.sample_tag = tag;
  return r;
}

Fixture fixture(std::string response) {
  Fixture f;
  f.response = std::move(response);
  return f;
}

TEST(ScriptedBackendTest, MatchersAndConsumptionOrder) {
  auto a = fixture("first");
  a.match = "alpha";
  auto b = fixture("second");
  b.match = "alpha";
  auto c = fixture("exact");
  c.equals = "beta";
  c.repeat = true;
  auto d = fixture("by-regex");
  d.regex = "^gam+a$";
  auto backend = std::make_shared<ScriptedBackend>(std::vector<Fixture>{a, b, c, d});
  LlmGateway g(backend);
  EXPECT_EQ(g.complete(user_request("x alpha y")).text, "first");
  EXPECT_EQ(g.complete(user_request("alpha")).text, "second");
  EXPECT_EQ(g.complete(user_request("beta")).text, "exact");
  EXPECT_EQ(g.complete(user_request("beta")).text, "exact");
  EXPECT_EQ(g.complete(user_request("gammma")).text, "by-regex");
  EXPECT_EQ(backend->calls(), 5u);
  EXPECT_EQ(backend->remaining(), 1u);  // the repeatable one
  try {
    g.complete(user_request("alpha"));
    FAIL() << "expected no_fixture";
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::no_fixture);
    EXPECT_NE(std::string(e.what()).find("alpha"), std::string::npos);
  }
}

TEST(ScriptedBackendTest, TagMatcherAndSimulatedTimeout) {
  auto a = fixture("tagged");
  a.tag = "plan#1";
  auto t = fixture("");
  t.fail = "timeout";
  LlmGateway g(std::make_shared<ScriptedBackend>(std::vector<Fixture>{a, t}));
  EXPECT_EQ(g.complete(user_request("q", "plan#1")).text, "tagged");
  try {
    g.complete(user_request("q", "plan#0"));
    FAIL() << "expected transport error";
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::transport);
  }
}

TEST(ScriptedBackendTest, FixturesRoundTripThroughJson) {
  auto a = fixture("r");
  a.match = "m";
  a.tag = "t";
  a.repeat = true;
  auto b = fixture("");
  b.fail = "timeout";
  b.regex = "x+";
  auto j = fixtures_to_json({a, b});
  auto back = fixtures_from_json(j);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].match, "m");
  EXPECT_EQ(back[0].tag, "t");
  EXPECT_TRUE(back[0].repeat);
  EXPECT_EQ(back[1].fail, "timeout");
  EXPECT_EQ(back[1].regex, "x+");
  EXPECT_EQ(fixtures_from_json(nlohmann::json{{"fixtures", j}}).size(), 2u);
  EXPECT_THROW(fixtures_from_json(nlohmann::json::parse(R"([{"response":"x","bogus":1}])")), GatewayError);
  EXPECT_THROW(ScriptedBackend(fixtures_from_json(nlohmann::json::parse(R"([{"response":"x","regex":"("}])"))),
               GatewayError);
  EXPECT_THROW(fixtures_from_json(nlohmann::json::parse(R"([{"match":"x"}])")), GatewayError);
}

TEST(GatewayTest, RejectsInvalidRequests) {
  LlmGateway g(std::make_shared<ScriptedBackend>(std::vector<Fixture>{}));
  ChatRequest empty;
  EXPECT_THROW(g.complete(empty), GatewayError);
  auto hot = user_request("x");
  hot.temperature = 2.5;
  try {
    g.complete(hot);
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::invalid_request);
  }
  EXPECT_THROW(g.complete_n(user_request("x"), 0, 1), GatewayError);
}

TEST(GatewayTest, CompleteNTagsSamplesAndKeepsOrder) {
  std::vector<Fixture> fs;
  for (int i = 2; i >= 0; --i) {
    auto f = fixture("reply" + std::to_string(i));
    f.tag = "plan#" + std::to_string(i);
    fs.push_back(f);
  }
  LlmGateway g(std::make_shared<ScriptedBackend>(fs));
  auto out = g.complete_n(user_request("q", "plan"), 3, 3);
  ASSERT_EQ(out.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(out[static_cast<std::size_t>(i)].text, "reply" + std::to_string(i));
}

TEST(GatewayTest, CompleteNIsAllOrNothing) {
  auto ok = fixture("fine");
  ok.tag = "#0";
  auto bad = fixture("");
  bad.tag = "#1";
  bad.fail = "timeout";
  auto ok2 = fixture("fine");
  ok2.tag = "#2";
  LlmGateway g(std::make_shared<ScriptedBackend>(std::vector<Fixture>{ok, bad, ok2}));
  try {
    g.complete_n(user_request("q", "s"), 3, 2);
    FAIL() << "expected sampling error";
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::sampling);
    EXPECT_EQ(e.failed_samples(), std::vector<std::size_t>{1});
  }
}

/// Backend that records its peak concurrency.
class SlowBackend : public ChatBackend {
 public:
  ChatResponse complete(const ChatRequest& request) override {
    const int now = ++active_;
    int seen = peak_.load();
    while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    --active_;
    return ChatResponse{request.sample_tag, 30, "slow", std::nullopt};
  }
  std::string id() const override { return "slow"; }
  int peak() const { return peak_; }

 private:
  std::atomic<int> active_{0};
  std::atomic<int> peak_{0};
};

TEST(GatewayTest, CompleteNBoundsParallelism) {
  auto backend = std::make_shared<SlowBackend>();
  LlmGateway g(backend);
  auto out = g.complete_n(user_request("q", "t"), 6, 2);
  ASSERT_EQ(out.size(), 6u);
  EXPECT_EQ(out[4].text, "t#4");
  EXPECT_LE(backend->peak(), 2);
  EXPECT_GE(backend->peak(), 1);
}

TEST(BackendConfigTest, JsonCarriesOnlyTheVariableName) {
  BackendConfig c;
  c.kind = BackendKind::http;
  c.endpoint = "https://llm.example.com/v1/chat/completions";
  c.credential_env = "RG_TEST_KEY";
  c.model = "m";
  ::setenv("RG_TEST_KEY", "sk-very-secret-value", 1);
  const auto text = backend_config_to_json(c).dump();
  EXPECT_EQ(text.find("sk-very-secret-value"), std::string::npos);
  EXPECT_NE(text.find("RG_TEST_KEY"), std::string::npos);
  auto back = backend_config_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(back.endpoint, c.endpoint);
  EXPECT_EQ(back.credential_env, "RG_TEST_KEY");
  EXPECT_THROW(backend_config_from_json(nlohmann::json::parse(R"({"api_key":"x"})")), GatewayError);
  EXPECT_THROW(backend_config_from_json(nlohmann::json::parse(R"({"kind":"carrier-pigeon"})")), GatewayError);
  ::unsetenv("RG_TEST_KEY");
}

TEST(BackendConfigTest, ChecksConfiguration) {
  BackendConfig http;
  http.kind = BackendKind::http;
  EXPECT_THROW(check_backend_config(http), GatewayError);  // no endpoint
  http.endpoint = "ftp://nowhere";
  http.credential_env = "X";
  EXPECT_THROW(make_backend(http), GatewayError);
  BackendConfig scripted;
  scripted.fixtures = "/nonexistent/fixtures.json";
  EXPECT_THROW(make_backend(scripted), GatewayError);
}

using testing::FakeEndpoint;

BackendConfig http_config(const std::string& endpoint) {
  BackendConfig c;
  c.kind = BackendKind::http;
  c.endpoint = endpoint;
  c.credential_env = "RG_FAKE_KEY";
  c.model = "fake-model";
  c.timeout_s = 5;
  c.max_retries_transport = 2;
  c.backoff_ms = 1;
  return c;
}

const char* kReply = R"({"choices":[{"message":{"role":"assistant","content":"hello"}}],
                         "usage":{"prompt_tokens":11,"completion_tokens":3}})";

TEST(HttpBackendTest, SendsBearerTokenAndParsesReply) {
  std::string auth, body;
  FakeEndpoint fake([&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    body = req.body;
    res.set_content(kReply, "application/json");
  });
  ::setenv("RG_FAKE_KEY", "sk-test-123", 1);
  LlmGateway g(http_config(fake.endpoint()));
  auto reply = g.complete(user_request("ping"));
  EXPECT_EQ(reply.text, "hello");
  ASSERT_TRUE(reply.usage.has_value());
  EXPECT_EQ(reply.usage->prompt, 11);
  EXPECT_EQ(auth, "Bearer sk-test-123");
  auto sent = nlohmann::json::parse(body);
  EXPECT_EQ(sent["model"], "fake-model");
  EXPECT_EQ(sent["messages"][0]["role"], "system");
  EXPECT_EQ(sent["messages"][1]["content"], "ping");
  ::unsetenv("RG_FAKE_KEY");
}

TEST(HttpBackendTest, RetriesServerErrorsThenSucceeds) {
  std::atomic<int> calls{0};
  FakeEndpoint fake([&](const httplib::Request&, httplib::Response& res) {
    if (++calls < 3) {
      res.status = 503;
      return;
    }
    res.set_content(kReply, "application/json");
  });
  ::setenv("RG_FAKE_KEY", "k", 1);
  LlmGateway g(http_config(fake.endpoint()));
  EXPECT_EQ(g.complete(user_request("ping")).text, "hello");
  EXPECT_EQ(calls.load(), 3);
  ::unsetenv("RG_FAKE_KEY");
}

TEST(HttpBackendTest, GivesUpAfterRetryBudget) {
  std::atomic<int> calls{0};
  FakeEndpoint fake([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 500;
  });
  ::setenv("RG_FAKE_KEY", "k", 1);
  LlmGateway g(http_config(fake.endpoint()));
  try {
    g.complete(user_request("ping"));
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::transport);
  }
  EXPECT_EQ(calls.load(), 3);
  ::unsetenv("RG_FAKE_KEY");
}

TEST(HttpBackendTest, CredentialProblems) {
  std::atomic<int> calls{0};
  FakeEndpoint fake([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 401;
  });
  ::unsetenv("RG_FAKE_KEY");
  LlmGateway g(http_config(fake.endpoint()));
  try {
    g.complete(user_request("ping"));
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::credential);
    EXPECT_NE(std::string(e.what()).find("RG_FAKE_KEY"), std::string::npos);
  }
  EXPECT_EQ(calls.load(), 0);  // no request without a key

  ::setenv("RG_FAKE_KEY", "sk-wrong-secret", 1);
  try {
    g.complete(user_request("ping"));
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::credential);
    EXPECT_EQ(std::string(e.what()).find("sk-wrong-secret"), std::string::npos);
  }
  EXPECT_EQ(calls.load(), 1);  // not retried
  ::unsetenv("RG_FAKE_KEY");
}

TEST(HttpBackendTest, MalformedReplyIsAProtocolError) {
  FakeEndpoint fake([&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices":[]})", "application/json");
  });
  ::setenv("RG_FAKE_KEY", "k", 1);
  LlmGateway g(http_config(fake.endpoint()));
  try {
    g.complete(user_request("ping"));
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::protocol);
  }
  ::unsetenv("RG_FAKE_KEY");
}

TEST(HttpBackendTest, UnreachableEndpointIsATransportError) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  ::setenv("RG_FAKE_KEY", "k", 1);
  auto cfg = http_config("http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions");
  cfg.max_retries_transport = 1;
  cfg.timeout_s = 0.5;
  LlmGateway g(cfg);
  try {
    g.complete(user_request("ping"));
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::transport);
  }
  ::unsetenv("RG_FAKE_KEY");
}

}  // namespace
}  // namespace releasegate
