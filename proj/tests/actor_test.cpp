// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "releasegate/actor.hpp"
#include "releasegate/csv.hpp"
#include "releasegate/executor.hpp"
#include "releasegate/plan_wire.hpp"
#include "releasegate/planner.hpp"
#include "releasegate/synthetic.hpp"

namespace releasegate {
namespace {

struct Fixture3 {
  SyntheticDataset ds = generate(GeneratorConfig{7, 3000, 12, 30});
};

const SyntheticDataset& small() {
  static const Fixture3 f;
  return f.ds;
}

const char* kFailMost = R"({"steps":[
  {"kind":"slice","select":["test_case_function"],"where":{"and":[
     {"col":"release_candidate","op":"eq","value":"RC7"},{"col":"test_status","op":"eq","value":"failed"}]}},
  {"kind":"aggregate","func":"count","group_by":["test_case_function"]},
  {"kind":"sort","keys":[{"col":"count","order":"desc"}]},
  {"kind":"limit","n":5}]})";

PlanDecision decision_for(const char* plan_text) {
  PlanDecision d;
  d.query = "Which five functions fail most on RC7?";
  d.chosen = parse_plan(plan_text, small().table.schema());
  return d;
}

Fixture step_reply(const std::string& tag, const std::string& text) {
  Fixture f;
  f.tag = tag;
  f.response = text;
  return f;
}

TEST(ActorTest, ModeNames) {
  EXPECT_EQ(parse_actor_mode("safe"), ActorMode::safe);
  EXPECT_EQ(parse_actor_mode("nl"), ActorMode::natural_language);
  EXPECT_EQ(parse_actor_mode("natural_language"), ActorMode::natural_language);
  EXPECT_FALSE(parse_actor_mode("yolo").has_value());
  EXPECT_EQ(to_string(ActorMode::natural_language), "natural_language");
}

TEST(ActorTest, SafeModeExecutesTheChosenPlan) {
  auto d = decision_for(kFailMost);
  auto r = run(d, std::nullopt, small().table, small().kb, nullptr, ReflectionConfig{});
  auto expected = execute_plan(d.chosen, small().table).table;
  EXPECT_EQ(canonical_table_text(r.final_table), canonical_table_text(expected));
  EXPECT_EQ(r.reflection_attempts_total, 0u);
  EXPECT_TRUE(r.memory.empty());
  EXPECT_EQ(r.trace.steps.size(), 4u);
}

TEST(ActorTest, NaturalLanguageModeRealizesEachStep) {
  auto d = decision_for(kFailMost);
  const auto sentences = render_steps(d.chosen);
  std::vector<Fixture> fs;
  for (std::size_t i = 0; i < d.chosen.steps.size(); ++i) {
    fs.push_back(step_reply("actor/step" + std::to_string(i) + "/attempt0",
                            "```json\n" + step_to_wire(d.chosen.steps[i]) + "\n```"));
  }
  LlmGateway g(std::make_shared<ScriptedBackend>(fs));
  ReflectionConfig cfg{3, ActorMode::natural_language};
  auto r = run(d, std::nullopt, small().table, small().kb, &g, cfg);
  EXPECT_EQ(canonical_table_text(r.final_table),
            canonical_table_text(execute_plan(d.chosen, small().table).table));
  EXPECT_EQ(r.reflection_attempts_total, 0u);
  ASSERT_EQ(r.memory.size(), 4u);
  EXPECT_TRUE(r.memory[3].execution_excerpt.has_value());
  EXPECT_NE(r.memory[0].task_context.find(d.query), std::string::npos);
  EXPECT_EQ(canonicalize(r.plan_executed, small().table.schema()), canonicalize(d.chosen, small().table.schema()));
}

TEST(ActorTest, ReflectionRecoversFromAWrongColumn) {
  auto d = decision_for(kFailMost);
  std::vector<Fixture> fs;
  fs.push_back(step_reply("actor/step0/", "```json\n" + step_to_wire(d.chosen.steps[0]) + "\n```"));
  fs.push_back(step_reply("actor/step1/", "```json\n" + step_to_wire(d.chosen.steps[1]) + "\n```"));
  // Step 3: first attempt names a column that does not exist yet.
  fs.push_back(step_reply("actor/step2/attempt0", R"({"kind":"sort","keys":[{"col":"cnt","order":"desc"}]})"));
  fs.push_back(step_reply("actor/step2/attempt1", "```json\n" + step_to_wire(d.chosen.steps[2]) + "\n```"));
  fs.push_back(step_reply("actor/step3/", "```json\n" + step_to_wire(d.chosen.steps[3]) + "\n```"));
  auto backend = std::make_shared<ScriptedBackend>(fs);
  LlmGateway g(backend);
  auto r = run(d, std::nullopt, small().table, small().kb, &g, ReflectionConfig{3, ActorMode::natural_language});
  EXPECT_EQ(r.reflection_attempts_total, 1u);
  ASSERT_EQ(r.memory.size(), 5u);
  ASSERT_TRUE(r.memory[2].error.has_value());
  EXPECT_NE(r.memory[2].error->find("cnt"), std::string::npos);
  EXPECT_EQ(r.memory[3].attempt_index, 1u);
  EXPECT_EQ(backend->remaining(), 0u);
  EXPECT_EQ(canonical_table_text(r.final_table),
            canonical_table_text(execute_plan(d.chosen, small().table).table));
}

/// Backend that records the system prompt of every actor call.
class RecordingBackend : public ChatBackend {
 public:
  explicit RecordingBackend(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  ChatResponse complete(const ChatRequest& request) override {
    prompts.push_back(request.system_prompt);
    return ChatResponse{replies_.at(prompts.size() - 1), 0, "rec", std::nullopt};
  }
  std::string id() const override { return "rec"; }
  std::vector<std::string> prompts;

 private:
  std::vector<std::string> replies_;
};

TEST(ActorTest, MemoryFeedsTheNextAttempt) {
  auto backend = std::make_shared<RecordingBackend>(std::vector<std::string>{
      R"({"kind":"sort","keys":[{"col":"nope","order":"desc"}]})",
      R"({"kind":"sort","keys":[{"col":"duration_s","order":"sideways"}]})",
      R"({"kind":"sort","keys":[{"col":"duration_s","order":"desc"}]})"});
  LlmGateway g(backend);
  std::vector<MemoryRecord> memory;
  auto r = realize_step("Sort by duration, longest first.", 0, "ctx", {}, small().table, small().table.schema(),
                        small().kb, g, ReflectionConfig{3, ActorMode::natural_language}, memory);
  EXPECT_EQ(r.reflection_attempts, 2u);
  ASSERT_EQ(backend->prompts.size(), 3u);
  EXPECT_EQ(backend->prompts[0].find("Previous attempts"), std::string::npos);
  EXPECT_NE(backend->prompts[1].find("nope"), std::string::npos);
  EXPECT_NE(backend->prompts[2].find("nope"), std::string::npos);
  EXPECT_NE(backend->prompts[2].find("sideways"), std::string::npos);
}

TEST(ActorTest, RetryBudgetExhaustedIsARealizationFailure) {
  std::vector<std::string> bad(4, "not a step");
  auto backend = std::make_shared<RecordingBackend>(bad);
  LlmGateway g(backend);
  std::vector<MemoryRecord> memory;
  try {
    realize_step("Do something.", 2, "ctx", {}, small().table, small().table.schema(), small().kb, g,
                 ReflectionConfig{3, ActorMode::natural_language}, memory);
    FAIL();
  } catch (const RealizationFailure& e) {
    EXPECT_EQ(e.step_index(), 2u);
    EXPECT_EQ(e.memory().size(), 4u);
  }
  EXPECT_EQ(backend->prompts.size(), 4u);

  auto zero = std::make_shared<RecordingBackend>(bad);
  LlmGateway g0(zero);
  memory.clear();
  EXPECT_THROW(realize_step("x", 0, "ctx", {}, small().table, small().table.schema(), small().kb, g0,
                            ReflectionConfig{0, ActorMode::natural_language}, memory),
               RealizationFailure);
  EXPECT_EQ(zero->prompts.size(), 1u);
}

TEST(ActorTest, NaturalLanguageModeNeedsAGateway) {
  auto d = decision_for(kFailMost);
  EXPECT_THROW(run(d, std::nullopt, small().table, small().kb, nullptr,
                   ReflectionConfig{3, ActorMode::natural_language}),
               std::invalid_argument);
}

TEST(ActorTest, ExcerptShowsAtMostFiveRows) {
  auto ex = table_excerpt(small().table);
  EXPECT_NE(ex.find("(3000 rows)"), std::string::npos);
  EXPECT_EQ(std::count(ex.begin(), ex.end(), '\n'), 6);  // header plus five rows
}

TEST(ActorTest, MemoryJson) {
  MemoryRecord m;
  m.step_index = 1;
  m.attempt_index = 2;
  m.emitted_document = "{}";
  m.error = "bad";
  m.task_context = "ctx";
  auto j = memory_to_json({m});
  EXPECT_EQ(j[0]["error"], "bad");
  EXPECT_FALSE(j[0].contains("execution_excerpt"));
}

TEST(PluginTest, RegistryResolvesAndRejectsDuplicates) {
  auto reg = default_plugins();
  register_synthetic_plugin(reg);
  EXPECT_EQ(reg.names(), (std::vector<std::string>{"csv", "synthetic"}));
  EXPECT_THROW(reg.register_plugin("csv", [](const LoadRequest&) { return Table::empty(synthetic_schema(GeneratorConfig{})); }), PluginError);
  EXPECT_THROW(reg.resolve("parquet"), PluginError);
  LoadRequest req;
  req.options = {{"rows", "200"}, {"seed", "3"}};
  auto t = reg.resolve("synthetic")(req);
  EXPECT_EQ(t.row_count(), 200u);
  EXPECT_EQ(t.column_count(), 40u);

  auto path = std::filesystem::temp_directory_path() / "releasegate_plugin.csv";
  export_csv(t, path);
  LoadRequest csv_req;
  csv_req.source = path.string();
  EXPECT_THROW(reg.resolve("csv")(csv_req), PluginError);  // schema required
  csv_req.schema = t.schema();
  EXPECT_EQ(canonical_table_text(reg.resolve("csv")(csv_req)), canonical_table_text(t));
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace releasegate
