// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "releasegate/plan.hpp"
#include "releasegate/plan_wire.hpp"
#include "support/random_gen.hpp"

namespace releasegate {
namespace {

Schema gate_schema() {
  return Schema({{"release_candidate", ColumnType::text, "", std::nullopt},
                 {"status", ColumnType::text, "", std::vector<std::string>{"passed", "failed", "N/A", "blocked"}},
                 {"test_function", ColumnType::text, "", std::nullopt},
                 {"duration_s", ColumnType::floating, "", std::nullopt},
                 {"retries", ColumnType::integer, "", std::nullopt}});
}

constexpr const char* kSliceDoc = R"({"steps": [{"kind": "slice", "select": ["test_function"],
  "where": {"and": [{"col": "release_candidate", "op": "eq", "value": "RC7"},
                    {"col": "status", "op": "eq", "value": "failed"}]}}]})";

TEST(ParsePlanTest, SliceDocumentGivesOneStep) {
  auto plan = parse_plan(kSliceDoc, gate_schema());
  ASSERT_EQ(plan.steps.size(), 1u);
  const auto& s = std::get<SliceStep>(plan.steps[0]);
  ASSERT_TRUE(s.select.has_value());
  EXPECT_EQ(*s.select, std::vector<std::string>{"test_function"});
  EXPECT_TRUE(validate_plan(plan, gate_schema()).empty());
}

TEST(ParsePlanTest, UnknownColumnSuggestsNearMatch) {
  try {
    parse_plan(R"({"steps":[{"kind":"slice","select":["Relese_Candidat"]}]})", gate_schema());
    FAIL();
  } catch (const PlanError& e) {
    EXPECT_EQ(e.kind(), PlanErrorKind::unknown_column);
    EXPECT_EQ(e.column(), "Relese_Candidat");
    ASSERT_FALSE(e.suggestions().empty());
    EXPECT_EQ(e.suggestions()[0], "release_candidate");
  }
}

TEST(ParsePlanTest, EmptyStepListIsSyntaxError) {
  try {
    parse_plan(R"({"steps": []})", gate_schema());
    FAIL();
  } catch (const PlanError& e) {
    EXPECT_EQ(e.kind(), PlanErrorKind::syntax);
  }
}

TEST(ParsePlanTest, RejectsStepKindsOutsideTheVocabulary) {
  EXPECT_THROW(parse_plan(R"({"steps":[{"kind":"join","with":"other"}]})", gate_schema()), PlanError);
  EXPECT_THROW(parse_plan(R"({"steps":[{"kind":"limit","n":2,"code":"rm -rf /"}]})", gate_schema()), PlanError);
  EXPECT_THROW(parse_plan(R"({"steps":[{"kind":"limit","n":0}]})", gate_schema()), PlanError);
}

TEST(ParsePlanTest, SyntaxErrorCarriesPosition) {
  try {
    parse_plan("{\"steps\": [", gate_schema());
    FAIL();
  } catch (const PlanError& e) {
    EXPECT_EQ(e.kind(), PlanErrorKind::syntax);
    EXPECT_TRUE(e.position().has_value());
  }
}

TEST(ParsePlanTest, StripsFenceAndResolvesCasing) {
  auto plan = parse_plan("Reasoning first.\n```json\n{\"steps\":[{\"kind\":\"sort\",\"keys\":[{\"col\":\"STATUS\"}]}]}\n```\n",
                         gate_schema());
  const auto& s = std::get<SortStep>(plan.steps[0]);
  EXPECT_EQ(s.keys[0].column, "status");
  EXPECT_EQ(s.keys[0].order, SortOrder::asc);
}

TEST(ParsePlanTest, OperandTypeMismatchIsTypeError) {
  try {
    parse_plan(R"({"steps":[{"kind":"slice","where":{"col":"retries","op":"gt","value":"three"}}]})", gate_schema());
    FAIL();
  } catch (const PlanError& e) {
    EXPECT_EQ(e.kind(), PlanErrorKind::type);
  }
}

TEST(ValidatePlanTest, ColumnDroppedByEarlierSlice) {
  AnalysisPlan plan{{SliceStep{std::vector<std::string>{"status"}, std::nullopt}, SortStep{{{"release_candidate", SortOrder::asc}}}}};
  auto report = validate_plan(plan, gate_schema());
  ASSERT_EQ(report.size(), 1u);
  EXPECT_EQ(report[0].step, 1u);
  EXPECT_EQ(report[0].kind, PlanErrorKind::unknown_column);
}

TEST(ValidatePlanTest, MeanOverTextIsRejected) {
  AnalysisPlan plan{{AggregateStep{AggFunc::mean, "status", {}}}};
  EXPECT_EQ(validate_plan(plan, gate_schema()).size(), 1u);
}

TEST(ValidatePlanTest, OnlyLimitMayFollowScalarAggregate) {
  AnalysisPlan ok{{AggregateStep{AggFunc::count, std::nullopt, {}}, LimitStep{1}}};
  EXPECT_TRUE(validate_plan(ok, gate_schema()).empty());
  AnalysisPlan bad{{AggregateStep{AggFunc::count, std::nullopt, {}}, SortStep{{{"count", SortOrder::desc}}}}};
  EXPECT_FALSE(validate_plan(bad, gate_schema()).empty());
}

TEST(ValidatePlanTest, GroupByMustNotContainAggregatedColumn) {
  AnalysisPlan plan{{AggregateStep{AggFunc::max, "duration_s", {"duration_s"}}}};
  EXPECT_FALSE(validate_plan(plan, gate_schema()).empty());
}

TEST(ValidatePlanTest, OrderingComparatorsNeedOrderedColumns) {
  Condition c{"status", Comparator::lt, {std::string("failed")}};
  AnalysisPlan plan{{SliceStep{std::nullopt, Predicate{c}}}};
  EXPECT_FALSE(validate_plan(plan, gate_schema()).empty());
  Condition d{"retries", Comparator::contains, {std::int64_t{1}}};
  AnalysisPlan plan2{{SliceStep{std::nullopt, Predicate{d}}}};
  EXPECT_FALSE(validate_plan(plan2, gate_schema()).empty());
}

TEST(ValidatePlanTest, DepthLimit) {
  Predicate leaf{Condition{"retries", Comparator::gt, {std::int64_t{1}}}};
  Predicate p = leaf;
  for (int i = 0; i < 4; ++i) p = Predicate{LogicNode{Logic::all_of, {p}}};
  EXPECT_EQ(predicate_depth(p), 5u);
  AnalysisPlan plan{{SliceStep{std::nullopt, p}}};
  EXPECT_FALSE(validate_plan(plan, gate_schema()).empty());
}

TEST(CanonicalizeTest, ConjunctionOrderDoesNotMatter) {
  auto a = parse_plan(R"({"steps":[{"kind":"slice","where":{"and":[{"col":"status","op":"eq","value":"failed"},{"col":"retries","op":"eq","value":2}]}}]})",
                      gate_schema());
  auto b = parse_plan(R"({"steps":[{"kind":"slice","select":"all","where":{"and":[{"col":"RETRIES","op":"eq","value":2},{"col":"Status","op":"eq","value":"failed"}]}}]})",
                      gate_schema());
  EXPECT_EQ(canonicalize(a, gate_schema()), canonicalize(b, gate_schema()));
  EXPECT_EQ(canonicalize(a, gate_schema()), canonicalize(a, gate_schema()));
}

TEST(CanonicalizeTest, SortDirectionMatters) {
  AnalysisPlan asc{{SortStep{{{"retries", SortOrder::asc}}}}};
  AnalysisPlan desc{{SortStep{{{"retries", SortOrder::desc}}}}};
  EXPECT_NE(canonicalize(asc, gate_schema()), canonicalize(desc, gate_schema()));
}

TEST(CanonicalizeTest, InListsAreSets) {
  auto a = parse_plan(R"({"steps":[{"kind":"slice","where":{"col":"status","op":"in","value":["failed","blocked"]}}]})", gate_schema());
  auto b = parse_plan(R"({"steps":[{"kind":"slice","where":{"col":"status","op":"in","value":["blocked","failed","blocked"]}}]})", gate_schema());
  EXPECT_EQ(canonicalize(a, gate_schema()), canonicalize(b, gate_schema()));
}

TEST(RenderStepsTest, Sentences) {
  auto plan = parse_plan(kSliceDoc, gate_schema());
  plan.steps.push_back(AggregateStep{AggFunc::count, std::nullopt, {"test_function"}});
  plan.steps.push_back(SortStep{{{"count", SortOrder::desc}}});
  plan.steps.push_back(LimitStep{5});
  auto lines = render_steps(plan);
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0], "Select column test_function from rows where release_candidate = 'RC7' and status = 'failed'.");
  EXPECT_EQ(lines[1], "Count rows per test_function.");
  EXPECT_EQ(lines[2], "Sort rows by count descending.");
  EXPECT_EQ(lines[3], "Keep the first 5 rows.");
}

TEST(DifficultyTest, Levels) {
  SliceStep slice{std::nullopt, Predicate{Condition{"status", Comparator::eq, {std::string("failed")}}}};
  EXPECT_EQ(classify_difficulty({{slice}}), 1);
  EXPECT_EQ(classify_difficulty({{slice, slice, SortStep{{{"retries", SortOrder::asc}}}}}), 2);
  AnalysisPlan l4{{slice, AggregateStep{AggFunc::count, std::nullopt, {"test_function"}}, SortStep{{{"count", SortOrder::desc}}},
                   LimitStep{5}}};
  EXPECT_EQ(classify_difficulty(l4), 4);
  EXPECT_EQ(classify_difficulty({{slice, AggregateStep{AggFunc::mean, "duration_s", {}}}}), 3);
  EXPECT_EQ(classify_difficulty({{slice, AggregateStep{AggFunc::max, "duration_s", {}}}}), 2);
  EXPECT_EQ(classify_difficulty({{slice, slice, slice, slice}}), 3);
}

TEST(DifficultyTest, AppendingNeverLowersLevel) {
  testing::Rng rng(5);
  for (int i = 0; i < 300; ++i) {
    auto t = testing::random_table(rng);
    auto plan = testing::random_plan(rng, t, 6);
    AnalysisPlan prefix;
    int last = 0;
    for (const auto& s : plan.steps) {
      prefix.steps.push_back(s);
      const int level = classify_difficulty(prefix);
      EXPECT_GE(level, last);
      last = level;
    }
  }
}

TEST(WireTest, RenderThenParseIsIdentity) {
  testing::Rng rng(3);
  for (int i = 0; i < 300; ++i) {
    auto t = testing::random_table(rng);
    auto plan = testing::random_plan(rng, t);
    auto back = parse_plan(plan_to_wire(plan), t.schema());
    EXPECT_EQ(back, plan) << plan_to_wire(plan);
    EXPECT_EQ(canonicalize(back, t.schema()), canonicalize(plan, t.schema()));
  }
}

TEST(WireTest, ParseStepValidatesAgainstPrior) {
  AnalysisPlan prior{{SliceStep{std::vector<std::string>{"status"}, std::nullopt}}};
  EXPECT_THROW(parse_step(R"({"kind":"sort","keys":[{"col":"retries"}]})", gate_schema(), prior), PlanError);
  auto step = parse_step(R"({"kind":"sort","keys":[{"col":"Status","order":"desc"}]})", gate_schema(), prior);
  EXPECT_EQ(std::get<SortStep>(step).keys[0].column, "status");
}

}  // namespace
}  // namespace releasegate
