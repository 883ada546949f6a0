// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <map>

#include "releasegate/csv.hpp"
#include "releasegate/synthetic.hpp"
#include "support/dataset.hpp"

namespace releasegate {
namespace {

std::map<std::string, std::size_t> value_counts(const Table& t, const std::string& column) {
  std::map<std::string, std::size_t> out;
  const auto idx = *t.schema().find(column);
  for (const auto& v : t.column(idx)) {
    if (const auto* s = std::get_if<std::string>(&v)) ++out[*s];
  }
  return out;
}

TEST(SyntheticTest, DefaultShape) {
  const auto& t = testing::default_dataset().table;
  EXPECT_EQ(t.row_count(), 55000u);
  EXPECT_EQ(t.column_count(), 40u);
  EXPECT_TRUE(validate(t).empty());
  EXPECT_EQ(t.schema().field(0).name, "record_id");
  EXPECT_EQ(t.schema().field(5).name, "test_status");
}

TEST(SyntheticTest, AllFourStatesOccur) {
  auto counts = value_counts(testing::default_dataset().table, "test_status");
  ASSERT_EQ(counts.size(), 4u);
  for (const char* s : {"passed", "failed", "N/A", "blocked"}) EXPECT_GT(counts[s], 500u) << s;
  EXPECT_GT(counts["passed"], counts["failed"]);
}

TEST(SyntheticTest, EveryReleaseCandidateAndFunctionOccurs) {
  const auto& t = testing::default_dataset().table;
  EXPECT_EQ(value_counts(t, "release_candidate").size(), 12u);
  EXPECT_EQ(value_counts(t, "test_case_function").size(), 30u);
}

TEST(SyntheticTest, SeverityOnlyForFailedOrBlocked) {
  const auto& t = testing::default_dataset().table;
  const auto status = *t.schema().find("test_status");
  const auto severity = *t.schema().find("severity");
  for (std::size_t r = 0; r < t.row_count(); ++r) {
    const auto& st = std::get<std::string>(t.at(r, status));
    if (st == "passed" || st == "N/A") EXPECT_TRUE(is_null(t.at(r, severity))) << r;
  }
}

TEST(SyntheticTest, DeterministicPerSeed) {
  GeneratorConfig a{11, 800, 5, 9};
  const auto t1 = generate(a).table;
  const auto t2 = generate(a).table;
  EXPECT_EQ(canonical_table_text(t1), canonical_table_text(t2));
  GeneratorConfig b = a;
  b.seed = 12;
  EXPECT_NE(canonical_table_text(generate(b).table), canonical_table_text(t1));
}

TEST(SyntheticTest, RowsDoNotDependOnTheRowCount) {
  const auto t = generate(GeneratorConfig{7, 50, 12, 30}).table;
  const auto longer = generate(GeneratorConfig{7, 60, 12, 30}).table;
  for (std::size_t c = 0; c < t.column_count(); ++c) {
    for (std::size_t r = 0; r < t.row_count(); ++r) {
      ASSERT_TRUE(t.at(r, c) == longer.at(r, c)) << "row " << r << " column " << t.schema().field(c).name;
    }
  }
}

TEST(SyntheticTest, CsvRoundTrip) {
  const auto t = generate(GeneratorConfig{3, 400, 12, 30}).table;
  const auto back = load_csv(to_csv(t), t.schema());
  EXPECT_EQ(canonical_table_text(back), canonical_table_text(t));
}

TEST(SyntheticTest, RejectsZeroCounts) {
  EXPECT_THROW(generate(GeneratorConfig{7, 0, 12, 30}), std::invalid_argument);
  EXPECT_THROW(synthetic_schema(GeneratorConfig{7, 10, 0, 30}), std::invalid_argument);
}

TEST(SyntheticTest, KbStatesFollowTheConfig) {
  auto kb = synthetic_kb(GeneratorConfig{7, 10, 3, 4});
  const auto* rc = kb.note_for("release_candidate");
  ASSERT_NE(rc, nullptr);
  ASSERT_TRUE(rc->states.has_value());
  EXPECT_EQ(*rc->states, (std::vector<std::string>{"RC1", "RC2", "RC3"}));
}

}  // namespace
}  // namespace releasegate
