// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "releasegate/table.hpp"

namespace releasegate {
namespace {

Schema status_schema() {
  return Schema({{"release_candidate", ColumnType::text, "build", std::nullopt},
                 {"status", ColumnType::text, "outcome", std::vector<std::string>{"passed", "failed", "N/A", "blocked"}},
                 {"duration_s", ColumnType::floating, "", std::nullopt}});
}

Table small_table() {
  return Table(status_schema(), std::vector<Column>{{std::string("RC1"), std::string("RC2")},
                                                    {std::string("failed"), std::string("N/A")},
                                                    {1.5, Value{}}});
}

TEST(ValueTest, ParsesAndFormatsScalars) {
  EXPECT_EQ(parse_int("-42"), std::optional<std::int64_t>(-42));
  EXPECT_FALSE(parse_int("4x").has_value());
  EXPECT_FALSE(parse_double("nan").has_value());
  EXPECT_FALSE(parse_double("inf").has_value());
  EXPECT_EQ(parse_bool("TRUE"), std::optional<bool>(true));
  EXPECT_FALSE(parse_bool("maybe").has_value());
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(2.0), "2");
}

TEST(ValueTest, TimestampsNormalizeToUtc) {
  auto a = parse_timestamp("2024-03-01T10:00:00+02:00");
  auto b = parse_timestamp("2024-03-01 08:00:00Z");
  ASSERT_TRUE(a && b);
  EXPECT_EQ(*a, *b);
  EXPECT_EQ(format_timestamp(*a), "2024-03-01T08:00:00Z");
  EXPECT_EQ(parse_timestamp("2024-03-01"), parse_timestamp("2024-03-01T00:00:00Z"));
  EXPECT_FALSE(parse_timestamp("2024-02-30T00:00:00Z").has_value());
}

TEST(SchemaTest, RejectsDuplicateNamesCaseInsensitively) {
  EXPECT_THROW(Schema({{"Status", ColumnType::text, "", std::nullopt}, {"status", ColumnType::text, "", std::nullopt}}),
               SchemaError);
  EXPECT_THROW(Schema(std::vector<FieldSpec>{}), SchemaError);
  EXPECT_THROW(Schema({{"", ColumnType::text, "", std::nullopt}}), SchemaError);
}

TEST(SchemaTest, LooksUpCaseInsensitively) {
  auto s = status_schema();
  EXPECT_EQ(s.find("STATUS"), std::optional<std::size_t>(1));
  EXPECT_FALSE(s.find("missing").has_value());
}

TEST(ValidateTest, FreshTableHasNoViolations) { EXPECT_TRUE(validate(small_table()).empty()); }

TEST(ValidateTest, OutOfStatesValueIsOneViolation) {
  auto t = small_table().with_cell(0, 1, std::string("flaky"));
  auto report = validate(t);
  ASSERT_EQ(report.size(), 1u);
  EXPECT_EQ(report[0].field, "status");
  EXPECT_EQ(report[0].row, std::optional<std::size_t>(0));
}

TEST(ValidateTest, RaggedColumnNamesTheField) {
  Table t(status_schema(), std::vector<Column>{{std::string("RC1"), std::string("RC2")}, {std::string("failed")}, {1.0, 2.0}});
  auto report = validate(t);
  ASSERT_FALSE(report.empty());
  EXPECT_EQ(report[0].field, "status");
}

TEST(ValidateTest, WrongVariantIsReported) {
  auto t = small_table().with_cell(1, 2, std::int64_t{3});
  auto report = validate(t);
  ASSERT_EQ(report.size(), 1u);
  EXPECT_EQ(report[0].field, "duration_s");
}

TEST(CanonicalTextTest, IsDeterministicAndSeparatesNullFromNA) {
  auto t = small_table();
  EXPECT_EQ(canonical_table_text(t), canonical_table_text(t));
  auto changed = t.with_cell(1, 0, std::string("RC3"));
  EXPECT_NE(canonical_table_text(t), canonical_table_text(changed));

  const auto text = canonical_table_text(t);
  EXPECT_NE(text.find("\"N/A\""), std::string::npos);
  EXPECT_NE(text.find("\\N"), std::string::npos);
}

TEST(CanonicalTextTest, EmptyTableIsHeaderOnly) {
  auto text = canonical_table_text(Table::empty(status_schema()));
  EXPECT_EQ(text, "\"release_candidate\":text\t\"status\":text\t\"duration_s\":float\n");
}

TEST(TableTest, WithCellLeavesOriginalUntouched) {
  auto t = small_table();
  auto u = t.with_cell(0, 0, std::string("RC9"));
  EXPECT_EQ(std::get<std::string>(t.at(0, 0)), "RC1");
  EXPECT_EQ(std::get<std::string>(u.at(0, 0)), "RC9");
}

}  // namespace
}  // namespace releasegate
