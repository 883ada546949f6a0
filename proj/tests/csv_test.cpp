// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>

#include "releasegate/csv.hpp"
#include "releasegate/strict_match.hpp"
#include "support/random_gen.hpp"

namespace releasegate {
namespace {

Schema mixed_schema() {
  return Schema({{"name", ColumnType::text, "", std::nullopt},
                 {"ok", ColumnType::boolean, "", std::nullopt},
                 {"n", ColumnType::integer, "", std::nullopt},
                 {"x", ColumnType::floating, "", std::nullopt},
                 {"at", ColumnType::timestamp, "", std::nullopt},
                 {"status", ColumnType::text, "", std::vector<std::string>{"passed", "failed", "N/A", "blocked"}}});
}

TEST(CsvTest, HeaderOnlyGivesEmptyTable) {
  auto t = load_csv("name,ok,n,x,at,status\n", mixed_schema());
  EXPECT_EQ(t.row_count(), 0u);
  EXPECT_EQ(t.column_count(), 6u);
}

TEST(CsvTest, HeadersResolveCaseInsensitivelyAndReorder) {
  auto t = load_csv("STATUS,Name,ok,n,x,at\nfailed,RC1,true,3,1.5,2024-01-02T03:04:05Z\n", mixed_schema());
  ASSERT_EQ(t.row_count(), 1u);
  EXPECT_EQ(t.schema().field(0).name, "name");
  EXPECT_EQ(std::get<std::string>(t.at(0, 0)), "RC1");
  EXPECT_EQ(std::get<std::string>(t.at(0, 5)), "failed");
}

TEST(CsvTest, UnparseableBooleanNamesRowAndColumn) {
  try {
    load_csv("name,ok,n,x,at,status\nRC1,true,1,1,,passed\nRC2,maybe,1,1,,passed\n", mixed_schema());
    FAIL() << "expected CsvError";
  } catch (const CsvError& e) {
    EXPECT_EQ(e.kind(), CsvErrorKind::unparseable_cell);
    EXPECT_EQ(e.row(), std::optional<std::size_t>(2));
    EXPECT_EQ(e.column(), "ok");
    EXPECT_EQ(e.raw(), "maybe");
  }
}

TEST(CsvTest, EmptyCellIsNullButNAIsAValue) {
  auto t = load_csv("name,ok,n,x,at,status\nN/A,,,,,N/A\n\"\",true,1,2,2024-01-01,\n", mixed_schema());
  EXPECT_EQ(std::get<std::string>(t.at(0, 0)), "N/A");
  EXPECT_TRUE(is_null(t.at(0, 1)));
  EXPECT_EQ(std::get<std::string>(t.at(0, 5)), "N/A");
  EXPECT_EQ(std::get<std::string>(t.at(1, 0)), "");
  EXPECT_TRUE(is_null(t.at(1, 5)));
}

TEST(CsvTest, HeaderProblemsAreRejected) {
  EXPECT_THROW(load_csv("name,ok,n,x,at\n", mixed_schema()), CsvError);
  EXPECT_THROW(load_csv("name,ok,n,x,at,status,extra\n", mixed_schema()), CsvError);
  EXPECT_THROW(load_csv("name,name,n,x,at,status\n", mixed_schema()), CsvError);
  EXPECT_THROW(load_csv("", mixed_schema()), CsvError);
}

TEST(CsvTest, StateViolationAndFieldCount) {
  try {
    load_csv("name,ok,n,x,at,status\nRC1,true,1,1,,flaky\n", mixed_schema());
    FAIL();
  } catch (const CsvError& e) {
    EXPECT_EQ(e.kind(), CsvErrorKind::state_violation);
    EXPECT_EQ(e.column(), "status");
  }
  try {
    load_csv("name,ok,n,x,at,status\nRC1,true\n", mixed_schema());
    FAIL();
  } catch (const CsvError& e) {
    EXPECT_EQ(e.kind(), CsvErrorKind::field_count);
    EXPECT_EQ(e.row(), std::optional<std::size_t>(1));
  }
  EXPECT_THROW(load_csv("name,ok,n,x,at,status\n\"RC1,true,1,1,,passed\n", mixed_schema()), CsvError);
}

TEST(CsvTest, QuotingRoundTrips) {
  Table t(mixed_schema(), std::vector<Column>{{std::string("a,b"), std::string(" padded "), std::string("line\nbreak"), std::string("q\"uote"), std::string("")},
                                              {true, false, Value{}, true, false},
                                              {std::int64_t{-5}, std::int64_t{0}, std::int64_t{7}, Value{}, std::int64_t{1}},
                                              {0.1, 1e300, -2.5, 3.0, Value{}},
                                              {Timestamp{0}, Timestamp{1700000000}, Value{}, Timestamp{1}, Timestamp{2}},
                                              {std::string("N/A"), Value{}, std::string("passed"), std::string("blocked"), std::string("failed")}});
  auto back = load_csv(to_csv(t), mixed_schema());
  EXPECT_EQ(canonical_table_text(back), canonical_table_text(t));
  EXPECT_TRUE(strict_match(back, t, true).matched);
}

TEST(CsvTest, RandomTablesRoundTrip) {
  testing::Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    auto t = testing::random_table(rng);
    auto back = load_csv(to_csv(t), t.schema());
    EXPECT_EQ(canonical_table_text(back), canonical_table_text(t)) << "table " << i;
  }
}

TEST(CsvTest, ExportToUnwritablePathIsIoError) {
  auto t = Table::empty(mixed_schema());
  try {
    export_csv(t, "/nonexistent-dir/sub/out.csv");
    FAIL();
  } catch (const CsvError& e) {
    EXPECT_EQ(e.kind(), CsvErrorKind::io);
  }
}

TEST(CsvTest, ExportOfEmptyTableIsHeaderOnly) {
  auto path = std::filesystem::temp_directory_path() / "releasegate_empty_export.csv";
  export_csv(Table::empty(mixed_schema()), path);
  auto back = load_csv_file(path, mixed_schema());
  EXPECT_EQ(back.row_count(), 0u);
  EXPECT_EQ(to_csv(back), "name,ok,n,x,at,status\n");
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace releasegate
