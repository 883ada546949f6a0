// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "releasegate/value.hpp"

namespace releasegate {

struct FieldSpec {
  std::string name;
  ColumnType type = ColumnType::text;
  std::string description;
  /// Closed list of admissible text values for categorical fields.
  std::optional<std::vector<std::string>> states;

  friend bool operator==(const FieldSpec&, const FieldSpec&) = default;
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered, non-empty list of fields with case-insensitively unique names.
class Schema {
 public:
  /// Throws SchemaError on an empty field list, empty or duplicate names, or states on a
  /// non-text field.
  explicit Schema(std::vector<FieldSpec> fields);

  const std::vector<FieldSpec>& fields() const { return fields_; }
  std::size_t size() const { return fields_.size(); }
  const FieldSpec& field(std::size_t i) const { return fields_.at(i); }

  /// Case-insensitive lookup.
  std::optional<std::size_t> find(std::string_view name) const;
  const FieldSpec* lookup(std::string_view name) const;

  std::vector<std::string> names() const;

  friend bool operator==(const Schema&, const Schema&) = default;

 private:
  std::vector<FieldSpec> fields_;
};

using Column = std::vector<Value>;
using ColumnPtr = std::shared_ptr<const Column>;

/// Immutable columnar table. Construction does not validate cell contents; use validate()
/// (or load_csv, which does) when the data comes from outside.
class Table {
 public:
  /// Throws std::invalid_argument when the column count differs from the schema size.
  Table(Schema schema, std::vector<Column> columns);
  Table(Schema schema, std::vector<ColumnPtr> columns);

  static Table empty(Schema schema);

  const Schema& schema() const { return schema_; }
  /// Length of the first column.
  std::size_t row_count() const;
  std::size_t column_count() const { return columns_.size(); }

  const Column& column(std::size_t i) const { return *columns_.at(i); }
  const ColumnPtr& column_ptr(std::size_t i) const { return columns_.at(i); }
  const Value& at(std::size_t row, std::size_t col) const { return (*columns_.at(col)).at(row); }

  /// Copy of this table with one cell replaced.
  Table with_cell(std::size_t row, std::size_t col, Value v) const;

 private:
  Schema schema_;
  std::vector<ColumnPtr> columns_;
};

struct Violation {
  std::string field;
  std::optional<std::size_t> row;
  std::string reason;

  friend bool operator==(const Violation&, const Violation&) = default;
};

/// Empty iff every column has row_count() values, each of the declared type and (for
/// fields with states) drawn from the states list.
std::vector<Violation> validate(const Table& table);

std::string format_violation(const Violation& v);

/// Deterministic text form: a header of `"name":type` entries, then one line per row.
/// Cells are tab-separated; text is double-quoted with JSON escapes; null is `\N`.
std::string canonical_table_text(const Table& table);

/// JSON-style string literal with the bytes of `s` preserved (no UTF-8 validation).
std::string quote_string(std::string_view s);

}  // namespace releasegate
