// SPDX-License-Identifier: Apache-2.0
#include "releasegate/table.hpp"

#include <algorithm>
#include <array>
#include <cstdio>

namespace releasegate {

Schema::Schema(std::vector<FieldSpec> fields) : fields_(std::move(fields)) {
  if (fields_.empty()) throw SchemaError("schema must have at least one field");
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    const auto& f = fields_[i];
    if (f.name.empty()) throw SchemaError("field " + std::to_string(i) + " has an empty name");
    for (std::size_t j = 0; j < i; ++j) {
      if (iequals(fields_[j].name, f.name)) {
        throw SchemaError("duplicate field name '" + f.name + "'");
      }
    }
    if (f.states && f.type != ColumnType::text) {
      throw SchemaError("field '" + f.name + "' declares states but is not a text field");
    }
  }
}

std::optional<std::size_t> Schema::find(std::string_view name) const {
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    if (iequals(fields_[i].name, name)) return i;
  }
  return std::nullopt;
}

const FieldSpec* Schema::lookup(std::string_view name) const {
  auto i = find(name);
  return i ? &fields_[*i] : nullptr;
}

std::vector<std::string> Schema::names() const {
  std::vector<std::string> out;
  out.reserve(fields_.size());
  for (const auto& f : fields_) out.push_back(f.name);
  return out;
}

Table::Table(Schema schema, std::vector<Column> columns) : schema_(std::move(schema)) {
  if (columns.size() != schema_.size()) {
    throw std::invalid_argument("table has " + std::to_string(columns.size()) + " columns but schema has " +
                                std::to_string(schema_.size()) + " fields");
  }
  columns_.reserve(columns.size());
  for (auto& c : columns) columns_.push_back(std::make_shared<const Column>(std::move(c)));
}

Table::Table(Schema schema, std::vector<ColumnPtr> columns)
    : schema_(std::move(schema)), columns_(std::move(columns)) {
  if (columns_.size() != schema_.size()) {
    throw std::invalid_argument("table has " + std::to_string(columns_.size()) + " columns but schema has " +
                                std::to_string(schema_.size()) + " fields");
  }
  for (auto& c : columns_) {
    if (!c) c = std::make_shared<const Column>();
  }
}

Table Table::empty(Schema schema) {
  std::vector<Column> cols(schema.size());
  return Table(std::move(schema), std::move(cols));
}

std::size_t Table::row_count() const { return columns_.empty() ? 0 : columns_.front()->size(); }

Table Table::with_cell(std::size_t row, std::size_t col, Value v) const {
  auto copy = std::make_shared<Column>(*columns_.at(col));
  copy->at(row) = std::move(v);
  auto cols = columns_;
  cols[col] = std::move(copy);
  return Table(schema_, std::move(cols));
}

std::vector<Violation> validate(const Table& table) {
  std::vector<Violation> out;
  const auto rows = table.row_count();
  for (std::size_t c = 0; c < table.column_count(); ++c) {
    const auto& field_def = table.schema().field(c);
    const auto& col = table.column(c);
    if (col.size() != rows) {
      out.push_back({field_def.name, std::nullopt,
                     "column has " + std::to_string(col.size()) + " values, expected " + std::to_string(rows)});
    }
    for (std::size_t r = 0; r < col.size(); ++r) {
      const auto& v = col[r];
      if (!value_has_type(v, field_def.type)) {
        out.push_back({field_def.name, r, "value is not of type " + std::string(type_name(field_def.type))});
        continue;
      }
      if (field_def.states && !is_null(v)) {
        const auto& s = std::get<std::string>(v);
        if (std::find(field_def.states->begin(), field_def.states->end(), s) == field_def.states->end()) {
          out.push_back({field_def.name, r, "value '" + s + "' is not an admissible state"});
        }
      }
    }
  }
  return out;
}

std::string format_violation(const Violation& v) {
  std::string out = v.field;
  if (v.row) out += " row " + std::to_string(*v.row);
  return out + ": " + v.reason;
}

std::string quote_string(std::string_view s) {
  std::string out;
  out.reserve(s.size() + 2);
  out.push_back('"');
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          std::array<char, 8> buf{};
          std::snprintf(buf.data(), buf.size(), "\\u%04x", c);
          out += buf.data();
        } else {
          out.push_back(ch);
        }
    }
  }
  out.push_back('"');
  return out;
}

namespace {

void append_cell(std::string& out, const Value& v) {
  if (is_null(v)) {
    out += "\\N";
  } else if (const auto* s = std::get_if<std::string>(&v)) {
    out += quote_string(*s);
  } else {
    out += value_to_plain_text(v);
  }
}

}  // namespace

std::string canonical_table_text(const Table& table) {
  std::string out;
  const auto& fields = table.schema().fields();
  for (std::size_t c = 0; c < fields.size(); ++c) {
    if (c) out.push_back('\t');
    out += quote_string(fields[c].name);
    out.push_back(':');
    out += type_name(fields[c].type);
  }
  out.push_back('\n');
  const auto rows = table.row_count();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < table.column_count(); ++c) {
      if (c) out.push_back('\t');
      const auto& col = table.column(c);
      if (r < col.size()) append_cell(out, col[r]);
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace releasegate
