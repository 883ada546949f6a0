// SPDX-License-Identifier: Apache-2.0
#include "releasegate/csv.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>

namespace releasegate {

CsvError::CsvError(CsvErrorKind kind, std::string message, std::optional<std::size_t> row, std::string column,
                   std::string raw)
    : std::runtime_error(std::move(message)),
      kind_(kind),
      row_(row),
      column_(std::move(column)),
      raw_(std::move(raw)) {}

namespace {

struct Cell {
  std::string text;
  bool quoted = false;
};

/// Streaming RFC-4180 record reader over an in-memory buffer.
class RecordReader {
 public:
  explicit RecordReader(std::string_view src) : src_(src) {
    if (src_.substr(0, 3) == "\xEF\xBB\xBF") pos_ = 3;
  }

  /// False at end of input. `record_no` counts records from 0 (the header).
  bool next(std::vector<Cell>& out) {
    out.clear();
    if (pos_ >= src_.size()) return false;
    Cell cell;
    while (true) {
      if (pos_ >= src_.size()) {
        out.push_back(std::move(cell));
        return true;
      }
      const char c = src_[pos_];
      if (c == '"' && cell.text.empty() && !cell.quoted) {
        cell.quoted = true;
        ++pos_;
        read_quoted(cell.text);
        if (pos_ < src_.size() && src_[pos_] != ',' && src_[pos_] != '\n' && src_[pos_] != '\r') {
          throw CsvError(CsvErrorKind::malformed,
                         "unexpected character after closing quote in record " + std::to_string(record_no_),
                         record_no_);
        }
        continue;
      }
      if (c == ',') {
        out.push_back(std::move(cell));
        cell = Cell{};
        ++pos_;
        continue;
      }
      if (c == '\r' || c == '\n') {
        ++pos_;
        if (c == '\r' && pos_ < src_.size() && src_[pos_] == '\n') ++pos_;
        out.push_back(std::move(cell));
        ++record_no_;
        return true;
      }
      if (cell.quoted) {
        throw CsvError(CsvErrorKind::malformed, "text after quoted field in record " + std::to_string(record_no_),
                       record_no_);
      }
      cell.text.push_back(c);
      ++pos_;
    }
  }

  std::size_t record_no() const { return record_no_; }

 private:
  void read_quoted(std::string& out) {
    while (pos_ < src_.size()) {
      const char c = src_[pos_++];
      if (c == '"') {
        if (pos_ < src_.size() && src_[pos_] == '"') {
          out.push_back('"');
          ++pos_;
          continue;
        }
        return;
      }
      out.push_back(c);
    }
    throw CsvError(CsvErrorKind::malformed, "unterminated quoted field in record " + std::to_string(record_no_),
                   record_no_);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t record_no_ = 0;
};

bool needs_quotes(std::string_view s) {
  if (s.empty()) return true;
  if (s.front() == ' ' || s.back() == ' ') return true;
  return s.find_first_of(",\"\r\n") != std::string_view::npos;
}

void write_field(std::ostream& out, std::string_view s, bool force_quotes) {
  if (!force_quotes && !needs_quotes(s)) {
    out << s;
    return;
  }
  out << '"';
  for (char c : s) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

}  // namespace

Table load_csv(std::string_view source, const Schema& schema) {
  RecordReader reader(source);
  std::vector<Cell> record;
  if (!reader.next(record)) {
    throw CsvError(CsvErrorKind::header_mismatch, "CSV input is empty; a header row is required", 0);
  }

  // position in file -> schema index
  std::vector<std::size_t> mapping(record.size());
  std::vector<bool> seen(schema.size(), false);
  for (std::size_t i = 0; i < record.size(); ++i) {
    const auto& name = record[i].text;
    auto idx = schema.find(name);
    if (!idx) {
      throw CsvError(CsvErrorKind::header_mismatch, "header column '" + name + "' is not a schema field", 0, name,
                     name);
    }
    if (seen[*idx]) {
      throw CsvError(CsvErrorKind::header_mismatch, "header column '" + name + "' appears more than once", 0, name,
                     name);
    }
    seen[*idx] = true;
    mapping[i] = *idx;
  }
  for (std::size_t f = 0; f < schema.size(); ++f) {
    if (!seen[f]) {
      throw CsvError(CsvErrorKind::header_mismatch, "schema field '" + schema.field(f).name + "' missing from header",
                     0, schema.field(f).name);
    }
  }

  std::vector<Column> columns(schema.size());
  std::size_t row = 0;
  while (reader.next(record)) {
    ++row;
    if (record.size() == 1 && record[0].text.empty() && !record[0].quoted && schema.size() > 1) {
      // Blank line: only legal as trailing whitespace at the end of the file.
      std::vector<Cell> rest;
      bool trailing = true;
      while (reader.next(rest)) {
        if (!(rest.size() == 1 && rest[0].text.empty() && !rest[0].quoted)) {
          trailing = false;
          break;
        }
      }
      if (trailing) break;
      throw CsvError(CsvErrorKind::field_count, "blank line at data row " + std::to_string(row), row);
    }
    if (record.size() != mapping.size()) {
      throw CsvError(CsvErrorKind::field_count,
                     "data row " + std::to_string(row) + " has " + std::to_string(record.size()) + " fields, expected " +
                         std::to_string(mapping.size()),
                     row);
    }
    for (std::size_t i = 0; i < record.size(); ++i) {
      const auto& field_def = schema.field(mapping[i]);
      const auto& cell = record[i];
      Value v;
      if (cell.text.empty()) {
        if (cell.quoted && field_def.type == ColumnType::text) v = std::string{};
      } else if (auto parsed = parse_value(cell.text, field_def.type)) {
        v = std::move(*parsed);
      } else {
        throw CsvError(CsvErrorKind::unparseable_cell,
                       "row " + std::to_string(row) + ", column '" + field_def.name + "': cannot parse '" + cell.text +
                           "' as " + std::string(type_name(field_def.type)),
                       row, field_def.name, cell.text);
      }
      if (field_def.states && !is_null(v)) {
        const auto& s = std::get<std::string>(v);
        if (std::find(field_def.states->begin(), field_def.states->end(), s) == field_def.states->end()) {
          throw CsvError(CsvErrorKind::state_violation,
                         "row " + std::to_string(row) + ", column '" + field_def.name + "': '" + s +
                             "' is not an admissible state",
                         row, field_def.name, cell.text);
        }
      }
      columns[mapping[i]].push_back(std::move(v));
    }
  }
  return Table(schema, std::move(columns));
}

Table load_csv(std::istream& source, const Schema& schema) {
  std::string buf{std::istreambuf_iterator<char>(source), std::istreambuf_iterator<char>()};
  return load_csv(std::string_view(buf), schema);
}

Table load_csv_file(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError(CsvErrorKind::io, "cannot open " + path.string());
  return load_csv(in, schema);
}

void write_csv(const Table& table, std::ostream& out) {
  const auto& fields = table.schema().fields();
  for (std::size_t c = 0; c < fields.size(); ++c) {
    if (c) out << ',';
    write_field(out, fields[c].name, false);
  }
  out << '\n';
  const auto rows = table.row_count();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < table.column_count(); ++c) {
      if (c) out << ',';
      const auto& v = table.at(r, c);
      if (is_null(v)) continue;
      if (const auto* s = std::get_if<std::string>(&v)) {
        write_field(out, *s, false);
      } else {
        out << value_to_plain_text(v);
      }
    }
    out << '\n';
  }
}

std::string to_csv(const Table& table) {
  std::ostringstream out;
  write_csv(table, out);
  return std::move(out).str();
}

void export_csv(const Table& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CsvError(CsvErrorKind::io, "cannot open " + path.string() + " for writing");
  write_csv(table, out);
  out.flush();
  if (!out) throw CsvError(CsvErrorKind::io, "failed writing " + path.string());
}

}  // namespace releasegate
