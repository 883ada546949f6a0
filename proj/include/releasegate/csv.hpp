// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "releasegate/table.hpp"

namespace releasegate {

enum class CsvErrorKind { malformed, header_mismatch, field_count, unparseable_cell, state_violation, io };

class CsvError : public std::runtime_error {
 public:
  CsvError(CsvErrorKind kind, std::string message, std::optional<std::size_t> row = std::nullopt,
           std::string column = {}, std::string raw = {});

  CsvErrorKind kind() const { return kind_; }
  /// 1-based data row (the header is row 0).
  std::optional<std::size_t> row() const { return row_; }
  const std::string& column() const { return column_; }
  const std::string& raw() const { return raw_; }

 private:
  CsvErrorKind kind_;
  std::optional<std::size_t> row_;
  std::string column_;
  std::string raw_;
};

/// Parses RFC-4180 CSV with a header row against `schema`.
///
/// Header names resolve case-insensitively; every schema field must appear exactly once and
/// unknown headers are rejected. An unquoted empty cell is null. A quoted empty cell (`""`) in
/// a text column is the empty string. The text `N/A` is an ordinary value.
Table load_csv(std::string_view source, const Schema& schema);
Table load_csv(std::istream& source, const Schema& schema);
Table load_csv_file(const std::filesystem::path& path, const Schema& schema);

/// Writes a CSV that load_csv reads back to an identical table.
void write_csv(const Table& table, std::ostream& out);
std::string to_csv(const Table& table);
/// Throws CsvError(io) when the file cannot be written.
void export_csv(const Table& table, const std::filesystem::path& path);

}  // namespace releasegate
