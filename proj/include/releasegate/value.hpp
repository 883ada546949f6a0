// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace releasegate {

/// Seconds since the Unix epoch, always UTC.
struct Timestamp {
  std::int64_t seconds = 0;

  friend bool operator==(Timestamp, Timestamp) = default;
  friend auto operator<=>(Timestamp, Timestamp) = default;
};

enum class ColumnType { boolean, integer, floating, text, timestamp };

/// A single cell. std::monostate is null.
using Value = std::variant<std::monostate, bool, std::int64_t, double, std::string, Timestamp>;

inline bool is_null(const Value& v) { return std::holds_alternative<std::monostate>(v); }

/// True when `v` is null or carries the variant that `type` stores.
bool value_has_type(const Value& v, ColumnType type);

std::string_view type_name(ColumnType type);
std::optional<ColumnType> parse_type_name(std::string_view name);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double d);

/// ISO-8601 `YYYY-MM-DDTHH:MM:SSZ`.
std::string format_timestamp(Timestamp ts);

/// Accepts `YYYY-MM-DDTHH:MM:SS` or `YYYY-MM-DD HH:MM:SS`, optionally followed by `Z`
/// or a `+HH:MM` / `-HH:MM` offset, and a bare `YYYY-MM-DD`. Offsets are folded into UTC.
std::optional<Timestamp> parse_timestamp(std::string_view text);

std::optional<std::int64_t> parse_int(std::string_view text);
/// Rejects NaN and infinities.
std::optional<double> parse_double(std::string_view text);
std::optional<bool> parse_bool(std::string_view text);

/// Parses `text` as a value of `type`. Empty text is not handled here.
std::optional<Value> parse_value(std::string_view text, ColumnType type);

/// Human-readable rendering used by CSV export and prompts; null renders as empty.
std::string value_to_plain_text(const Value& v);

bool iequals(std::string_view a, std::string_view b);
std::string to_lower(std::string_view s);

}  // namespace releasegate
