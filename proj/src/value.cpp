// SPDX-License-Identifier: Apache-2.0
#include "releasegate/value.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>

namespace releasegate {

bool value_has_type(const Value& v, ColumnType type) {
  switch (v.index()) {
    case 0: return true;
    case 1: return type == ColumnType::boolean;
    case 2: return type == ColumnType::integer;
    case 3: return type == ColumnType::floating;
    case 4: return type == ColumnType::text;
    case 5: return type == ColumnType::timestamp;
  }
  return false;
}

std::string_view type_name(ColumnType type) {
  switch (type) {
    case ColumnType::boolean: return "bool";
    case ColumnType::integer: return "int";
    case ColumnType::floating: return "float";
    case ColumnType::text: return "text";
    case ColumnType::timestamp: return "timestamp";
  }
  return "?";
}

std::optional<ColumnType> parse_type_name(std::string_view name) {
  static constexpr std::array<std::pair<std::string_view, ColumnType>, 9> names{{
      {"bool", ColumnType::boolean},
      {"boolean", ColumnType::boolean},
      {"int", ColumnType::integer},
      {"integer", ColumnType::integer},
      {"float", ColumnType::floating},
      {"double", ColumnType::floating},
      {"text", ColumnType::text},
      {"string", ColumnType::text},
      {"timestamp", ColumnType::timestamp},
  }};
  for (const auto& [n, t] : names) {
    if (iequals(n, name)) return t;
  }
  return std::nullopt;
}

std::string format_double(double d) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), d);
  if (ec != std::errc{}) return "nan";
  return std::string(buf.data(), end);
}

std::string format_timestamp(Timestamp ts) {
  using namespace std::chrono;
  const sys_seconds tp{seconds{ts.seconds}};
  const auto day = floor<days>(tp);
  const year_month_day ymd{day};
  const hh_mm_ss hms{tp - day};
  std::array<char, 40> buf{};
  const int n = std::snprintf(buf.data(), buf.size(), "%04d-%02u-%02uT%02ld:%02ld:%02lldZ",
                              static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                              static_cast<unsigned>(ymd.day()), static_cast<long>(hms.hours().count()),
                              static_cast<long>(hms.minutes().count()),
                              static_cast<long long>(hms.seconds().count()));
  return std::string(buf.data(), static_cast<std::size_t>(n));
}

namespace {

bool read_digits(std::string_view s, std::size_t pos, std::size_t count, int& out) {
  if (pos + count > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + count; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view s) {
  using namespace std::chrono;
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
  if (!read_digits(s, 0, 4, y) || s.size() < 10 || s[4] != '-' || !read_digits(s, 5, 2, mo) ||
      s[7] != '-' || !read_digits(s, 8, 2, d)) {
    return std::nullopt;
  }
  std::size_t pos = 10;
  if (pos < s.size()) {
    if (s[pos] != 'T' && s[pos] != ' ') return std::nullopt;
    if (!read_digits(s, pos + 1, 2, h) || s.size() < pos + 9 || s[pos + 3] != ':' ||
        !read_digits(s, pos + 4, 2, mi) || s[pos + 6] != ':' || !read_digits(s, pos + 7, 2, se)) {
      return std::nullopt;
    }
    pos += 9;
  }
  int offset_seconds = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z' && pos + 1 == s.size()) {
      pos += 1;
    } else if ((s[pos] == '+' || s[pos] == '-') && s.size() == pos + 6 && s[pos + 3] == ':') {
      int oh = 0, om = 0;
      if (!read_digits(s, pos + 1, 2, oh) || !read_digits(s, pos + 4, 2, om) || oh > 23 || om > 59) {
        return std::nullopt;
      }
      offset_seconds = (oh * 3600 + om * 60) * (s[pos] == '-' ? -1 : 1);
      pos = s.size();
    } else {
      return std::nullopt;
    }
  }
  if (pos != s.size()) return std::nullopt;
  if (h > 23 || mi > 59 || se > 59) return std::nullopt;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  const auto base = sys_days{ymd}.time_since_epoch();
  const std::int64_t secs = duration_cast<seconds>(base).count() + h * 3600 + mi * 60 + se - offset_seconds;
  return Timestamp{secs};
}

std::optional<std::int64_t> parse_int(std::string_view text) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return v;
}

std::optional<double> parse_double(std::string_view text) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<bool> parse_bool(std::string_view text) {
  if (iequals(text, "true")) return true;
  if (iequals(text, "false")) return false;
  return std::nullopt;
}

std::optional<Value> parse_value(std::string_view text, ColumnType type) {
  switch (type) {
    case ColumnType::boolean:
      if (auto b = parse_bool(text)) return Value{*b};
      return std::nullopt;
    case ColumnType::integer:
      if (auto i = parse_int(text)) return Value{*i};
      return std::nullopt;
    case ColumnType::floating:
      if (auto d = parse_double(text)) return Value{*d};
      return std::nullopt;
    case ColumnType::text:
      return Value{std::string(text)};
    case ColumnType::timestamp:
      if (auto t = parse_timestamp(text)) return Value{*t};
      return std::nullopt;
  }
  return std::nullopt;
}

std::string value_to_plain_text(const Value& v) {
  struct Visitor {
    std::string operator()(std::monostate) const { return {}; }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(double d) const { return format_double(d); }
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(Timestamp t) const { return format_timestamp(t); }
  };
  return std::visit(Visitor{}, v);
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace releasegate
