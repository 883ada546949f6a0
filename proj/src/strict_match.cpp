// SPDX-License-Identifier: Apache-2.0
#include "releasegate/strict_match.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace releasegate {

std::string_view to_string(DiffKind kind) {
  switch (kind) {
    case DiffKind::none: return "none";
    case DiffKind::columns: return "columns";
    case DiffKind::row_count: return "row_count";
    case DiffKind::row: return "row";
  }
  return "?";
}

bool cells_match(const Value& a, const Value& b) {
  if (a.index() != b.index()) return false;
  if (const auto* x = std::get_if<double>(&a)) {
    const double y = std::get<double>(b);
    if (*x == y) return true;
    return std::fabs(*x - y) <= kFloatRelativeTolerance * std::max(std::fabs(*x), std::fabs(y));
  }
  return a == b;
}

namespace {

std::string render_cell(const Value& v) { return is_null(v) ? "null" : quote_string(value_to_plain_text(v)); }

std::string render_row(const Table& t, std::size_t row, const std::vector<std::size_t>& cols) {
  std::string out = "(";
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) out += ", ";
    out += render_cell(t.at(row, cols[i]));
  }
  return out + ")";
}

MatchVerdict mismatch(DiffKind kind, std::string message, std::optional<std::size_t> row = std::nullopt) {
  return MatchVerdict{false, MatchDiff{kind, std::move(message), row}};
}

/// Exact key over the non-float cells; float cells are compared with tolerance afterwards.
std::string bucket_key(const Table& t, std::size_t row, const std::vector<std::size_t>& cols) {
  std::string key;
  for (auto c : cols) {
    const auto& v = t.at(row, c);
    key.push_back(static_cast<char>('0' + v.index()));
    if (!std::holds_alternative<double>(v)) key += quote_string(value_to_plain_text(v));
    key.push_back('\x1f');
  }
  return key;
}

}  // namespace

MatchVerdict strict_match(const Table& actual, const Table& expected, bool ordered) {
  const auto& exp_fields = expected.schema().fields();
  std::vector<std::size_t> act_cols;  // actual column for each expected column
  std::vector<std::string> missing, extra;
  for (const auto& f : exp_fields) {
    auto it = std::find_if(actual.schema().fields().begin(), actual.schema().fields().end(),
                           [&](const FieldSpec& a) { return a.name == f.name; });
    if (it == actual.schema().fields().end()) {
      missing.push_back(f.name);
    } else {
      act_cols.push_back(static_cast<std::size_t>(it - actual.schema().fields().begin()));
    }
  }
  for (const auto& a : actual.schema().fields()) {
    if (std::none_of(exp_fields.begin(), exp_fields.end(), [&](const FieldSpec& f) { return f.name == a.name; })) {
      extra.push_back(a.name);
    }
  }
  if (!missing.empty() || !extra.empty()) {
    std::string msg;
    auto list = [](const std::vector<std::string>& names) {
      std::string s;
      for (std::size_t i = 0; i < names.size(); ++i) s += (i ? ", " : "") + names[i];
      return s;
    };
    if (!missing.empty()) msg += "missing columns: " + list(missing);
    if (!extra.empty()) msg += std::string(msg.empty() ? "" : "; ") + "unexpected columns: " + list(extra);
    return mismatch(DiffKind::columns, msg);
  }
  for (std::size_t i = 0; i < exp_fields.size(); ++i) {
    const auto& af = actual.schema().field(act_cols[i]);
    if (af.type != exp_fields[i].type) {
      return mismatch(DiffKind::columns, "column '" + af.name + "' has type " + std::string(type_name(af.type)) +
                                             ", expected " + std::string(type_name(exp_fields[i].type)));
    }
  }
  if (actual.row_count() != expected.row_count()) {
    return mismatch(DiffKind::row_count, "expected " + std::to_string(expected.row_count()) + " rows, got " +
                                             std::to_string(actual.row_count()));
  }

  std::vector<std::size_t> exp_cols(exp_fields.size());
  for (std::size_t i = 0; i < exp_cols.size(); ++i) exp_cols[i] = i;

  const auto rows = expected.row_count();
  if (ordered) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < exp_cols.size(); ++c) {
        if (!cells_match(actual.at(r, act_cols[c]), expected.at(r, c))) {
          return mismatch(DiffKind::row,
                          "row " + std::to_string(r) + ", column '" + exp_fields[c].name + "': expected " +
                              render_cell(expected.at(r, c)) + ", got " + render_cell(actual.at(r, act_cols[c])),
                          r);
        }
      }
    }
    return {};
  }

  std::unordered_map<std::string, std::vector<std::size_t>> buckets;
  for (std::size_t r = 0; r < rows; ++r) buckets[bucket_key(expected, r, exp_cols)].push_back(r);
  std::vector<char> used(rows, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    auto it = buckets.find(bucket_key(actual, r, act_cols));
    bool found = false;
    if (it != buckets.end()) {
      for (auto e : it->second) {
        if (used[e]) continue;
        bool same = true;
        for (std::size_t c = 0; c < exp_cols.size() && same; ++c) {
          same = cells_match(actual.at(r, act_cols[c]), expected.at(e, c));
        }
        if (same) {
          used[e] = 1;
          found = true;
          break;
        }
      }
    }
    if (!found) {
      return mismatch(DiffKind::row,
                      "row " + std::to_string(r) + " " + render_row(actual, r, act_cols) +
                          " has no matching expected row",
                      r);
    }
  }
  return {};
}

}  // namespace releasegate
