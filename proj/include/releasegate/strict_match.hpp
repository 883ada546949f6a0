// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>

#include "releasegate/table.hpp"

namespace releasegate {

enum class DiffKind { none, columns, row_count, row };

struct MatchDiff {
  DiffKind kind = DiffKind::none;
  std::string message;
  /// Row of `actual` where the first divergence was found.
  std::optional<std::size_t> row;
};

struct MatchVerdict {
  bool matched = true;
  MatchDiff diff;
};

inline constexpr double kFloatRelativeTolerance = 1e-9;

/// Cell equality: exact for every type except float, which uses kFloatRelativeTolerance.
bool cells_match(const Value& a, const Value& b);

/// Same column names (any order) with the same types, same row count, and rows that
/// correspond exactly: positionally when `ordered`, as multisets otherwise.
MatchVerdict strict_match(const Table& actual, const Table& expected, bool ordered);

std::string_view to_string(DiffKind kind);

}  // namespace releasegate
