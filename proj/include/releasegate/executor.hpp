// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "releasegate/plan.hpp"
#include "releasegate/table.hpp"

namespace releasegate {

struct StepTrace {
  std::string kind;
  std::size_t input_rows = 0;
  std::size_t output_rows = 0;
  double wall_ms = 0;
};

struct ExecutionTrace {
  std::vector<StepTrace> steps;
  double total_ms = 0;
};

struct ExecutionResult {
  Table table;
  ExecutionTrace trace;
};

// Execution semantics:
//  - null satisfies no comparator except is_null;
//  - grouping puts nulls in one group and orders groups by first appearance;
//  - sort is stable with nulls last in either direction;
//  - distinct keeps the first occurrence;
//  - sum/mean/median/min/max with no non-null input yield null, count yields 0.
//
// Preconditions are those of validate_plan. A violated precondition throws
// std::logic_error; validated plans never do.

Table execute_step(const Step& step, const Table& table);

ExecutionResult execute_plan(const AnalysisPlan& plan, const Table& table);

/// Three-way comparison of two non-null values of the same variant.
int compare_values(const Value& a, const Value& b);

}  // namespace releasegate
