// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "releasegate/plan.hpp"

namespace releasegate {

// Plan wire format:
//
//   {"steps": [
//     {"kind": "slice", "select": ["a", "b"] | "all",
//      "where": {"and": [{"col": "a", "op": "eq", "value": "x"}, {"or": [...]}]}},
//     {"kind": "aggregate", "func": "count", "column": "b", "group_by": ["a"]},
//     {"kind": "sort", "keys": [{"col": "count", "order": "desc"}]},
//     {"kind": "limit", "n": 5},
//     {"kind": "distinct", "columns": ["a"]}
//   ]}
//
// Unknown keys and step kinds are rejected.

nlohmann::json value_to_json(const Value& v);
/// Converts a JSON scalar to a value of `type`; nullopt on mismatch.
std::optional<Value> value_from_json(const nlohmann::json& j, ColumnType type);

nlohmann::ordered_json step_to_json(const Step& step);
nlohmann::ordered_json plan_to_json(const AnalysisPlan& plan);
/// Pretty-printed wire document.
std::string plan_to_wire(const AnalysisPlan& plan);
std::string step_to_wire(const Step& step);

/// Returns the body of the last ``` fenced block in `text`, or `text` itself when unfenced.
std::string_view strip_code_fence(std::string_view text);

/// Parses and validates a plan document against `schema`. Field names are resolved
/// case-insensitively and rewritten in schema casing. Throws PlanError.
AnalysisPlan parse_plan(std::string_view text, const Schema& schema);
AnalysisPlan plan_from_json(const nlohmann::json& doc, const Schema& schema);

/// Parses one step document (`{"kind": ...}`) to be appended after `prior` steps.
/// Validation covers the whole `prior + step` sequence. Throws PlanError.
Step parse_step(std::string_view text, const Schema& schema, const AnalysisPlan& prior = {});

}  // namespace releasegate
