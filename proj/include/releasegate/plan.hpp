// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "releasegate/table.hpp"

namespace releasegate {

// ---------------------------------------------------------------------------
// Plan vocabulary. A plan is an ordered list of slice and operation steps; nothing
// outside these five step kinds can be expressed.
// ---------------------------------------------------------------------------

enum class Comparator { eq, ne, lt, le, gt, ge, in, not_in, contains, is_null, not_null };
enum class Logic { all_of, any_of };
enum class AggFunc { count, sum, mean, min, max, median, distinct_count };
enum class SortOrder { asc, desc };

struct Condition {
  std::string column;
  Comparator op = Comparator::eq;
  /// One value for scalar comparators, a non-empty list for in/not_in, none for null tests.
  std::vector<Value> operands;

  friend bool operator==(const Condition&, const Condition&) = default;
};

struct Predicate;

struct LogicNode {
  Logic logic = Logic::all_of;
  std::vector<Predicate> children;

  friend bool operator==(const LogicNode&, const LogicNode&) = default;
};

struct Predicate {
  std::variant<Condition, LogicNode> node;

  friend bool operator==(const Predicate&, const Predicate&) = default;
};

inline constexpr std::size_t kMaxPredicateDepth = 4;

struct SliceStep {
  /// nullopt selects every column of the running schema.
  std::optional<std::vector<std::string>> select;
  std::optional<Predicate> where;

  friend bool operator==(const SliceStep&, const SliceStep&) = default;
};

struct AggregateStep {
  AggFunc func = AggFunc::count;
  std::optional<std::string> column;
  std::vector<std::string> group_by;

  friend bool operator==(const AggregateStep&, const AggregateStep&) = default;
};

struct SortKey {
  std::string column;
  SortOrder order = SortOrder::asc;

  friend bool operator==(const SortKey&, const SortKey&) = default;
};

struct SortStep {
  std::vector<SortKey> keys;

  friend bool operator==(const SortStep&, const SortStep&) = default;
};

struct LimitStep {
  std::size_t n = 1;

  friend bool operator==(const LimitStep&, const LimitStep&) = default;
};

/// Projects to `columns` and keeps the first occurrence of each distinct row.
struct DistinctStep {
  std::vector<std::string> columns;

  friend bool operator==(const DistinctStep&, const DistinctStep&) = default;
};

using Step = std::variant<SliceStep, AggregateStep, SortStep, LimitStep, DistinctStep>;

struct AnalysisPlan {
  std::vector<Step> steps;

  friend bool operator==(const AnalysisPlan&, const AnalysisPlan&) = default;
};

std::string_view to_string(Comparator op);
std::string_view to_string(AggFunc func);
std::string_view to_string(SortOrder order);
std::string_view step_kind(const Step& step);
std::optional<Comparator> parse_comparator(std::string_view s);
std::optional<AggFunc> parse_agg_func(std::string_view s);

/// Name of the column an aggregate produces: `<func>_<column>`, or `count`.
std::string aggregate_output_name(const AggregateStep& step);

// ---------------------------------------------------------------------------
// Errors and validation
// ---------------------------------------------------------------------------

enum class PlanErrorKind { syntax, unknown_column, type, invalid };

class PlanError : public std::runtime_error {
 public:
  PlanError(PlanErrorKind kind, std::string message, std::optional<std::size_t> position = std::nullopt,
            std::string column = {}, std::vector<std::string> suggestions = {});

  PlanErrorKind kind() const { return kind_; }
  /// Byte offset into the document for syntax errors.
  std::optional<std::size_t> position() const { return position_; }
  const std::string& column() const { return column_; }
  const std::vector<std::string>& suggestions() const { return suggestions_; }

 private:
  PlanErrorKind kind_;
  std::optional<std::size_t> position_;
  std::string column_;
  std::vector<std::string> suggestions_;
};

struct PlanViolation {
  std::size_t step = 0;
  std::string message;
  PlanErrorKind kind = PlanErrorKind::invalid;

  friend bool operator==(const PlanViolation&, const PlanViolation&) = default;
};

/// Empty iff every step is well-formed against the schema produced by the steps before it.
std::vector<PlanViolation> validate_plan(const AnalysisPlan& plan, const Schema& schema);

/// Schema after applying `step` to input of schema `in`. Only meaningful for valid steps.
Schema output_schema(const Step& step, const Schema& in);

/// Schema threaded through every step of a valid plan.
Schema plan_output_schema(const AnalysisPlan& plan, const Schema& schema);

/// Predicate nesting depth; a lone condition has depth 1.
std::size_t predicate_depth(const Predicate& p);

/// Field names within edit distance of `name`, closest first.
std::vector<std::string> near_matches(std::string_view name, const Schema& schema);

// ---------------------------------------------------------------------------
// Plan utilities
// ---------------------------------------------------------------------------

/// Canonical text for vote equality. Precondition: the plan validates against `schema`.
std::string canonicalize(const AnalysisPlan& plan, const Schema& schema);

/// One sentence per step.
std::vector<std::string> render_steps(const AnalysisPlan& plan);
std::string render_step(const Step& step);

/// Difficulty level 1..4 from the count of basic and advanced steps.
int classify_difficulty(const AnalysisPlan& plan);
bool is_advanced_step(const Step& step);

/// True when the last order-affecting step (sort or aggregate) is a sort, which makes the row
/// order part of the answer.
bool plan_output_is_ordered(const AnalysisPlan& plan);

}  // namespace releasegate
