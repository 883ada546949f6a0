// SPDX-License-Identifier: Apache-2.0
#include "releasegate/plan.hpp"

#include <algorithm>
#include <array>
#include <numeric>

#include <nlohmann/json.hpp>

#include "releasegate/plan_wire.hpp"

namespace releasegate {

namespace {

constexpr std::array<std::string_view, 11> kComparatorNames{"eq", "ne", "lt",       "le",      "gt",      "ge",
                                                            "in", "not_in", "contains", "is_null", "not_null"};
constexpr std::array<std::string_view, 7> kAggNames{"count", "sum", "mean", "min", "max", "median", "distinct_count"};

bool is_numeric(ColumnType t) { return t == ColumnType::integer || t == ColumnType::floating; }
bool is_ordered(ColumnType t) { return is_numeric(t) || t == ColumnType::timestamp; }

}  // namespace

std::string_view to_string(Comparator op) { return kComparatorNames[static_cast<std::size_t>(op)]; }
std::string_view to_string(AggFunc func) { return kAggNames[static_cast<std::size_t>(func)]; }
std::string_view to_string(SortOrder order) { return order == SortOrder::asc ? "asc" : "desc"; }

std::string_view step_kind(const Step& step) {
  static constexpr std::array<std::string_view, 5> names{"slice", "aggregate", "sort", "limit", "distinct"};
  return names[step.index()];
}

std::optional<Comparator> parse_comparator(std::string_view s) {
  for (std::size_t i = 0; i < kComparatorNames.size(); ++i) {
    if (kComparatorNames[i] == s) return static_cast<Comparator>(i);
  }
  return std::nullopt;
}

std::optional<AggFunc> parse_agg_func(std::string_view s) {
  for (std::size_t i = 0; i < kAggNames.size(); ++i) {
    if (kAggNames[i] == s) return static_cast<AggFunc>(i);
  }
  return std::nullopt;
}

std::string aggregate_output_name(const AggregateStep& step) {
  if (!step.column) return "count";
  return std::string(to_string(step.func)) + "_" + *step.column;
}

PlanError::PlanError(PlanErrorKind kind, std::string message, std::optional<std::size_t> position,
                     std::string column, std::vector<std::string> suggestions)
    : std::runtime_error(std::move(message)),
      kind_(kind),
      position_(position),
      column_(std::move(column)),
      suggestions_(std::move(suggestions)) {}

std::size_t predicate_depth(const Predicate& p) {
  if (const auto* node = std::get_if<LogicNode>(&p.node)) {
    std::size_t deepest = 0;
    for (const auto& c : node->children) deepest = std::max(deepest, predicate_depth(c));
    return deepest + 1;
  }
  return 1;
}

namespace {

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

std::vector<std::string> near_matches(std::string_view name, const Schema& schema) {
  const auto needle = to_lower(name);
  const std::size_t limit = std::max<std::size_t>(2, needle.size() / 3);
  std::vector<std::pair<std::size_t, std::string>> scored;
  for (const auto& f : schema.fields()) {
    const auto d = edit_distance(needle, to_lower(f.name));
    if (d <= limit) scored.emplace_back(d, f.name);
  }
  std::sort(scored.begin(), scored.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scored.size() && i < 3; ++i) out.push_back(scored[i].second);
  return out;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace {

class StepChecker {
 public:
  StepChecker(std::size_t index, const Schema& schema, std::vector<PlanViolation>& out)
      : index_(index), schema_(schema), out_(out) {}

  void fail(std::string message, PlanErrorKind kind = PlanErrorKind::invalid) {
    out_.push_back({index_, std::move(message), kind});
  }
  void type_fail(std::string message) { fail(std::move(message), PlanErrorKind::type); }

  const FieldSpec* column(const std::string& name, std::string_view role) {
    const auto* f = schema_.lookup(name);
    if (!f) {
      std::string msg = std::string(role) + " column '" + name + "' is not in the running schema";
      auto near = near_matches(name, schema_);
      if (!near.empty()) {
        msg += " (did you mean";
        for (std::size_t i = 0; i < near.size(); ++i) msg += (i ? ", '" : " '") + near[i] + "'";
        msg += "?)";
      }
      fail(std::move(msg), PlanErrorKind::unknown_column);
    }
    return f;
  }

  void unique_names(const std::vector<std::string>& names, std::string_view role) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (iequals(names[i], names[j])) {
          fail(std::string(role) + " lists column '" + names[i] + "' more than once");
          return;
        }
      }
    }
  }

  void condition(const Condition& c) {
    const auto* f = column(c.column, "where");
    if (!f) return;
    const auto type = f->type;
    const auto arity = c.operands.size();
    auto operands_typed = [&] {
      for (const auto& v : c.operands) {
        if (is_null(v)) {
          type_fail("condition on '" + c.column + "' has a null operand; use is_null/not_null");
          return false;
        }
        if (!value_has_type(v, type)) {
          type_fail("condition on '" + c.column + "' compares a " + std::string(type_name(type)) +
               " column with an operand of another type");
          return false;
        }
      }
      return true;
    };
    switch (c.op) {
      case Comparator::eq:
      case Comparator::ne:
        if (arity != 1) return type_fail("'" + std::string(to_string(c.op)) + "' takes exactly one operand");
        operands_typed();
        return;
      case Comparator::lt:
      case Comparator::le:
      case Comparator::gt:
      case Comparator::ge:
        if (arity != 1) return type_fail("'" + std::string(to_string(c.op)) + "' takes exactly one operand");
        if (!is_ordered(type)) {
          return type_fail("'" + std::string(to_string(c.op)) + "' needs an int, float or timestamp column; '" +
                      c.column + "' is " + std::string(type_name(type)));
        }
        operands_typed();
        return;
      case Comparator::in:
      case Comparator::not_in:
        if (arity == 0) return type_fail("'" + std::string(to_string(c.op)) + "' needs a non-empty value list");
        operands_typed();
        return;
      case Comparator::contains:
        if (arity != 1) return type_fail("'contains' takes exactly one operand");
        if (type != ColumnType::text) return type_fail("'contains' needs a text column; '" + c.column + "' is " +
                                                  std::string(type_name(type)));
        operands_typed();
        return;
      case Comparator::is_null:
      case Comparator::not_null:
        if (arity != 0) type_fail("'" + std::string(to_string(c.op)) + "' takes no operand");
        return;
    }
  }

  void predicate(const Predicate& p) {
    if (const auto* c = std::get_if<Condition>(&p.node)) return condition(*c);
    const auto& node = std::get<LogicNode>(p.node);
    if (node.children.empty()) return fail("and/or node with no children");
    for (const auto& child : node.children) predicate(child);
  }

  void slice(const SliceStep& s) {
    if (s.select) {
      if (s.select->empty()) fail("slice selects no columns");
      for (const auto& name : *s.select) column(name, "select");
      unique_names(*s.select, "select");
    }
    if (s.where) {
      if (predicate_depth(*s.where) > kMaxPredicateDepth) {
        fail("predicate nesting exceeds depth " + std::to_string(kMaxPredicateDepth));
      }
      predicate(*s.where);
    }
  }

  void aggregate(const AggregateStep& a) {
    const FieldSpec* target = nullptr;
    if (a.column) {
      target = column(*a.column, "aggregate");
    } else if (a.func != AggFunc::count) {
      type_fail("'" + std::string(to_string(a.func)) + "' needs a column");
    }
    if (target) {
      const auto t = target->type;
      switch (a.func) {
        case AggFunc::sum:
        case AggFunc::mean:
        case AggFunc::median:
          if (!is_numeric(t)) {
            type_fail("'" + std::string(to_string(a.func)) + "' needs an int or float column; '" + target->name + "' is " +
                 std::string(type_name(t)));
          }
          break;
        case AggFunc::min:
        case AggFunc::max:
          if (!is_ordered(t) && t != ColumnType::text) {
            type_fail("'" + std::string(to_string(a.func)) + "' needs an ordered column; '" + target->name + "' is " +
                 std::string(type_name(t)));
          }
          break;
        case AggFunc::count:
        case AggFunc::distinct_count:
          break;
      }
    }
    for (const auto& g : a.group_by) {
      column(g, "group_by");
      if (a.column && iequals(g, *a.column)) fail("group_by column '" + g + "' is also the aggregated column");
      if (iequals(g, aggregate_output_name(a))) {
        fail("group_by column '" + g + "' collides with the aggregate result name");
      }
    }
    unique_names(a.group_by, "group_by");
  }

  void sort(const SortStep& s) {
    if (s.keys.empty()) fail("sort has no keys");
    std::vector<std::string> names;
    for (const auto& k : s.keys) {
      column(k.column, "sort");
      names.push_back(k.column);
    }
    unique_names(names, "sort");
  }

  void distinct(const DistinctStep& d) {
    if (d.columns.empty()) fail("distinct lists no columns");
    for (const auto& c : d.columns) column(c, "distinct");
    unique_names(d.columns, "distinct");
  }

 private:
  std::size_t index_;
  const Schema& schema_;
  std::vector<PlanViolation>& out_;
};

FieldSpec aggregate_field(const AggregateStep& a, const Schema& in) {
  FieldSpec f;
  f.name = aggregate_output_name(a);
  const FieldSpec* src = a.column ? in.lookup(*a.column) : nullptr;
  switch (a.func) {
    case AggFunc::count:
    case AggFunc::distinct_count:
      f.type = ColumnType::integer;
      break;
    case AggFunc::sum:
      f.type = src ? src->type : ColumnType::floating;
      break;
    case AggFunc::mean:
    case AggFunc::median:
      f.type = ColumnType::floating;
      break;
    case AggFunc::min:
    case AggFunc::max:
      f.type = src ? src->type : ColumnType::floating;
      if (src) f.states = src->states;
      break;
  }
  f.description = std::string(to_string(a.func)) + (src ? " of " + src->name : " of rows");
  if (!a.group_by.empty()) f.description += " per group";
  return f;
}

std::vector<FieldSpec> project(const Schema& in, const std::vector<std::string>& names) {
  std::vector<FieldSpec> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(in.field(in.find(n).value()));
  return out;
}

}  // namespace

Schema output_schema(const Step& step, const Schema& in) {
  struct Visitor {
    const Schema& in;
    Schema operator()(const SliceStep& s) const { return s.select ? Schema(project(in, *s.select)) : in; }
    Schema operator()(const AggregateStep& a) const {
      auto fields = project(in, a.group_by);
      fields.push_back(aggregate_field(a, in));
      return Schema(std::move(fields));
    }
    Schema operator()(const SortStep&) const { return in; }
    Schema operator()(const LimitStep&) const { return in; }
    Schema operator()(const DistinctStep& d) const { return Schema(project(in, d.columns)); }
  };
  return std::visit(Visitor{in}, step);
}

Schema plan_output_schema(const AnalysisPlan& plan, const Schema& schema) {
  Schema cur = schema;
  for (const auto& s : plan.steps) cur = output_schema(s, cur);
  return cur;
}

std::vector<PlanViolation> validate_plan(const AnalysisPlan& plan, const Schema& schema) {
  std::vector<PlanViolation> out;
  if (plan.steps.empty()) {
    out.push_back({0, "plan has no steps"});
    return out;
  }
  Schema cur = schema;
  bool scalar = false;
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    const auto& step = plan.steps[i];
    const auto before = out.size();
    StepChecker check(i, cur, out);
    if (scalar && !std::holds_alternative<LimitStep>(step)) {
      check.fail("only a limit step may follow an aggregate without group_by");
    }
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, SliceStep>) {
            check.slice(s);
          } else if constexpr (std::is_same_v<T, AggregateStep>) {
            check.aggregate(s);
          } else if constexpr (std::is_same_v<T, SortStep>) {
            check.sort(s);
          } else if constexpr (std::is_same_v<T, LimitStep>) {
            if (s.n == 0) check.fail("limit must be positive");
          } else {
            check.distinct(s);
          }
        },
        step);
    if (out.size() != before) return out;
    if (const auto* a = std::get_if<AggregateStep>(&step); a && a->group_by.empty()) scalar = true;
    cur = output_schema(step, cur);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Canonical form
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

std::string resolve(const Schema& s, const std::string& name) {
  auto i = s.find(name);
  return i ? s.field(*i).name : name;
}

json canonical_predicate(const Predicate& p, const Schema& s) {
  if (const auto* c = std::get_if<Condition>(&p.node)) {
    json leaf = json::object();
    leaf["col"] = resolve(s, c->column);
    leaf["op"] = std::string(to_string(c->op));
    if (c->op == Comparator::in || c->op == Comparator::not_in) {
      std::vector<std::string> items;
      for (const auto& v : c->operands) items.push_back(value_to_json(v).dump());
      std::sort(items.begin(), items.end());
      items.erase(std::unique(items.begin(), items.end()), items.end());
      json arr = json::array();
      for (const auto& it : items) arr.push_back(json::parse(it));
      leaf["value"] = std::move(arr);
    } else if (!c->operands.empty()) {
      leaf["value"] = value_to_json(c->operands.front());
    }
    return leaf;
  }
  const auto& node = std::get<LogicNode>(p.node);
  std::vector<std::pair<std::string, json>> children;
  for (const auto& child : node.children) {
    auto j = canonical_predicate(child, s);
    auto text = j.dump();
    children.emplace_back(std::move(text), std::move(j));
  }
  // Leaves sort by (col, op, value) because their keys serialize in that order.
  std::stable_sort(children.begin(), children.end(), [](const auto& a, const auto& b) {
    const bool a_leaf = a.second.contains("col");
    const bool b_leaf = b.second.contains("col");
    if (a_leaf != b_leaf) return a_leaf;
    if (a_leaf) {
      auto ka = std::tie(a.second["col"].template get_ref<const std::string&>(),
                         a.second["op"].template get_ref<const std::string&>());
      auto kb = std::tie(b.second["col"].template get_ref<const std::string&>(),
                         b.second["op"].template get_ref<const std::string&>());
      if (ka != kb) return ka < kb;
    }
    return a.first < b.first;
  });
  json arr = json::array();
  for (auto& [text, j] : children) arr.push_back(std::move(j));
  json out = json::object();
  out[node.logic == Logic::all_of ? "and" : "or"] = std::move(arr);
  return out;
}

json names_json(const Schema& s, const std::vector<std::string>& names) {
  json arr = json::array();
  for (const auto& n : names) arr.push_back(resolve(s, n));
  return arr;
}

}  // namespace

std::string canonicalize(const AnalysisPlan& plan, const Schema& schema) {
  json steps = json::array();
  Schema cur = schema;
  for (const auto& step : plan.steps) {
    json j = json::object();
    j["kind"] = std::string(step_kind(step));
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, SliceStep>) {
            j["select"] = s.select ? names_json(cur, *s.select) : names_json(cur, cur.names());
            if (s.where) j["where"] = canonical_predicate(*s.where, cur);
          } else if constexpr (std::is_same_v<T, AggregateStep>) {
            j["func"] = std::string(to_string(s.func));
            if (s.column) j["column"] = resolve(cur, *s.column);
            j["group_by"] = names_json(cur, s.group_by);
          } else if constexpr (std::is_same_v<T, SortStep>) {
            json keys = json::array();
            for (const auto& k : s.keys) {
              keys.push_back(json{{"col", resolve(cur, k.column)}, {"order", std::string(to_string(k.order))}});
            }
            j["keys"] = std::move(keys);
          } else if constexpr (std::is_same_v<T, LimitStep>) {
            j["n"] = s.n;
          } else {
            j["columns"] = names_json(cur, s.columns);
          }
        },
        step);
    steps.push_back(std::move(j));
    cur = output_schema(step, cur);
  }
  return json{{"steps", std::move(steps)}}.dump();
}

// ---------------------------------------------------------------------------
// Natural-language rendering
// ---------------------------------------------------------------------------

namespace {

std::string render_value(const Value& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return "'" + *s + "'";
  if (std::holds_alternative<Timestamp>(v)) return "'" + value_to_plain_text(v) + "'";
  return value_to_plain_text(v);
}

std::string render_list(const std::vector<Value>& values) {
  std::string out = "(";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += render_value(values[i]);
  }
  return out + ")";
}

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += (i + 1 == names.size()) ? " and " : ", ";
    out += names[i];
  }
  return out;
}

std::string render_condition(const Condition& c) {
  const auto& col = c.column;
  const auto first = [&] { return c.operands.empty() ? std::string("?") : render_value(c.operands.front()); };
  switch (c.op) {
    case Comparator::eq: return col + " = " + first();
    case Comparator::ne: return col + " != " + first();
    case Comparator::lt: return col + " < " + first();
    case Comparator::le: return col + " <= " + first();
    case Comparator::gt: return col + " > " + first();
    case Comparator::ge: return col + " >= " + first();
    case Comparator::in: return col + " is one of " + render_list(c.operands);
    case Comparator::not_in: return col + " is not one of " + render_list(c.operands);
    case Comparator::contains: return col + " contains " + first();
    case Comparator::is_null: return col + " is missing";
    case Comparator::not_null: return col + " is present";
  }
  return col;
}

std::string render_predicate(const Predicate& p, bool nested) {
  if (const auto* c = std::get_if<Condition>(&p.node)) return render_condition(*c);
  const auto& node = std::get<LogicNode>(p.node);
  std::string out;
  const char* joiner = node.logic == Logic::all_of ? " and " : " or ";
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    if (i) out += joiner;
    out += render_predicate(node.children[i], true);
  }
  if (nested && node.children.size() > 1) return "(" + out + ")";
  return out;
}

std::string per_groups(const std::vector<std::string>& group_by) {
  return group_by.empty() ? std::string{} : " per " + join_names(group_by);
}

}  // namespace

std::string render_step(const Step& step) {
  struct Visitor {
    std::string operator()(const SliceStep& s) const {
      std::string out;
      if (!s.select) {
        out = "Select all columns";
      } else {
        out = std::string(s.select->size() == 1 ? "Select column " : "Select columns ") + join_names(*s.select);
      }
      if (s.where) out += " from rows where " + render_predicate(*s.where, false);
      return out + ".";
    }
    std::string operator()(const AggregateStep& a) const {
      const std::string col = a.column.value_or("");
      const auto groups = per_groups(a.group_by);
      switch (a.func) {
        case AggFunc::count:
          return a.column ? "Count non-missing values of " + col + groups + "." : "Count rows" + groups + ".";
        case AggFunc::distinct_count: return "Count distinct values of " + col + groups + ".";
        case AggFunc::sum: return "Compute the sum of " + col + groups + ".";
        case AggFunc::mean: return "Compute the mean of " + col + groups + ".";
        case AggFunc::median: return "Compute the median of " + col + groups + ".";
        case AggFunc::min: return "Find the minimum of " + col + groups + ".";
        case AggFunc::max: return "Find the maximum of " + col + groups + ".";
      }
      return {};
    }
    std::string operator()(const SortStep& s) const {
      std::string out = "Sort rows by ";
      for (std::size_t i = 0; i < s.keys.size(); ++i) {
        if (i) out += ", then by ";
        out += s.keys[i].column + (s.keys[i].order == SortOrder::asc ? " ascending" : " descending");
      }
      return out + ".";
    }
    std::string operator()(const LimitStep& l) const {
      return l.n == 1 ? std::string("Keep the first row.") : "Keep the first " + std::to_string(l.n) + " rows.";
    }
    std::string operator()(const DistinctStep& d) const {
      return (d.columns.size() == 1 ? "Keep distinct values of " : "Keep distinct combinations of ") +
             join_names(d.columns) + ".";
    }
  };
  return std::visit(Visitor{}, step);
}

std::vector<std::string> render_steps(const AnalysisPlan& plan) {
  std::vector<std::string> out;
  out.reserve(plan.steps.size());
  for (const auto& s : plan.steps) out.push_back(render_step(s));
  return out;
}

// ---------------------------------------------------------------------------
// Difficulty
// ---------------------------------------------------------------------------

bool is_advanced_step(const Step& step) {
  const auto* a = std::get_if<AggregateStep>(&step);
  if (!a) return false;
  if (!a->group_by.empty()) return true;
  switch (a->func) {
    case AggFunc::mean:
    case AggFunc::median:
    case AggFunc::sum:
    case AggFunc::distinct_count:
      return true;
    default:
      return false;
  }
}

int classify_difficulty(const AnalysisPlan& plan) {
  const auto total = plan.steps.size();
  const auto advanced =
      static_cast<std::size_t>(std::count_if(plan.steps.begin(), plan.steps.end(), is_advanced_step));
  if (advanced >= 2 || (advanced >= 1 && total >= 4)) return 4;
  if (advanced >= 1 || total > 3) return 3;
  if (total == 2 || total == 3) return 2;
  return 1;
}

bool plan_output_is_ordered(const AnalysisPlan& plan) {
  for (auto it = plan.steps.rbegin(); it != plan.steps.rend(); ++it) {
    if (std::holds_alternative<SortStep>(*it)) return true;
    if (std::holds_alternative<AggregateStep>(*it)) return false;
  }
  return false;
}

}  // namespace releasegate
