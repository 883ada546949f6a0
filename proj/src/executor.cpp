// SPDX-License-Identifier: Apache-2.0
#include "releasegate/executor.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace releasegate {

int compare_values(const Value& a, const Value& b) {
  if (a.index() != b.index()) throw std::logic_error("compare_values: mismatched value types");
  auto three_way = [](const auto& x, const auto& y) { return x < y ? -1 : (y < x ? 1 : 0); };
  switch (a.index()) {
    case 0: return 0;
    case 1: return three_way(std::get<bool>(a), std::get<bool>(b));
    case 2: return three_way(std::get<std::int64_t>(a), std::get<std::int64_t>(b));
    case 3: return three_way(std::get<double>(a), std::get<double>(b));
    case 4: {
      const int c = std::get<std::string>(a).compare(std::get<std::string>(b));
      return c < 0 ? -1 : (c > 0 ? 1 : 0);
    }
    case 5: return three_way(std::get<Timestamp>(a), std::get<Timestamp>(b));
  }
  return 0;
}

namespace {

using Clock = std::chrono::steady_clock;
using RowIndex = std::vector<std::size_t>;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::size_t column_index(const Schema& schema, const std::string& name) {
  auto idx = schema.find(name);
  if (!idx) throw std::logic_error("executor: unknown column '" + name + "'");
  return *idx;
}

std::size_t hash_value(const Value& v) {
  std::size_t h = v.index() * 0x9e3779b97f4a7c15ULL;
  switch (v.index()) {
    case 1: return h ^ std::hash<bool>{}(std::get<bool>(v));
    case 2: return h ^ std::hash<std::int64_t>{}(std::get<std::int64_t>(v));
    case 3: {
      const double d = std::get<double>(v);
      return h ^ std::hash<double>{}(d == 0.0 ? 0.0 : d);
    }
    case 4: return h ^ std::hash<std::string>{}(std::get<std::string>(v));
    case 5: return h ^ std::hash<std::int64_t>{}(std::get<Timestamp>(v).seconds);
  }
  return h;
}

bool same_value(const Value& a, const Value& b) {
  if (a.index() != b.index()) return false;
  return a.index() == 0 || compare_values(a, b) == 0;
}

Table gather(const Table& in, const std::vector<std::size_t>& cols, const RowIndex* rows, Schema schema) {
  std::vector<ColumnPtr> out;
  out.reserve(cols.size());
  for (auto c : cols) {
    if (!rows) {
      out.push_back(in.column_ptr(c));
      continue;
    }
    const auto& src = in.column(c);
    auto dst = std::make_shared<Column>();
    dst->reserve(rows->size());
    for (auto r : *rows) dst->push_back(src[r]);
    out.push_back(std::move(dst));
  }
  return Table(std::move(schema), std::move(out));
}

// ---------------------------------------------------------------------------
// Slice
// ---------------------------------------------------------------------------

bool condition_holds(const Condition& c, const Value& v) {
  if (c.op == Comparator::is_null) return is_null(v);
  if (c.op == Comparator::not_null) return !is_null(v);
  if (is_null(v)) return false;
  switch (c.op) {
    case Comparator::eq: return compare_values(v, c.operands.at(0)) == 0;
    case Comparator::ne: return compare_values(v, c.operands.at(0)) != 0;
    case Comparator::lt: return compare_values(v, c.operands.at(0)) < 0;
    case Comparator::le: return compare_values(v, c.operands.at(0)) <= 0;
    case Comparator::gt: return compare_values(v, c.operands.at(0)) > 0;
    case Comparator::ge: return compare_values(v, c.operands.at(0)) >= 0;
    case Comparator::in:
    case Comparator::not_in: {
      const bool found = std::any_of(c.operands.begin(), c.operands.end(),
                                     [&](const Value& o) { return compare_values(v, o) == 0; });
      return c.op == Comparator::in ? found : !found;
    }
    case Comparator::contains:
      return std::get<std::string>(v).find(std::get<std::string>(c.operands.at(0))) != std::string::npos;
    default: return false;
  }
}

void check_operands(const Condition& c, ColumnType type) {
  for (const auto& o : c.operands) {
    if (is_null(o) || !value_has_type(o, type)) {
      throw std::logic_error("executor: operand type mismatch on '" + c.column + "'");
    }
  }
  const auto n = c.operands.size();
  const bool ok = (c.op == Comparator::is_null || c.op == Comparator::not_null)   ? n == 0
                  : (c.op == Comparator::in || c.op == Comparator::not_in)        ? n >= 1
                                                                                  : n == 1;
  if (!ok) throw std::logic_error("executor: operand arity mismatch on '" + c.column + "'");
  if (c.op == Comparator::contains && type != ColumnType::text) {
    throw std::logic_error("executor: contains on a non-text column");
  }
}

/// Evaluates `p` into `mask` (one byte per row).
void evaluate(const Predicate& p, const Table& t, std::vector<char>& mask) {
  const auto rows = t.row_count();
  if (const auto* c = std::get_if<Condition>(&p.node)) {
    const auto idx = column_index(t.schema(), c->column);
    check_operands(*c, t.schema().field(idx).type);
    const auto& col = t.column(idx);
    mask.assign(rows, 0);
    for (std::size_t r = 0; r < rows; ++r) mask[r] = condition_holds(*c, col[r]) ? 1 : 0;
    return;
  }
  const auto& node = std::get<LogicNode>(p.node);
  if (node.children.empty()) throw std::logic_error("executor: empty logic node");
  const bool all = node.logic == Logic::all_of;
  evaluate(node.children.front(), t, mask);
  std::vector<char> other;
  for (std::size_t i = 1; i < node.children.size(); ++i) {
    evaluate(node.children[i], t, other);
    for (std::size_t r = 0; r < rows; ++r) mask[r] = all ? (mask[r] && other[r]) : (mask[r] || other[r]);
  }
}

Table run_slice(const SliceStep& s, const Table& t) {
  std::vector<std::size_t> cols;
  std::vector<FieldSpec> fields;
  if (s.select) {
    if (s.select->empty()) throw std::logic_error("executor: empty select");
    for (const auto& name : *s.select) {
      const auto idx = column_index(t.schema(), name);
      if (std::find(cols.begin(), cols.end(), idx) != cols.end()) {
        throw std::logic_error("executor: duplicate select column '" + name + "'");
      }
      cols.push_back(idx);
      fields.push_back(t.schema().field(idx));
    }
  } else {
    cols.resize(t.column_count());
    std::iota(cols.begin(), cols.end(), std::size_t{0});
    fields = t.schema().fields();
  }
  if (!s.where) return gather(t, cols, nullptr, Schema(std::move(fields)));
  std::vector<char> mask;
  evaluate(*s.where, t, mask);
  RowIndex rows;
  for (std::size_t r = 0; r < mask.size(); ++r) {
    if (mask[r]) rows.push_back(r);
  }
  return gather(t, cols, &rows, Schema(std::move(fields)));
}

// ---------------------------------------------------------------------------
// Aggregate
// ---------------------------------------------------------------------------

/// Assigns each row to a group keyed by `key_cols`, groups numbered by first appearance.
std::vector<RowIndex> group_rows(const Table& t, const std::vector<std::size_t>& key_cols) {
  const auto rows = t.row_count();
  std::vector<RowIndex> groups;
  if (key_cols.empty()) {
    groups.emplace_back(rows);
    std::iota(groups.front().begin(), groups.front().end(), std::size_t{0});
    return groups;
  }
  std::unordered_multimap<std::size_t, std::size_t> by_hash;
  by_hash.reserve(64);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t h = 0;
    for (auto c : key_cols) h = h * 1000003u ^ hash_value(t.at(r, c));
    auto [lo, hi] = by_hash.equal_range(h);
    std::size_t found = groups.size();
    for (auto it = lo; it != hi; ++it) {
      const auto rep = groups[it->second].front();
      const bool eq = std::all_of(key_cols.begin(), key_cols.end(),
                                  [&](std::size_t c) { return same_value(t.at(r, c), t.at(rep, c)); });
      if (eq) {
        found = it->second;
        break;
      }
    }
    if (found == groups.size()) {
      groups.emplace_back();
      by_hash.emplace(h, found);
    }
    groups[found].push_back(r);
  }
  return groups;
}

Value aggregate_group(const AggregateStep& a, const Column* col, ColumnType type, const RowIndex& rows) {
  if (a.func == AggFunc::count && !col) return static_cast<std::int64_t>(rows.size());
  std::vector<const Value*> vals;
  vals.reserve(rows.size());
  for (auto r : rows) {
    if (!is_null((*col)[r])) vals.push_back(&(*col)[r]);
  }
  switch (a.func) {
    case AggFunc::count: return static_cast<std::int64_t>(vals.size());
    case AggFunc::distinct_count: {
      std::unordered_set<std::size_t> hashes;
      std::vector<const Value*> seen;
      for (const auto* v : vals) {
        const auto h = hash_value(*v);
        if (hashes.count(h)) {
          if (std::any_of(seen.begin(), seen.end(), [&](const Value* s) { return same_value(*s, *v); })) continue;
        }
        hashes.insert(h);
        seen.push_back(v);
      }
      return static_cast<std::int64_t>(seen.size());
    }
    case AggFunc::sum: {
      if (vals.empty()) return Value{};
      if (type == ColumnType::integer) {
        std::uint64_t acc = 0;
        for (const auto* v : vals) acc += static_cast<std::uint64_t>(std::get<std::int64_t>(*v));
        return static_cast<std::int64_t>(acc);
      }
      double acc = 0;
      for (const auto* v : vals) acc += std::get<double>(*v);
      return acc;
    }
    case AggFunc::mean: {
      if (vals.empty()) return Value{};
      double acc = 0;
      for (const auto* v : vals) {
        acc += type == ColumnType::integer ? static_cast<double>(std::get<std::int64_t>(*v)) : std::get<double>(*v);
      }
      return acc / static_cast<double>(vals.size());
    }
    case AggFunc::median: {
      if (vals.empty()) return Value{};
      std::vector<double> xs;
      xs.reserve(vals.size());
      for (const auto* v : vals) {
        xs.push_back(type == ColumnType::integer ? static_cast<double>(std::get<std::int64_t>(*v))
                                                 : std::get<double>(*v));
      }
      const auto mid = xs.size() / 2;
      std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid), xs.end());
      const double upper = xs[mid];
      if (xs.size() % 2 == 1) return upper;
      const double lower = *std::max_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid));
      return lower / 2 + upper / 2;
    }
    case AggFunc::min:
    case AggFunc::max: {
      if (vals.empty()) return Value{};
      const Value* best = vals.front();
      for (const auto* v : vals) {
        const int c = compare_values(*v, *best);
        if (a.func == AggFunc::min ? c < 0 : c > 0) best = v;
      }
      return *best;
    }
  }
  return Value{};
}

Table run_aggregate(const AggregateStep& a, const Table& t) {
  std::vector<std::size_t> key_cols;
  for (const auto& g : a.group_by) key_cols.push_back(column_index(t.schema(), g));
  const Column* col = nullptr;
  ColumnType type = ColumnType::integer;
  if (a.column) {
    const auto idx = column_index(t.schema(), *a.column);
    col = &t.column(idx);
    type = t.schema().field(idx).type;
  } else if (a.func != AggFunc::count) {
    throw std::logic_error("executor: aggregate without a column");
  }
  const bool numeric = type == ColumnType::integer || type == ColumnType::floating;
  if ((a.func == AggFunc::sum || a.func == AggFunc::mean || a.func == AggFunc::median) && !numeric) {
    throw std::logic_error("executor: numeric aggregate over a non-numeric column");
  }
  if ((a.func == AggFunc::min || a.func == AggFunc::max) && type == ColumnType::boolean) {
    throw std::logic_error("executor: min/max over a boolean column");
  }
  const Schema out_schema = output_schema(a, t.schema());
  auto groups = group_rows(t, key_cols);
  // Ungrouped aggregation always yields one row, even on empty input.
  if (key_cols.empty() && groups.empty()) groups.emplace_back();

  std::vector<Column> out(key_cols.size() + 1);
  for (auto& c : out) c.reserve(groups.size());
  for (const auto& rows : groups) {
    for (std::size_t k = 0; k < key_cols.size(); ++k) out[k].push_back(t.at(rows.front(), key_cols[k]));
    out.back().push_back(aggregate_group(a, col, type, rows));
  }
  return Table(out_schema, std::move(out));
}

// ---------------------------------------------------------------------------
// Sort, limit, distinct
// ---------------------------------------------------------------------------

Table run_sort(const SortStep& s, const Table& t) {
  if (s.keys.empty()) throw std::logic_error("executor: sort without keys");
  std::vector<std::pair<const Column*, bool>> keys;
  for (const auto& k : s.keys) {
    keys.emplace_back(&t.column(column_index(t.schema(), k.column)), k.order == SortOrder::desc);
  }
  RowIndex order(t.row_count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    for (const auto& [col, desc] : keys) {
      const auto& a = (*col)[x];
      const auto& b = (*col)[y];
      const bool an = is_null(a), bn = is_null(b);
      if (an || bn) {
        if (an && bn) continue;
        return bn;  // nulls last
      }
      const int c = compare_values(a, b);
      if (c != 0) return desc ? c > 0 : c < 0;
    }
    return false;
  });
  std::vector<std::size_t> cols(t.column_count());
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  return gather(t, cols, &order, t.schema());
}

Table run_limit(const LimitStep& l, const Table& t) {
  if (l.n == 0) throw std::logic_error("executor: limit 0");
  if (l.n >= t.row_count()) return t;
  RowIndex rows(l.n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::vector<std::size_t> cols(t.column_count());
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  return gather(t, cols, &rows, t.schema());
}

Table run_distinct(const DistinctStep& d, const Table& t) {
  if (d.columns.empty()) throw std::logic_error("executor: distinct without columns");
  std::vector<std::size_t> cols;
  std::vector<FieldSpec> fields;
  for (const auto& name : d.columns) {
    const auto idx = column_index(t.schema(), name);
    if (std::find(cols.begin(), cols.end(), idx) != cols.end()) {
      throw std::logic_error("executor: duplicate distinct column '" + name + "'");
    }
    cols.push_back(idx);
    fields.push_back(t.schema().field(idx));
  }
  const auto groups = group_rows(t, cols);
  RowIndex firsts;
  firsts.reserve(groups.size());
  for (const auto& g : groups) firsts.push_back(g.front());
  return gather(t, cols, &firsts, Schema(std::move(fields)));
}

}  // namespace

Table execute_step(const Step& step, const Table& table) {
  struct Visitor {
    const Table& t;
    Table operator()(const SliceStep& s) const { return run_slice(s, t); }
    Table operator()(const AggregateStep& a) const { return run_aggregate(a, t); }
    Table operator()(const SortStep& s) const { return run_sort(s, t); }
    Table operator()(const LimitStep& l) const { return run_limit(l, t); }
    Table operator()(const DistinctStep& d) const { return run_distinct(d, t); }
  };
  return std::visit(Visitor{table}, step);
}

ExecutionResult execute_plan(const AnalysisPlan& plan, const Table& table) {
  const auto start = Clock::now();
  ExecutionResult result{table, {}};
  for (const auto& step : plan.steps) {
    const auto step_start = Clock::now();
    const auto in_rows = result.table.row_count();
    result.table = execute_step(step, result.table);
    result.trace.steps.push_back({std::string(step_kind(step)), in_rows, result.table.row_count(),
                                  ms_since(step_start)});
  }
  result.trace.total_ms = ms_since(start);
  return result;
}

}  // namespace releasegate
