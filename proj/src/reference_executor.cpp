// SPDX-License-Identifier: Apache-2.0
#include "releasegate/reference_executor.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

namespace releasegate {

namespace {

using Row = std::vector<Value>;

struct Relation {
  std::vector<FieldSpec> fields;
  std::vector<Row> rows;
};

std::size_t find_field(const Relation& rel, const std::string& name) {
  for (std::size_t i = 0; i < rel.fields.size(); ++i) {
    if (iequals(rel.fields[i].name, name)) return i;
  }
  throw std::logic_error("reference executor: no column '" + name + "'");
}

bool test_condition(const Condition& c, const Value& cell) {
  switch (c.op) {
    case Comparator::is_null: return is_null(cell);
    case Comparator::not_null: return !is_null(cell);
    default: break;
  }
  if (is_null(cell)) return false;
  const Value& rhs = c.operands.at(0);
  switch (c.op) {
    case Comparator::eq: return cell == rhs;
    case Comparator::ne: return !(cell == rhs);
    case Comparator::lt: return cell < rhs;
    case Comparator::le: return cell < rhs || cell == rhs;
    case Comparator::gt: return rhs < cell;
    case Comparator::ge: return rhs < cell || cell == rhs;
    case Comparator::in:
      for (const auto& o : c.operands) {
        if (cell == o) return true;
      }
      return false;
    case Comparator::not_in:
      for (const auto& o : c.operands) {
        if (cell == o) return false;
      }
      return true;
    case Comparator::contains: {
      const auto& hay = std::get<std::string>(cell);
      const auto& needle = std::get<std::string>(rhs);
      if (needle.size() > hay.size()) return false;
      for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
        if (hay.compare(i, needle.size(), needle) == 0) return true;
      }
      return false;
    }
    default: return false;
  }
}

bool test_predicate(const Predicate& p, const Relation& rel, const Row& row) {
  if (const auto* c = std::get_if<Condition>(&p.node)) return test_condition(*c, row[find_field(rel, c->column)]);
  const auto& node = std::get<LogicNode>(p.node);
  if (node.logic == Logic::all_of) {
    for (const auto& child : node.children) {
      if (!test_predicate(child, rel, row)) return false;
    }
    return true;
  }
  for (const auto& child : node.children) {
    if (test_predicate(child, rel, row)) return true;
  }
  return false;
}

Relation project(const Relation& in, const std::vector<std::string>& names) {
  Relation out;
  std::vector<std::size_t> idx;
  for (const auto& n : names) {
    idx.push_back(find_field(in, n));
    out.fields.push_back(in.fields[idx.back()]);
  }
  out.rows.reserve(in.rows.size());
  for (const auto& row : in.rows) {
    Row r;
    for (auto i : idx) r.push_back(row[i]);
    out.rows.push_back(std::move(r));
  }
  return out;
}

Relation slice(const SliceStep& s, const Relation& in) {
  Relation filtered{in.fields, {}};
  for (const auto& row : in.rows) {
    if (!s.where || test_predicate(*s.where, in, row)) filtered.rows.push_back(row);
  }
  if (!s.select) return filtered;
  return project(filtered, *s.select);
}

double as_double(const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  return std::get<double>(v);
}

Value fold(AggFunc func, bool has_column, ColumnType type, const std::vector<Value>& cells, std::size_t group_size) {
  if (func == AggFunc::count && !has_column) return static_cast<std::int64_t>(group_size);
  std::vector<Value> present;
  for (const auto& v : cells) {
    if (!is_null(v)) present.push_back(v);
  }
  if (func == AggFunc::count) return static_cast<std::int64_t>(present.size());
  if (func == AggFunc::distinct_count) {
    std::set<Value> uniq(present.begin(), present.end());
    return static_cast<std::int64_t>(uniq.size());
  }
  if (present.empty()) return Value{};
  switch (func) {
    case AggFunc::sum:
      if (type == ColumnType::integer) {
        std::uint64_t total = 0;
        for (const auto& v : present) total += static_cast<std::uint64_t>(std::get<std::int64_t>(v));
        return static_cast<std::int64_t>(total);
      } else {
        double total = 0;
        for (const auto& v : present) total += std::get<double>(v);
        return total;
      }
    case AggFunc::mean: {
      double total = 0;
      for (const auto& v : present) total += as_double(v);
      return total / static_cast<double>(present.size());
    }
    case AggFunc::median: {
      std::vector<double> xs;
      for (const auto& v : present) xs.push_back(as_double(v));
      std::sort(xs.begin(), xs.end());
      const auto n = xs.size();
      return n % 2 ? xs[n / 2] : (xs[n / 2 - 1] + xs[n / 2]) / 2;
    }
    case AggFunc::min: return *std::min_element(present.begin(), present.end());
    case AggFunc::max: return *std::max_element(present.begin(), present.end());
    default: return Value{};
  }
}

ColumnType result_type(AggFunc func, const FieldSpec* src) {
  switch (func) {
    case AggFunc::count:
    case AggFunc::distinct_count: return ColumnType::integer;
    case AggFunc::mean:
    case AggFunc::median: return ColumnType::floating;
    default: return src->type;
  }
}

Relation aggregate(const AggregateStep& a, const Relation& in) {
  std::vector<std::size_t> keys;
  for (const auto& g : a.group_by) keys.push_back(find_field(in, g));
  const FieldSpec* src = nullptr;
  std::size_t src_idx = 0;
  if (a.column) {
    src_idx = find_field(in, *a.column);
    src = &in.fields[src_idx];
  }

  std::map<Row, std::size_t> slot;
  std::vector<Row> key_order;
  std::vector<std::vector<Value>> cells;
  std::vector<std::size_t> sizes;
  for (const auto& row : in.rows) {
    Row key;
    for (auto k : keys) key.push_back(row[k]);
    auto [it, inserted] = slot.emplace(key, key_order.size());
    if (inserted) {
      key_order.push_back(key);
      cells.emplace_back();
      sizes.push_back(0);
    }
    ++sizes[it->second];
    if (src) cells[it->second].push_back(row[src_idx]);
  }
  if (keys.empty() && key_order.empty()) {
    key_order.emplace_back();
    cells.emplace_back();
    sizes.push_back(0);
  }

  Relation out;
  for (auto k : keys) out.fields.push_back(in.fields[k]);
  FieldSpec result;
  result.name = src ? std::string(to_string(a.func)) + "_" + src->name : "count";
  result.type = result_type(a.func, src);
  out.fields.push_back(result);
  for (std::size_t g = 0; g < key_order.size(); ++g) {
    Row r = key_order[g];
    r.push_back(fold(a.func, src != nullptr, src ? src->type : ColumnType::integer, cells[g], sizes[g]));
    out.rows.push_back(std::move(r));
  }
  return out;
}

Relation sort(const SortStep& s, Relation in) {
  std::vector<std::pair<std::size_t, bool>> keys;
  for (const auto& k : s.keys) keys.emplace_back(find_field(in, k.column), k.order == SortOrder::desc);
  std::stable_sort(in.rows.begin(), in.rows.end(), [&](const Row& x, const Row& y) {
    for (const auto& [idx, desc] : keys) {
      const bool xn = is_null(x[idx]);
      const bool yn = is_null(y[idx]);
      if (xn && yn) continue;
      if (xn) return false;
      if (yn) return true;
      if (x[idx] == y[idx]) continue;
      return desc ? y[idx] < x[idx] : x[idx] < y[idx];
    }
    return false;
  });
  return in;
}

Relation distinct(const DistinctStep& d, const Relation& in) {
  Relation projected = project(in, d.columns);
  Relation out{projected.fields, {}};
  std::set<Row> seen;
  for (auto& row : projected.rows) {
    if (seen.insert(row).second) out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace

Table oracle_execute(const AnalysisPlan& plan, const Table& table) {
  Relation rel;
  rel.fields = table.schema().fields();
  const auto n = table.row_count();
  rel.rows.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    rel.rows[r].reserve(table.column_count());
    for (std::size_t c = 0; c < table.column_count(); ++c) rel.rows[r].push_back(table.at(r, c));
  }
  for (const auto& step : plan.steps) {
    if (const auto* s = std::get_if<SliceStep>(&step)) {
      rel = slice(*s, rel);
    } else if (const auto* a = std::get_if<AggregateStep>(&step)) {
      rel = aggregate(*a, rel);
    } else if (const auto* so = std::get_if<SortStep>(&step)) {
      rel = sort(*so, std::move(rel));
    } else if (const auto* l = std::get_if<LimitStep>(&step)) {
      if (rel.rows.size() > l->n) rel.rows.resize(l->n);
    } else {
      rel = distinct(std::get<DistinctStep>(step), rel);
    }
  }
  std::vector<Column> cols(rel.fields.size());
  for (auto& c : cols) c.reserve(rel.rows.size());
  for (auto& row : rel.rows) {
    for (std::size_t c = 0; c < cols.size(); ++c) cols[c].push_back(std::move(row[c]));
  }
  return Table(Schema(std::move(rel.fields)), std::move(cols));
}

}  // namespace releasegate
