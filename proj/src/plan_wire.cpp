// SPDX-License-Identifier: Apache-2.0
#include "releasegate/plan_wire.hpp"

#include <algorithm>
#include <initializer_list>
#include <limits>

namespace releasegate {

using nlohmann::json;
using nlohmann::ordered_json;

json value_to_json(const Value& v) {
  struct Visitor {
    json operator()(std::monostate) const { return nullptr; }
    json operator()(bool b) const { return b; }
    json operator()(std::int64_t i) const { return i; }
    json operator()(double d) const { return d; }
    json operator()(const std::string& s) const { return s; }
    json operator()(Timestamp t) const { return format_timestamp(t); }
  };
  return std::visit(Visitor{}, v);
}

std::optional<Value> value_from_json(const json& j, ColumnType type) {
  switch (type) {
    case ColumnType::boolean:
      if (j.is_boolean()) return Value{j.get<bool>()};
      return std::nullopt;
    case ColumnType::integer:
      if (j.is_number_integer()) {
        if (j.is_number_unsigned() &&
            j.get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
          return std::nullopt;
        }
        return Value{j.get<std::int64_t>()};
      }
      return std::nullopt;
    case ColumnType::floating:
      if (j.is_number()) return Value{j.get<double>()};
      return std::nullopt;
    case ColumnType::text:
      if (j.is_string()) return Value{j.get<std::string>()};
      return std::nullopt;
    case ColumnType::timestamp:
      if (j.is_string()) {
        if (auto ts = parse_timestamp(j.get_ref<const std::string&>())) return Value{*ts};
      }
      return std::nullopt;
  }
  return std::nullopt;
}

namespace {

ordered_json predicate_to_json(const Predicate& p) {
  if (const auto* c = std::get_if<Condition>(&p.node)) {
    ordered_json j;
    j["col"] = c->column;
    j["op"] = std::string(to_string(c->op));
    if (c->op == Comparator::in || c->op == Comparator::not_in) {
      ordered_json arr = ordered_json::array();
      for (const auto& v : c->operands) arr.push_back(ordered_json(value_to_json(v)));
      j["value"] = std::move(arr);
    } else if (!c->operands.empty()) {
      j["value"] = ordered_json(value_to_json(c->operands.front()));
    }
    return j;
  }
  const auto& node = std::get<LogicNode>(p.node);
  ordered_json arr = ordered_json::array();
  for (const auto& child : node.children) arr.push_back(predicate_to_json(child));
  ordered_json j;
  j[node.logic == Logic::all_of ? "and" : "or"] = std::move(arr);
  return j;
}

}  // namespace

ordered_json step_to_json(const Step& step) {
  ordered_json j;
  j["kind"] = std::string(step_kind(step));
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SliceStep>) {
          if (s.select) {
            j["select"] = *s.select;
          } else {
            j["select"] = "all";
          }
          if (s.where) j["where"] = predicate_to_json(*s.where);
        } else if constexpr (std::is_same_v<T, AggregateStep>) {
          j["func"] = std::string(to_string(s.func));
          if (s.column) j["column"] = *s.column;
          j["group_by"] = s.group_by;
        } else if constexpr (std::is_same_v<T, SortStep>) {
          ordered_json keys = ordered_json::array();
          for (const auto& k : s.keys) {
            ordered_json key;
            key["col"] = k.column;
            key["order"] = std::string(to_string(k.order));
            keys.push_back(std::move(key));
          }
          j["keys"] = std::move(keys);
        } else if constexpr (std::is_same_v<T, LimitStep>) {
          j["n"] = s.n;
        } else {
          j["columns"] = s.columns;
        }
      },
      step);
  return j;
}

ordered_json plan_to_json(const AnalysisPlan& plan) {
  ordered_json steps = ordered_json::array();
  for (const auto& s : plan.steps) steps.push_back(step_to_json(s));
  ordered_json j;
  j["steps"] = std::move(steps);
  return j;
}

std::string plan_to_wire(const AnalysisPlan& plan) { return plan_to_json(plan).dump(2); }
std::string step_to_wire(const Step& step) { return step_to_json(step).dump(2); }

std::string_view strip_code_fence(std::string_view text) {
  const auto close = text.rfind("```");
  if (close == std::string_view::npos) return text;
  const auto open = text.rfind("```", close == 0 ? 0 : close - 1);
  if (open == std::string_view::npos || open == close) return text;
  auto body = text.substr(open + 3, close - open - 3);
  // Drop the info string (e.g. "json") on the opening fence line.
  const auto nl = body.find('\n');
  if (nl != std::string_view::npos) {
    const auto info = body.substr(0, nl);
    if (info.find_first_of("{[") == std::string_view::npos) body.remove_prefix(nl + 1);
  }
  return body;
}

namespace {

/// Decodes wire JSON into steps while resolving names against the running schema.
class Decoder {
 public:
  explicit Decoder(const Schema& schema) : root_schema_(schema), cur_(schema) {}

  AnalysisPlan plan(const json& doc) {
    const json* steps = &doc;
    if (doc.is_object()) {
      only_keys(doc, {"steps"}, "");
      if (!doc.contains("steps")) syntax("plan document needs a \"steps\" array", "");
      steps = &doc["steps"];
    }
    if (!steps->is_array()) syntax("\"steps\" must be an array", "/steps");
    if (steps->empty()) syntax("plan has no steps", "/steps");
    AnalysisPlan out;
    for (std::size_t i = 0; i < steps->size(); ++i) append(out, (*steps)[i], "/steps/" + std::to_string(i));
    return out;
  }

  void prime(const AnalysisPlan& prior) {
    for (const auto& s : prior.steps) cur_ = output_schema(s, cur_);
  }

  void append(AnalysisPlan& plan, const json& j, const std::string& path) {
    plan.steps.push_back(step(j, path));
    auto violations = validate_plan(plan, root_schema_);
    if (!violations.empty()) {
      const auto& v = violations.front();
      throw PlanError(v.kind, "step " + std::to_string(v.step + 1) + ": " + v.message);
    }
    cur_ = output_schema(plan.steps.back(), cur_);
  }

 private:
  [[noreturn]] void syntax(const std::string& message, const std::string& path) {
    throw PlanError(PlanErrorKind::syntax, path.empty() ? message : message + " at " + path);
  }

  void only_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& path) {
    for (const auto& [key, _] : obj.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        syntax("unexpected key \"" + key + "\"", path);
      }
    }
  }

  std::string column(const json& j, const std::string& path, const Schema& schema) {
    if (!j.is_string()) syntax("column name must be a string", path);
    const auto& name = j.get_ref<const std::string&>();
    auto idx = schema.find(name);
    if (!idx) {
      auto near = near_matches(name, schema);
      std::string msg = "unknown column '" + name + "' at " + path;
      if (!near.empty()) {
        msg += "; did you mean";
        for (std::size_t i = 0; i < near.size(); ++i) msg += (i ? ", '" : " '") + near[i] + "'";
        msg += "?";
      }
      throw PlanError(PlanErrorKind::unknown_column, msg, std::nullopt, name, std::move(near));
    }
    return schema.field(*idx).name;
  }

  std::vector<std::string> columns(const json& j, const std::string& path) {
    if (!j.is_array()) syntax("expected an array of column names", path);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(column(j[i], path + "/" + std::to_string(i), cur_));
    return out;
  }

  std::string text(const json& obj, const char* key, const std::string& path) {
    if (!obj.contains(key)) syntax(std::string("missing \"") + key + "\"", path);
    const auto& v = obj[key];
    if (!v.is_string()) syntax(std::string("\"") + key + "\" must be a string", path);
    return v.get<std::string>();
  }

  Value operand(const json& j, const FieldSpec& f, const std::string& path) {
    if (j.is_null()) {
      throw PlanError(PlanErrorKind::type, "null operand at " + path + "; use is_null or not_null");
    }
    if (!j.is_primitive()) {
      throw PlanError(PlanErrorKind::type, "operand at " + path + " must be a scalar");
    }
    auto v = value_from_json(j, f.type);
    if (!v) {
      throw PlanError(PlanErrorKind::type, "operand " + j.dump() + " at " + path + " does not fit " +
                                               std::string(type_name(f.type)) + " column '" + f.name + "'");
    }
    return std::move(*v);
  }

  Predicate predicate(const json& j, const std::string& path, std::size_t depth) {
    if (!j.is_object()) syntax("predicate must be an object", path);
    if (depth > kMaxPredicateDepth) {
      throw PlanError(PlanErrorKind::invalid,
                      "predicate nesting exceeds depth " + std::to_string(kMaxPredicateDepth) + " at " + path);
    }
    for (const char* logic : {"and", "or"}) {
      if (j.contains(logic)) {
        only_keys(j, {logic}, path);
        const auto& arr = j[logic];
        if (!arr.is_array()) syntax(std::string("\"") + logic + "\" must be an array", path);
        if (arr.empty()) throw PlanError(PlanErrorKind::invalid, std::string("empty \"") + logic + "\" at " + path);
        LogicNode node;
        node.logic = logic[0] == 'a' ? Logic::all_of : Logic::any_of;
        for (std::size_t i = 0; i < arr.size(); ++i) {
          node.children.push_back(predicate(arr[i], path + "/" + logic + "/" + std::to_string(i), depth + 1));
        }
        return Predicate{std::move(node)};
      }
    }
    only_keys(j, {"col", "op", "value"}, path);
    if (!j.contains("col")) syntax("condition needs \"col\"", path);
    Condition c;
    c.column = column(j["col"], path + "/col", cur_);
    const auto op_text = text(j, "op", path);
    auto op = parse_comparator(op_text);
    if (!op) syntax("unknown comparator \"" + op_text + "\"", path + "/op");
    c.op = *op;
    const auto& field = *cur_.lookup(c.column);
    const bool has_value = j.contains("value");
    switch (c.op) {
      case Comparator::is_null:
      case Comparator::not_null:
        if (has_value) throw PlanError(PlanErrorKind::type, op_text + " takes no value at " + path);
        break;
      case Comparator::in:
      case Comparator::not_in: {
        if (!has_value || !j["value"].is_array()) {
          throw PlanError(PlanErrorKind::type, op_text + " needs a value list at " + path);
        }
        const auto& arr = j["value"];
        if (arr.empty()) throw PlanError(PlanErrorKind::type, op_text + " needs a non-empty value list at " + path);
        for (std::size_t i = 0; i < arr.size(); ++i) {
          c.operands.push_back(operand(arr[i], field, path + "/value/" + std::to_string(i)));
        }
        break;
      }
      default:
        if (!has_value) throw PlanError(PlanErrorKind::type, op_text + " needs a value at " + path);
        c.operands.push_back(operand(j["value"], field, path + "/value"));
    }
    return Predicate{std::move(c)};
  }

  Step step(const json& j, const std::string& path) {
    if (!j.is_object()) syntax("step must be an object", path);
    const auto kind = text(j, "kind", path);
    if (kind == "slice") {
      only_keys(j, {"kind", "select", "where"}, path);
      SliceStep s;
      if (j.contains("select")) {
        const auto& sel = j["select"];
        if (sel.is_string()) {
          if (sel.get_ref<const std::string&>() != "all") syntax("\"select\" must be a list or \"all\"", path);
        } else {
          s.select = columns(sel, path + "/select");
        }
      }
      if (j.contains("where") && !j["where"].is_null()) s.where = predicate(j["where"], path + "/where", 1);
      return s;
    }
    if (kind == "aggregate") {
      only_keys(j, {"kind", "func", "column", "group_by"}, path);
      AggregateStep a;
      const auto func_text = text(j, "func", path);
      auto func = parse_agg_func(func_text);
      if (!func) syntax("unknown aggregate function \"" + func_text + "\"", path + "/func");
      a.func = *func;
      if (j.contains("column") && !j["column"].is_null()) a.column = column(j["column"], path + "/column", cur_);
      if (j.contains("group_by")) a.group_by = columns(j["group_by"], path + "/group_by");
      return a;
    }
    if (kind == "sort") {
      only_keys(j, {"kind", "keys"}, path);
      if (!j.contains("keys") || !j["keys"].is_array()) syntax("sort needs a \"keys\" array", path);
      SortStep s;
      const auto& keys = j["keys"];
      for (std::size_t i = 0; i < keys.size(); ++i) {
        const auto kpath = path + "/keys/" + std::to_string(i);
        if (!keys[i].is_object()) syntax("sort key must be an object", kpath);
        only_keys(keys[i], {"col", "order"}, kpath);
        if (!keys[i].contains("col")) syntax("sort key needs \"col\"", kpath);
        SortKey key;
        key.column = column(keys[i]["col"], kpath + "/col", cur_);
        if (keys[i].contains("order")) {
          const auto order = text(keys[i], "order", kpath);
          if (order == "asc") {
            key.order = SortOrder::asc;
          } else if (order == "desc") {
            key.order = SortOrder::desc;
          } else {
            syntax("sort order must be \"asc\" or \"desc\"", kpath + "/order");
          }
        }
        s.keys.push_back(std::move(key));
      }
      return s;
    }
    if (kind == "limit") {
      only_keys(j, {"kind", "n"}, path);
      if (!j.contains("n") || !j["n"].is_number_integer()) syntax("limit needs an integer \"n\"", path);
      if (j["n"].get<std::int64_t>() < 1) throw PlanError(PlanErrorKind::invalid, "limit must be positive at " + path);
      return LimitStep{j["n"].get<std::size_t>()};
    }
    if (kind == "distinct") {
      only_keys(j, {"kind", "columns"}, path);
      if (!j.contains("columns")) syntax("distinct needs \"columns\"", path);
      return DistinctStep{columns(j["columns"], path + "/columns")};
    }
    syntax("unknown step kind \"" + kind + "\"", path + "/kind");
  }

  const Schema& root_schema_;
  Schema cur_;
};

json parse_json_document(std::string_view text) {
  const auto body = strip_code_fence(text);
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    const std::size_t offset = body.data() - text.data();
    const std::size_t pos = e.byte > 0 ? e.byte - 1 : 0;
    throw PlanError(PlanErrorKind::syntax, std::string("malformed plan document: ") + e.what(), offset + pos);
  }
}

}  // namespace

AnalysisPlan plan_from_json(const json& doc, const Schema& schema) {
  try {
    Decoder decoder(schema);
    return decoder.plan(doc);
  } catch (const json::exception& e) {
    throw PlanError(PlanErrorKind::syntax, std::string("malformed plan document: ") + e.what());
  }
}

AnalysisPlan parse_plan(std::string_view text, const Schema& schema) {
  return plan_from_json(parse_json_document(text), schema);
}

Step parse_step(std::string_view text, const Schema& schema, const AnalysisPlan& prior) {
  auto doc = parse_json_document(text);
  try {
    Decoder decoder(schema);
    decoder.prime(prior);
    AnalysisPlan plan = prior;
    decoder.append(plan, doc, "");
    return plan.steps.back();
  } catch (const json::exception& e) {
    throw PlanError(PlanErrorKind::syntax, std::string("malformed step document: ") + e.what());
  }
}

}  // namespace releasegate
