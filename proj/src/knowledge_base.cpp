// SPDX-License-Identifier: Apache-2.0
#include "releasegate/knowledge_base.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "releasegate/plan_wire.hpp"

namespace releasegate {

using nlohmann::json;
using nlohmann::ordered_json;

KbError::KbError(KbErrorKind kind, std::string message, std::string field)
    : std::runtime_error(std::move(message)), kind_(kind), field_(std::move(field)) {}

const FieldNote* KnowledgeBase::note_for(std::string_view field) const {
  auto idx = schema.find(field);
  if (!idx || *idx >= field_notes.size()) return nullptr;
  return &field_notes[*idx];
}

ordered_json schema_to_json(const Schema& schema) {
  ordered_json arr = ordered_json::array();
  for (const auto& f : schema.fields()) {
    ordered_json j;
    j["name"] = f.name;
    j["type"] = std::string(type_name(f.type));
    j["description"] = f.description;
    if (f.states) j["states"] = *f.states;
    arr.push_back(std::move(j));
  }
  return arr;
}

Schema schema_from_json(const json& j) {
  const json* list = &j;
  if (j.is_object() && j.contains("schema")) list = &j.at("schema");
  if (!list->is_array()) throw KbError(KbErrorKind::malformed, "schema must be a list of fields");
  std::vector<FieldSpec> fields;
  for (const auto& item : *list) {
    try {
      FieldSpec f;
      f.name = item.at("name").get<std::string>();
      const auto type = item.at("type").get<std::string>();
      auto parsed = parse_type_name(type);
      if (!parsed) throw KbError(KbErrorKind::malformed, "field '" + f.name + "': unknown type '" + type + "'", f.name);
      f.type = *parsed;
      f.description = item.value("description", std::string{});
      if (item.contains("states")) f.states = item.at("states").get<std::vector<std::string>>();
      fields.push_back(std::move(f));
    } catch (const json::exception& e) {
      throw KbError(KbErrorKind::malformed, std::string("bad schema entry: ") + e.what());
    }
  }
  try {
    return Schema(std::move(fields));
  } catch (const SchemaError& e) {
    throw KbError(KbErrorKind::malformed, e.what());
  }
}

namespace {

std::string join(const std::vector<std::string>& xs, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += sep;
    out += xs[i];
  }
  return out;
}

}  // namespace

KnowledgeBase kb_from_json(const json& doc) {
  if (!doc.is_object()) throw KbError(KbErrorKind::malformed, "knowledge base must be an object");
  static const std::set<std::string> known = {"schema",      "field_notes", "dataset_prose", "terminology",
                                              "constraints", "examples"};
  for (const auto& [key, _] : doc.items()) {
    if (!known.count(key)) throw KbError(KbErrorKind::malformed, "unknown knowledge-base section '" + key + "'");
  }
  if (!doc.contains("schema")) throw KbError(KbErrorKind::malformed, "missing section 'schema'");
  KnowledgeBase kb{schema_from_json(doc.at("schema")), {}, {}, {}, {}, {}};

  try {
    const json notes = doc.value("field_notes", json::object());
    if (!notes.is_object()) throw KbError(KbErrorKind::malformed, "field_notes must be an object");
    for (const auto& [name, _] : notes.items()) {
      if (!kb.schema.find(name)) {
        throw KbError(KbErrorKind::malformed, "field note for unknown field '" + name + "'", name);
      }
    }
    for (const auto& f : kb.schema.fields()) {
      const json* entry = nullptr;
      for (const auto& [name, value] : notes.items()) {
        if (iequals(name, f.name)) entry = &value;
      }
      if (!entry) throw KbError(KbErrorKind::missing_note, "no field note for '" + f.name + "'", f.name);
      FieldNote note;
      if (entry->is_string()) {
        note.note = entry->get<std::string>();
      } else {
        note.note = entry->at("note").get<std::string>();
        if (entry->contains("states")) note.states = entry->at("states").get<std::vector<std::string>>();
      }
      if (note.states != f.states) {
        const std::string have = note.states ? "{" + join(*note.states, ", ") + "}" : "no states";
        const std::string want = f.states ? "{" + join(*f.states, ", ") + "}" : "no states";
        throw KbError(KbErrorKind::states_mismatch,
                      "field note for '" + f.name + "' lists " + have + " but the schema has " + want, f.name);
      }
      kb.field_notes.push_back(std::move(note));
    }

    kb.dataset_prose = doc.value("dataset_prose", std::string{});
    for (const auto& t : doc.value("terminology", json::array())) {
      kb.terminology.push_back({t.at("term").get<std::string>(), t.at("definition").get<std::string>()});
    }
    for (const auto& c : doc.value("constraints", json::array())) {
      kb.constraints.push_back({c.at("id").get<std::string>(), c.at("text").get<std::string>()});
    }
    for (const char* required : {kNonBinaryStatesConstraint, kFilterFirstConstraint}) {
      bool found = false;
      for (const auto& c : kb.constraints) found = found || c.id == required;
      if (!found) {
        throw KbError(KbErrorKind::missing_constraint, std::string("missing required constraint '") + required + "'");
      }
    }

    const json examples = doc.value("examples", json::array());
    for (std::size_t i = 0; i < examples.size(); ++i) {
      const auto& e = examples[i];
      FewShotExample ex;
      ex.query = e.at("query").get<std::string>();
      ex.reasoning = e.at("reasoning").get<std::vector<std::string>>();
      ex.difficulty = e.at("difficulty").get<int>();
      const std::string where = "example " + std::to_string(i + 1);
      if (ex.reasoning.empty()) throw KbError(KbErrorKind::bad_example, where + " has no reasoning steps");
      try {
        ex.plan = plan_from_json(e.at("plan"), kb.schema);
      } catch (const PlanError& err) {
        throw KbError(KbErrorKind::bad_example, where + ": " + err.what());
      }
      if (classify_difficulty(ex.plan) != ex.difficulty) {
        throw KbError(KbErrorKind::bad_example, where + " is labelled level " + std::to_string(ex.difficulty) +
                                                    " but its plan is level " +
                                                    std::to_string(classify_difficulty(ex.plan)));
      }
      kb.examples.push_back(std::move(ex));
    }
  } catch (const json::exception& e) {
    throw KbError(KbErrorKind::malformed, std::string("malformed knowledge base: ") + e.what());
  }
  return kb;
}

KnowledgeBase load_kb(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw KbError(KbErrorKind::malformed, "cannot read knowledge base " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw KbError(KbErrorKind::malformed, path.string() + ": " + e.what());
  }
  return kb_from_json(doc);
}

ordered_json kb_to_json(const KnowledgeBase& kb) {
  ordered_json doc;
  doc["schema"] = schema_to_json(kb.schema);
  ordered_json notes = ordered_json::object();
  for (std::size_t i = 0; i < kb.schema.size(); ++i) {
    ordered_json n;
    n["note"] = kb.field_notes.at(i).note;
    if (kb.field_notes[i].states) n["states"] = *kb.field_notes[i].states;
    notes[kb.schema.field(i).name] = std::move(n);
  }
  doc["field_notes"] = std::move(notes);
  doc["dataset_prose"] = kb.dataset_prose;
  ordered_json terms = ordered_json::array();
  for (const auto& t : kb.terminology) terms.push_back({{"term", t.term}, {"definition", t.definition}});
  doc["terminology"] = std::move(terms);
  ordered_json cons = ordered_json::array();
  for (const auto& c : kb.constraints) cons.push_back({{"id", c.id}, {"text", c.text}});
  doc["constraints"] = std::move(cons);
  ordered_json exs = ordered_json::array();
  for (const auto& e : kb.examples) {
    ordered_json j;
    j["query"] = e.query;
    j["reasoning"] = e.reasoning;
    j["plan"] = plan_to_json(e.plan);
    j["difficulty"] = e.difficulty;
    exs.push_back(std::move(j));
  }
  doc["examples"] = std::move(exs);
  return doc;
}

void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << kb_to_json(kb).dump(2) << '\n';
  if (!out) throw KbError(KbErrorKind::malformed, "cannot write knowledge base " + path.string());
}

std::vector<FewShotExample> select_examples(const std::vector<FewShotExample>& store, std::size_t k) {
  if (k > store.size()) {
    throw std::out_of_range("requested " + std::to_string(k) + " examples but the store has " +
                            std::to_string(store.size()));
  }
  return {store.begin(), store.begin() + static_cast<std::ptrdiff_t>(k)};
}

// ---------------------------------------------------------------------------
// Prompt assembly
// ---------------------------------------------------------------------------

std::string plan_format_description() {
  return R"(A plan document is a JSON object {"steps": [step, ...]} with at least one step. Steps run in order; each
step sees the table produced by the step before it. Step objects:
  {"kind": "slice", "select": ["col", ...] or "all", "where": condition}   ("where" is optional)
  {"kind": "aggregate", "func": F, "column": "col", "group_by": ["col", ...]}
  {"kind": "sort", "keys": [{"col": "col", "order": "asc" or "desc"}, ...]}
  {"kind": "limit", "n": positive integer}
  {"kind": "distinct", "columns": ["col", ...]}
F is one of count, sum, mean, min, max, median, distinct_count. "column" may be omitted only for count, which
then counts rows. An aggregate replaces the table with the group_by columns plus one result column named
F_column (or "count"); without group_by it yields a single row and only a limit may follow.
A condition is {"col": "col", "op": OP, "value": V}, {"and": [condition, ...]} or {"or": [condition, ...]},
nested at most 4 levels. OP is one of eq, ne, lt, le, gt, ge, in, not_in, contains, is_null, not_null.
lt/le/gt/ge apply to numbers and timestamps, contains to text; in/not_in take a list; is_null/not_null take
no value. Text comparison is exact and case-sensitive. Timestamps are written "YYYY-MM-DDTHH:MM:SSZ".
No other keys or step kinds are accepted.)";
}

namespace {

std::string step_format_description() {
  return R"(Reply with one step object, exactly as it would appear inside a plan's "steps" list:
  {"kind": "slice", "select": ["col", ...] or "all", "where": condition}
  {"kind": "aggregate", "func": F, "column": "col", "group_by": ["col", ...]}
  {"kind": "sort", "keys": [{"col": "col", "order": "asc" or "desc"}]}
  {"kind": "limit", "n": positive integer}
  {"kind": "distinct", "columns": ["col", ...]}
F is one of count, sum, mean, min, max, median, distinct_count. A condition is
{"col": "col", "op": OP, "value": V}, {"and": [...]} or {"or": [...]}; OP is one of eq, ne, lt, le, gt, ge, in,
not_in, contains, is_null, not_null. Use only the columns listed above, spelled as listed.)";
}

void append_field_doc(std::string& out, const FieldSpec& f, const FieldNote* note) {
  out += "- " + f.name + " (" + std::string(type_name(f.type)) + "): ";
  if (note && !note->note.empty()) {
    out += note->note;
  } else if (!f.description.empty()) {
    out += f.description;
  } else {
    out += "derived column produced by an earlier step";
  }
  if (f.states) {
    out += " States: ";
    for (std::size_t i = 0; i < f.states->size(); ++i) out += (i ? ", " : "") + quote_string((*f.states)[i]);
    out += ".";
  }
  out += "\n";
}

}  // namespace

ChatRequest render_planner_prompt(const KnowledgeBase& kb, const std::vector<FewShotExample>& examples,
                                  const std::string& query, const std::vector<ConstraintText>& constraints) {
  std::string s;
  s += "You are the planning agent of a release-gate assistant. Release managers ask questions about software "
       "test results; you answer each question with an analysis plan over the single table described below. "
       "You never compute answers yourself; the plan is executed afterwards.\n\n";

  s += "## Dataset\n" + kb.dataset_prose + "\n\n";

  s += "## Fields\n";
  for (std::size_t i = 0; i < kb.schema.size(); ++i) append_field_doc(s, kb.schema.field(i), &kb.field_notes.at(i));
  if (!kb.terminology.empty()) {
    s += "\n## Terminology\n";
    for (const auto& t : kb.terminology) s += "- " + t.term + ": " + t.definition + "\n";
  }

  s += "\n## Actions\nA plan may use only two kinds of action:\n"
       "1. Slicing: choose which columns to keep and which conditions a row must meet to be kept.\n"
       "2. Operation: transform the current table with one aggregate (count, sum, mean, min, max, median, "
       "distinct_count; optionally per group), sort, limit or distinct.\n"
       "Every step of the plan is exactly one of these actions.\n";

  s += "\n## Constraints\n";
  for (std::size_t i = 0; i < constraints.size(); ++i) s += std::to_string(i + 1) + ". " + constraints[i].text + "\n";

  s += "\n## Plan format\n" + plan_format_description() + "\n";

  if (!examples.empty()) {
    s += "\n## Worked examples\n";
    for (std::size_t i = 0; i < examples.size(); ++i) {
      const auto& e = examples[i];
      s += "\nExample " + std::to_string(i + 1) + "\nQuestion: " + e.query + "\nReasoning:\n";
      for (std::size_t r = 0; r < e.reasoning.size(); ++r) {
        s += std::to_string(r + 1) + ". " + e.reasoning[r] + "\n";
      }
      s += "Plan:\n```json\n" + plan_to_wire(e.plan) + "\n```\n";
    }
  }

  s += "\n## Reply\nFirst reason step by step in numbered sentences, naming the columns and values each step "
       "uses. Then give exactly one fenced ```json block containing the plan document and nothing after it.\n";

  ChatRequest req;
  req.system_prompt = std::move(s);
  req.messages.push_back({"user", query});
  req.temperature = 0.7;
  return req;
}

ChatRequest render_actor_prompt(const KnowledgeBase& kb, const std::string& nl_step, const std::string& memory_context,
                                const Schema& running_schema) {
  std::string s;
  s += "You are the coding agent of a release-gate assistant. You translate one natural-language analysis step "
       "into one structured step document that a deterministic engine executes.\n\n";
  s += "## Current table columns\n";
  for (const auto& f : running_schema.fields()) append_field_doc(s, f, kb.note_for(f.name));
  s += "\n## Step format\n" + step_format_description() + "\n";
  if (!memory_context.empty()) {
    s += "\n## Previous attempts for this step\n" + memory_context;
    if (memory_context.back() != '\n') s += "\n";
    s += "Fix the problems reported above.\n";
  }
  s += "\n## Reply\nGive exactly one fenced ```json block containing the step object.\n";

  ChatRequest req;
  req.system_prompt = std::move(s);
  req.messages.push_back({"user", nl_step});
  req.temperature = 0.0;
  return req;
}

}  // namespace releasegate
