// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "releasegate/llm_gateway.hpp"
#include "releasegate/plan.hpp"
#include "releasegate/table.hpp"

namespace releasegate {

struct FieldNote {
  std::string note;
  /// Must repeat the schema's states list exactly when the field has one.
  std::optional<std::vector<std::string>> states;
};

struct TermEntry {
  std::string term;
  std::string definition;
};

struct ConstraintText {
  std::string id;
  std::string text;
};

struct FewShotExample {
  std::string query;
  std::vector<std::string> reasoning;
  AnalysisPlan plan;
  int difficulty = 1;
};

/// Constraint ids every knowledge base must carry.
inline constexpr const char* kNonBinaryStatesConstraint = "non_binary_states";
inline constexpr const char* kFilterFirstConstraint = "filter_first";

struct KnowledgeBase {
  Schema schema;
  /// Parallel to schema.fields().
  std::vector<FieldNote> field_notes;
  std::string dataset_prose;
  std::vector<TermEntry> terminology;
  std::vector<ConstraintText> constraints;
  std::vector<FewShotExample> examples;

  const FieldNote* note_for(std::string_view field) const;
};

enum class KbErrorKind { malformed, missing_note, states_mismatch, bad_example, missing_constraint };

class KbError : public std::runtime_error {
 public:
  KbError(KbErrorKind kind, std::string message, std::string field = {});
  KbErrorKind kind() const { return kind_; }
  /// Offending field name, when there is one.
  const std::string& field() const { return field_; }

 private:
  KbErrorKind kind_;
  std::string field_;
};

/// Parses and cross-checks a knowledge-base document. Throws KbError.
KnowledgeBase kb_from_json(const nlohmann::json& doc);
KnowledgeBase load_kb(const std::filesystem::path& path);
nlohmann::ordered_json kb_to_json(const KnowledgeBase& kb);
void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path);

/// Schema section of a KB document, usable on its own as a schema file.
nlohmann::ordered_json schema_to_json(const Schema& schema);
Schema schema_from_json(const nlohmann::json& j);

/// First `k` examples in store order. Throws std::out_of_range when k exceeds the store.
std::vector<FewShotExample> select_examples(const std::vector<FewShotExample>& store, std::size_t k);

/// Wire-format description placed in prompts (no code fences).
std::string plan_format_description();

/// Planner request: system prompt with role, dataset description, field documentation,
/// the two action definitions, constraints, the plan format, `examples` as worked
/// question/reasoning/plan triples and the reply instruction; the user message is `query`.
ChatRequest render_planner_prompt(const KnowledgeBase& kb, const std::vector<FewShotExample>& examples,
                                  const std::string& query, const std::vector<ConstraintText>& constraints);

/// Actor request translating one natural-language step into one step document. Fields are
/// documented from `running_schema` (the table the step applies to); `memory_context` is
/// appended when non-empty. Temperature is 0.
ChatRequest render_actor_prompt(const KnowledgeBase& kb, const std::string& nl_step, const std::string& memory_context,
                                const Schema& running_schema);

}  // namespace releasegate
