// SPDX-License-Identifier: Apache-2.0
#include "releasegate/actor.hpp"

#include "releasegate/csv.hpp"
#include "releasegate/plan_wire.hpp"

namespace releasegate {

std::string_view to_string(ActorMode mode) { return mode == ActorMode::safe ? "safe" : "natural_language"; }

std::optional<ActorMode> parse_actor_mode(std::string_view s) {
  if (s == "safe") return ActorMode::safe;
  if (s == "natural_language" || s == "nl") return ActorMode::natural_language;
  return std::nullopt;
}

RealizationFailure::RealizationFailure(std::size_t step_index, std::string message, std::vector<MemoryRecord> memory)
    : std::runtime_error(std::move(message)), step_index_(step_index), memory_(std::move(memory)) {}

std::string table_excerpt(const Table& table) {
  const std::size_t n = std::min(table.row_count(), kExcerptRows);
  std::vector<ColumnPtr> cols;
  for (std::size_t c = 0; c < table.column_count(); ++c) {
    const auto& src = table.column(c);
    cols.push_back(std::make_shared<const Column>(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(n)));
  }
  std::string out = to_csv(Table(table.schema(), std::move(cols)));
  out += "(" + std::to_string(table.row_count()) + (table.row_count() == 1 ? " row)" : " rows)");
  return out;
}

namespace {

std::string memory_context(const std::vector<MemoryRecord>& memory, std::size_t step_index) {
  std::string out;
  for (const auto& m : memory) {
    if (m.step_index != step_index || !m.error) continue;
    if (out.empty()) out += "Task: " + m.task_context + "\n";
    out += "Attempt " + std::to_string(m.attempt_index + 1) + " emitted:\n" + m.emitted_document + "\n";
    out += "Error: " + *m.error + "\n";
  }
  return out;
}

}  // namespace

RealizedStep realize_step(const std::string& nl_step, std::size_t step_index, const std::string& task_context,
                          const AnalysisPlan& prior, const Table& current, const Schema& base_schema,
                          const KnowledgeBase& kb, const LlmGateway& gateway, const ReflectionConfig& config,
                          std::vector<MemoryRecord>& memory) {
  if (config.max_retries < 0) throw std::invalid_argument("max_retries must be >= 0");
  const Schema running = current.schema();
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    auto request = render_actor_prompt(kb, nl_step, memory_context(memory, step_index), running);
    request.sample_tag = "actor/step" + std::to_string(step_index) + "/attempt" + std::to_string(attempt);
    const auto reply = gateway.complete(request);

    MemoryRecord rec;
    rec.step_index = step_index;
    rec.attempt_index = static_cast<std::size_t>(attempt);
    rec.emitted_document = reply.text;
    rec.task_context = task_context;
    std::optional<Step> step;
    try {
      step = parse_step(extract_plan_document(reply.text), base_schema, prior);
    } catch (const PlanError& e) {
      rec.error = e.what();
    }
    if (!step) {
      memory.push_back(std::move(rec));
      continue;
    }
    Table out = execute_step(*step, current);
    rec.execution_excerpt = table_excerpt(out);
    memory.push_back(std::move(rec));
    return RealizedStep{std::move(*step), std::move(out), static_cast<std::size_t>(attempt)};
  }
  throw RealizationFailure(step_index,
                           "step " + std::to_string(step_index + 1) + " could not be realized after " +
                               std::to_string(config.max_retries + 1) + " attempts: " + nl_step,
                           memory);
}

RunResult run(const PlanDecision& decision, const std::optional<std::vector<std::string>>& nl_steps,
              const Table& table, const KnowledgeBase& kb, const LlmGateway* gateway, const ReflectionConfig& config) {
  if (config.mode == ActorMode::safe) {
    auto exec = execute_plan(decision.chosen, table);
    return RunResult{std::move(exec.table), decision.chosen, 0, {}, std::move(exec.trace)};
  }
  if (!gateway) throw std::invalid_argument("natural_language mode needs a gateway");
  const auto steps = nl_steps ? *nl_steps : render_steps(decision.chosen);
  if (steps.empty()) throw std::invalid_argument("natural_language mode needs at least one step");

  std::vector<MemoryRecord> memory;
  AnalysisPlan realized;
  Table current = table;
  std::size_t reflections = 0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    std::string context = "Question: " + decision.query;
    if (!realized.steps.empty()) {
      context += " Steps done:";
      for (std::size_t j = 0; j < realized.steps.size(); ++j) {
        context += " " + std::to_string(j + 1) + ". " + render_step(realized.steps[j]);
      }
    }
    context += " Current step " + std::to_string(i + 1) + ": " + steps[i];
    auto r = realize_step(steps[i], i, context, realized, current, table.schema(), kb, *gateway, config, memory);
    reflections += r.reflection_attempts;
    realized.steps.push_back(std::move(r.step));
    current = std::move(r.output);
  }
  auto exec = execute_plan(realized, table);
  return RunResult{std::move(exec.table), std::move(realized), reflections, std::move(memory), std::move(exec.trace)};
}

nlohmann::ordered_json memory_to_json(const std::vector<MemoryRecord>& memory) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& m : memory) {
    nlohmann::ordered_json j;
    j["step_index"] = m.step_index;
    j["attempt_index"] = m.attempt_index;
    j["emitted_document"] = m.emitted_document;
    if (m.error) j["error"] = *m.error;
    if (m.execution_excerpt) j["execution_excerpt"] = *m.execution_excerpt;
    j["task_context"] = m.task_context;
    arr.push_back(std::move(j));
  }
  return arr;
}

void PluginRegistry::register_plugin(const std::string& name, DataLoader loader) {
  if (name.empty()) throw PluginError("plugin name must not be empty");
  if (!loader) throw PluginError("plugin '" + name + "' has no loader");
  if (!loaders_.emplace(name, std::move(loader)).second) throw PluginError("plugin '" + name + "' is already registered");
}

const DataLoader& PluginRegistry::resolve(const std::string& name) const {
  auto it = loaders_.find(name);
  if (it == loaders_.end()) throw PluginError("no data-source plugin named '" + name + "'");
  return it->second;
}

std::vector<std::string> PluginRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : loaders_) out.push_back(name);
  return out;
}

PluginRegistry default_plugins() {
  PluginRegistry registry;
  registry.register_plugin("csv", [](const LoadRequest& req) {
    if (!req.schema) throw PluginError("csv loader needs a schema");
    return load_csv_file(req.source, *req.schema);
  });
  return registry;
}

}  // namespace releasegate
