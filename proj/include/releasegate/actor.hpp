// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "releasegate/executor.hpp"
#include "releasegate/knowledge_base.hpp"
#include "releasegate/llm_gateway.hpp"
#include "releasegate/planner.hpp"

namespace releasegate {

enum class ActorMode { safe, natural_language };

std::string_view to_string(ActorMode mode);
std::optional<ActorMode> parse_actor_mode(std::string_view s);

struct ReflectionConfig {
  int max_retries = 3;
  ActorMode mode = ActorMode::safe;
};

/// One realization attempt. Exactly one of `error` and `execution_excerpt` is set.
struct MemoryRecord {
  std::size_t step_index = 0;
  std::size_t attempt_index = 0;
  std::string emitted_document;
  std::optional<std::string> error;
  std::optional<std::string> execution_excerpt;
  std::string task_context;
};

inline constexpr std::size_t kExcerptRows = 5;

struct RunResult {
  Table final_table;
  AnalysisPlan plan_executed;
  std::size_t reflection_attempts_total = 0;
  std::vector<MemoryRecord> memory;
  ExecutionTrace trace;
};

class RealizationFailure : public std::runtime_error {
 public:
  RealizationFailure(std::size_t step_index, std::string message, std::vector<MemoryRecord> memory);
  std::size_t step_index() const { return step_index_; }
  const std::vector<MemoryRecord>& memory() const { return memory_; }

 private:
  std::size_t step_index_;
  std::vector<MemoryRecord> memory_;
};

struct RealizedStep {
  Step step;
  /// The running table after the step.
  Table output;
  std::size_t reflection_attempts = 0;
};

/// Translates one natural-language step with the coder model. Each attempt renders the
/// actor prompt (with this step's earlier attempts as memory), completes at temperature 0
/// and parses the reply as a step following `prior` on `base_schema`. A failed attempt
/// appends a record with the error and retries, up to config.max_retries times; success
/// executes the step on `current` and appends a record with the result excerpt.
/// Throws RealizationFailure once retries are exhausted.
RealizedStep realize_step(const std::string& nl_step, std::size_t step_index, const std::string& task_context,
                          const AnalysisPlan& prior, const Table& current, const Schema& base_schema,
                          const KnowledgeBase& kb, const LlmGateway& gateway, const ReflectionConfig& config,
                          std::vector<MemoryRecord>& memory);

/// Safe mode executes decision.chosen directly. Natural-language mode realizes each of
/// `nl_steps` (default: the chosen plan's renderings) in order, then executes the realized
/// plan. The gateway is unused in safe mode.
RunResult run(const PlanDecision& decision, const std::optional<std::vector<std::string>>& nl_steps,
              const Table& table, const KnowledgeBase& kb, const LlmGateway* gateway, const ReflectionConfig& config);

/// First kExcerptRows rows as CSV plus a row-count line.
std::string table_excerpt(const Table& table);

nlohmann::ordered_json memory_to_json(const std::vector<MemoryRecord>& memory);

// ---------------------------------------------------------------------------
// Data-source plugins
// ---------------------------------------------------------------------------

struct LoadRequest {
  /// File path for file-based loaders.
  std::string source;
  std::optional<Schema> schema;
  std::map<std::string, std::string> options;
};

using DataLoader = std::function<Table(const LoadRequest&)>;

class PluginError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PluginRegistry {
 public:
  /// Throws PluginError on a duplicate name.
  void register_plugin(const std::string& name, DataLoader loader);
  /// Throws PluginError when nothing is registered under `name`.
  const DataLoader& resolve(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, DataLoader> loaders_;
};

/// Registry with the "csv" loader (source = path, schema required).
PluginRegistry default_plugins();

}  // namespace releasegate
