// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "releasegate/actor.hpp"
#include "releasegate/knowledge_base.hpp"
#include "releasegate/table.hpp"

namespace releasegate {

// Synthetic release-gate test results. Field names and value domains are invented; the data
// stands in for a proprietary table and carries no real-world statistics.

struct GeneratorConfig {
  std::uint64_t seed = 7;
  std::size_t n_rows = 55000;
  std::size_t n_release_candidates = 12;
  std::size_t n_test_functions = 30;
};

struct SyntheticDataset {
  Table table;
  KnowledgeBase kb;
};

/// Throws std::invalid_argument when a count is zero.
void check_generator_config(const GeneratorConfig& config);

/// The 40-field schema (independent of the seed and row count).
Schema synthetic_schema(const GeneratorConfig& config);

/// Knowledge base describing synthetic_schema(config), with constraints and worked examples.
KnowledgeBase synthetic_kb(const GeneratorConfig& config);

/// Deterministic for a given config on every platform.
SyntheticDataset generate(const GeneratorConfig& config);

/// Adds the "synthetic" loader (options: seed, rows, release_candidates, test_functions).
void register_synthetic_plugin(PluginRegistry& registry);

}  // namespace releasegate
