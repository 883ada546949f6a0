// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "releasegate/plan.hpp"
#include "releasegate/table.hpp"

namespace releasegate {

/// Row-at-a-time reference interpreter with the same contract as execute_plan.
///
/// It deliberately shares no code with the columnar executor: it materializes rows,
/// evaluates predicates per row, groups and deduplicates with ordered maps, and derives its
/// own output schema. Benchmark ground truth is produced with it and tests hold the
/// executor to it.
Table oracle_execute(const AnalysisPlan& plan, const Table& table);

}  // namespace releasegate
