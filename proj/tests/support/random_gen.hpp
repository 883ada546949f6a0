// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

#include "releasegate/plan.hpp"
#include "releasegate/table.hpp"

namespace releasegate::testing {

/// Seeded source with a portable bounded mapping (std distributions differ across
/// standard libraries).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform-enough integer in [0, n).
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  std::int64_t between(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  bool chance(unsigned percent) { return below(100) < percent; }

 private:
  std::mt19937_64 engine_;
};

struct RandomTableOptions {
  std::size_t max_rows = 50;
  std::size_t max_columns = 8;
  unsigned null_percent = 12;
};

/// Small table over mixed column types with a narrow value domain, so filters, groups and
/// duplicates actually occur.
Table random_table(Rng& rng, const RandomTableOptions& options = {});

/// A plan of 1..max_steps steps that validates against `table`'s schema. Operands are drawn
/// mostly from values present in the table.
AnalysisPlan random_plan(Rng& rng, const Table& table, std::size_t max_steps = 4);

/// Copy of `table` with rows reordered by a seeded shuffle.
Table shuffle_rows(Rng& rng, const Table& table);

/// Copy of `table` with columns in reversed order.
Table reverse_columns(const Table& table);

/// Copy of `table` with one cell changed to a different value of the same type.
Table mutate_cell(Rng& rng, const Table& table, std::size_t row, std::size_t col);

}  // namespace releasegate::testing
