// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "releasegate/actor.hpp"
#include "releasegate/knowledge_base.hpp"
#include "releasegate/llm_gateway.hpp"
#include "releasegate/plan.hpp"
#include "releasegate/strict_match.hpp"
#include "releasegate/synthetic.hpp"
#include "releasegate/table.hpp"

namespace releasegate {

// ---------------------------------------------------------------------------
// Suite construction
// ---------------------------------------------------------------------------

/// A full ground-truth plan with one question per prefix (queries[i] is answered by the
/// first i+1 steps).
struct AblationSeed {
  std::string id;
  AnalysisPlan full_plan;
  std::vector<std::string> queries;
};

struct BenchmarkCase {
  std::string id;  // "<seed id>.<prefix length>"
  std::string query_text;
  int difficulty = 1;
  AnalysisPlan ground_truth_plan;
  Table expected;
  /// Whether strict matching compares row positions.
  bool ordered = false;
};

struct SuiteFile {
  std::string name;
  GeneratorConfig dataset;
  /// Cumulative case counts for levels 1, 1-2, 1-3, 1-4, when the suite pins them.
  std::optional<std::vector<std::size_t>> expected_band_totals;
  std::vector<AblationSeed> seeds;
};

class BenchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The generator settings of a suite document (defaults for absent keys). Throws BenchError.
GeneratorConfig suite_dataset_config(const nlohmann::json& doc);

/// Parses a suite file; plans are validated against `schema`. Throws BenchError.
SuiteFile suite_from_json(const nlohmann::json& doc, const Schema& schema);
SuiteFile load_suite(const std::filesystem::path& path, const Schema& schema);
nlohmann::ordered_json suite_to_json(const SuiteFile& suite);

/// One case per seed prefix with its expected table from the reference interpreter.
/// Throws BenchError when a prefix does not validate, a seed's query count differs from its
/// step count, or `expected_band_totals` is given and not met.
std::vector<BenchmarkCase> generate_cases(const std::vector<AblationSeed>& seeds, const Table& dataset,
                                          const std::optional<std::vector<std::size_t>>& expected_band_totals = {});

/// Cumulative counts of cases with difficulty <= 1, 2, 3, 4.
std::vector<std::size_t> band_totals(const std::vector<BenchmarkCase>& cases);

// ---------------------------------------------------------------------------
// Scoring and reporting
// ---------------------------------------------------------------------------

/// A percentage held in hundredths, truncated (not rounded) to two decimals.
struct Percentage {
  std::int64_t hundredths = 0;

  /// "18.75%", "90%", "0%".
  std::string text() const;
  double value() const { return static_cast<double>(hundredths) / 100.0; }
  friend bool operator==(const Percentage&, const Percentage&) = default;
};

/// 100 * success / total. Throws std::invalid_argument unless 1 <= total and success <= total.
Percentage success_rate(std::size_t success, std::size_t total);

enum class FailureReason { planning_failure, realization_failure, mismatch };
std::string_view to_string(FailureReason reason);

struct CaseOutcome {
  std::size_t k_shot = 0;
  std::string case_id;
  int difficulty = 1;
  bool success = false;
  std::optional<FailureReason> reason;
  /// Planner errors, realization error, or the strict-match diff.
  std::string detail;
  std::size_t reflection_attempts = 0;
  std::size_t chosen_votes = 0;
  double elapsed_ms = 0;
};

struct BandRow {
  std::size_t k_shot = 0;
  int max_level = 1;  // band 1..max_level
  std::size_t total = 0;
  std::size_t success = 0;
  std::size_t failed = 0;
  Percentage rate;
};

struct BenchReport {
  std::string suite;
  std::string mode;
  std::size_t n_samples = 0;
  std::vector<std::size_t> k_list;
  /// Ordered by (k, band).
  std::vector<BandRow> rows;
  std::vector<CaseOutcome> cases;
  bool incomplete = false;
  std::string abort_reason;
};

struct BenchConfig {
  std::vector<std::size_t> k_list;
  std::size_t n_samples = 3;
  ActorMode mode = ActorMode::safe;
  int max_retries = 3;
  /// Cases evaluated concurrently.
  std::size_t width = 1;
  std::string suite_name;
};

/// Runs plan -> act -> strict match for every (k, case). A case succeeds only when it runs
/// end to end and matches. A gateway error stops the run; the report then covers the cases
/// finished so far and is flagged incomplete. Throws std::invalid_argument on an empty
/// k_list or case list, or a k larger than the example store.
BenchReport run_suite(const std::vector<BenchmarkCase>& cases, const Table& dataset, const KnowledgeBase& kb,
                      const BenchConfig& config, const LlmGateway& gateway);

/// Aggregates outcomes into band rows for each k.
std::vector<BandRow> aggregate_rows(const std::vector<CaseOutcome>& outcomes, const std::vector<std::size_t>& k_list);

/// Aligned text table: # Examples, Task Difficulty, # Total Tasks, # Success, # Failed, Performance.
std::string format_report_text(const BenchReport& report);
nlohmann::ordered_json report_to_json(const BenchReport& report);
BenchReport report_from_json(const nlohmann::json& doc);

// ---------------------------------------------------------------------------
// Scripted planners
// ---------------------------------------------------------------------------

/// Sample tag prefix the runner uses for planner calls: "bench/k<k>/<case id>".
std::string bench_sample_tag(std::size_t k_shot, const std::string& case_id);

/// Fixtures answering every case with its ground-truth plan (and every step sentence with
/// its step document, for natural-language mode).
std::vector<Fixture> oracle_fixtures(const std::vector<BenchmarkCase>& cases);

/// Designated failures: for each (k, level) the first `count` cases of that level answer
/// with an unusable reply; all other cases get the oracle answer.
struct DesignatedFailures {
  std::size_t k_shot = 0;
  int level = 1;
  std::size_t count = 0;
};
std::vector<Fixture> failing_fixtures(const std::vector<BenchmarkCase>& cases,
                                      const std::vector<DesignatedFailures>& failures);

/// Reference failure profile: per (k, level) counts giving 3/6/9/11, 15/27/32/34, 16/31/38/41 and
/// 16/32/41/45 successes over the 16/32/44/50 band totals for k = 0..3.
std::vector<DesignatedFailures> reference_table_failures();

}  // namespace releasegate
