// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion. Exit status is non-zero when any fails.

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include <httplib.h>
#include <unistd.h>

#include "releasegate/actor.hpp"
#include "releasegate/benchmark.hpp"
#include "releasegate/csv.hpp"
#include "releasegate/executor.hpp"
#include "releasegate/plan_wire.hpp"
#include "releasegate/planner.hpp"
#include "releasegate/reference_executor.hpp"
#include "releasegate/service.hpp"
#include "releasegate/strict_match.hpp"
#include "releasegate/synthetic.hpp"
#include "support/dataset.hpp"
#include "support/plan_fuzz.hpp"
#include "support/random_gen.hpp"

namespace rg = releasegate;
using nlohmann::json;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

/// Collects failed expectations for one criterion.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  Verdict verdict(const std::string& summary) const {
    if (failures_.empty()) return {true, summary};
    std::string d = summary + "; failed: ";
    for (std::size_t i = 0; i < failures_.size(); ++i) d += (i ? "; " : "") + failures_[i];
    return {false, d};
  }

 private:
  std::vector<std::string> failures_;
};

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int decimals = 1) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(decimals);
  s << v;
  return s.str();
}

const char* kFailMostQuestion = "What are the test case functions that fail the most for release candidate RC7?";

const char* kFailMostPlan = R"({"steps":[
  {"kind":"slice","select":["test_case_function"],"where":{"and":[
     {"col":"release_candidate","op":"eq","value":"RC7"},{"col":"test_status","op":"eq","value":"failed"}]}},
  {"kind":"aggregate","func":"count","group_by":["test_case_function"]},
  {"kind":"sort","keys":[{"col":"count","order":"desc"}]},
  {"kind":"limit","n":5}]})";

const char* kTopThreePlan = R"({"steps":[
  {"kind":"slice","select":["test_case_function"],"where":{"and":[
     {"col":"release_candidate","op":"eq","value":"RC7"},{"col":"test_status","op":"eq","value":"failed"}]}},
  {"kind":"aggregate","func":"count","group_by":["test_case_function"]},
  {"kind":"sort","keys":[{"col":"count","order":"desc"}]},
  {"kind":"limit","n":3}]})";

const char* kSlowestPlan = R"({"steps":[
  {"kind":"sort","keys":[{"col":"duration_s","order":"desc"}]},
  {"kind":"limit","n":1}]})";

const rg::SyntheticDataset& small() {
  static const rg::SyntheticDataset ds = rg::generate(rg::GeneratorConfig{7, 3000, 12, 30});
  return ds;
}

std::string fenced(const std::string& wire) { return "```json\n" + wire + "\n```"; }

std::vector<rg::Fixture> tagged(const std::vector<std::string>& replies, const std::string& prefix) {
  std::vector<rg::Fixture> out;
  for (std::size_t i = 0; i < replies.size(); ++i) {
    rg::Fixture f;
    f.tag = prefix + std::to_string(i);
    f.response = replies[i];
    out.push_back(std::move(f));
  }
  return out;
}

// ---------------------------------------------------------------------------

Verdict executor_matches_oracle() {
  Checks c;
  rg::testing::Rng rng(0xacce'0001);
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t matched = 0;
  for (int i = 0; i < 200; ++i) {
    const auto table = rg::testing::random_table(rng, {50, 8, 12});
    const auto plan = rg::testing::random_plan(rng, table);
    const auto verdict = rg::strict_match(rg::execute_plan(plan, table).table, rg::oracle_execute(plan, table), true);
    if (verdict.matched) {
      ++matched;
    } else {
      c.expect(false, "case " + std::to_string(i) + ": " + verdict.diff.message);
    }
  }
  const double ms = ms_since(t0);
  c.expect(matched == 200, "matched " + std::to_string(matched) + "/200");
  c.expect(ms < 10'000, "runtime " + fmt(ms) + " ms");
  return c.verdict(std::to_string(matched) + "/200 pairs strict-match in " + fmt(ms) + " ms");
}

Verdict strict_match_metamorphic() {
  Checks c;
  rg::testing::Rng rng(0xacce'0002);
  std::size_t tables = 0, mutated = 0;
  for (int i = 0; i < 100; ++i) {
    auto t = rg::testing::random_table(rng);
    while (t.row_count() == 0) t = rg::testing::random_table(rng);
    ++tables;
    const auto tag = "table " + std::to_string(i);
    c.expect(rg::strict_match(t, t, true).matched, tag + " reflexivity");
    c.expect(rg::strict_match(rg::testing::reverse_columns(t), t, true).matched, tag + " column permutation");
    c.expect(rg::strict_match(rg::testing::shuffle_rows(rng, t), t, false).matched, tag + " row permutation");
    const auto m = rg::testing::mutate_cell(rng, t, rng.below(t.row_count()), rng.below(t.column_count()));
    const bool detected = !rg::strict_match(m, t, false).matched && !rg::strict_match(m, t, true).matched;
    c.expect(detected, tag + " mutation undetected");
    mutated += detected;
  }
  return c.verdict(std::to_string(tables) + " tables: reflexive, permutation-invariant, " + std::to_string(mutated) +
                   "/100 mutations detected");
}

Verdict self_consistency_voting() {
  Checks c;
  const auto& kb = small().kb;
  const auto& schema = small().table.schema();
  const std::string a = fenced(rg::plan_to_wire(rg::parse_plan(kFailMostPlan, schema)));
  const std::string b = fenced(rg::plan_to_wire(rg::parse_plan(kTopThreePlan, schema)));
  const std::string cc = fenced(rg::plan_to_wire(rg::parse_plan(kSlowestPlan, schema)));
  const auto canon_a = rg::canonicalize(rg::parse_plan(kFailMostPlan, schema), schema);
  rg::PlannerConfig cfg;

  rg::LlmGateway g1(std::make_shared<rg::ScriptedBackend>(tagged({a, a, b}, "plan#")));
  const auto d1 = rg::plan_query(kFailMostQuestion, kb, cfg, g1);
  c.expect(d1.chosen_canonical == canon_a && d1.chosen_votes == 2, "[A,A,B] did not choose A with 2 votes");

  rg::LlmGateway g2(std::make_shared<rg::ScriptedBackend>(tagged({a, b, cc}, "plan#")));
  const auto d2 = rg::plan_query(kFailMostQuestion, kb, cfg, g2);
  c.expect(d2.chosen_canonical == canon_a && d2.chosen_votes == 1, "[A,B,C] did not choose A by index");

  rg::LlmGateway g3(std::make_shared<rg::ScriptedBackend>(
      tagged({"no plan", "```json\n{\"steps\":[]}\n```", R"({"steps":[{"kind":"limit","n":-1}]})"}, "plan#")));
  std::size_t recorded = 0;
  try {
    rg::plan_query(kFailMostQuestion, kb, cfg, g3);
    c.expect(false, "all-invalid samples produced a plan");
  } catch (const rg::PlanningFailure& e) {
    for (const auto& cand : e.candidates()) recorded += (!cand.plan && !cand.error.empty());
    c.expect(e.candidates().size() == 3 && recorded == 3, "all-invalid recorded " + std::to_string(recorded) +
                                                              " errors");
  }
  return c.verdict("[A,A,B] -> A (2 votes); [A,B,C] -> A (tie, lowest index); all-invalid -> planning failure with " +
                   std::to_string(recorded) + " errors");
}

Verdict self_reflection() {
  Checks c;
  const auto& ds = small();
  rg::PlanDecision d;
  d.query = "Which test took longest?";
  d.chosen = rg::parse_plan(R"({"steps":[{"kind":"sort","keys":[{"col":"duration_s","order":"desc"}]}]})",
                            ds.table.schema());
  const std::string invalid = R"({"kind":"sort","keys":[{"col":"durration","order":"desc"}]})";
  const std::string valid = fenced(rg::step_to_wire(d.chosen.steps[0]));

  rg::LlmGateway g(std::make_shared<rg::ScriptedBackend>(tagged({invalid, valid}, "actor/step0/attempt")));
  const rg::ReflectionConfig cfg{3, rg::ActorMode::natural_language};
  const auto r = rg::run(d, std::nullopt, ds.table, ds.kb, &g, cfg);
  c.expect(r.reflection_attempts_total == 1, "reflection_attempts " + std::to_string(r.reflection_attempts_total));
  c.expect(!r.memory.empty() && r.memory[0].error && r.memory[0].error->find("durration") != std::string::npos,
           "first memory record lacks the validator error");
  c.expect(rg::strict_match(r.final_table, rg::execute_plan(d.chosen, ds.table).table, true).matched,
           "recovered result differs");

  std::size_t records = 0;
  rg::LlmGateway bad(std::make_shared<rg::ScriptedBackend>(tagged({invalid, invalid, invalid, invalid},
                                                                  "actor/step0/attempt")));
  try {
    rg::run(d, std::nullopt, ds.table, ds.kb, &bad, cfg);
    c.expect(false, "exhausted retries did not fail");
  } catch (const rg::RealizationFailure& e) {
    records = e.memory().size();
    c.expect(records == 4, "exhaustion left " + std::to_string(records) + " memory records");
  }
  return c.verdict("invalid-then-valid recovers with 1 reflection; max_retries=3 exhaustion fails with " +
                   std::to_string(records) + " memory records");
}

Verdict harness_soundness() {
  Checks c;
  const auto& ds = rg::testing::default_dataset();
  const auto& cases = rg::testing::default_cases();
  const auto totals = rg::band_totals(cases);
  c.expect(totals == std::vector<std::size_t>{16, 32, 44, 50}, "band totals differ");

  rg::BenchConfig cfg;
  cfg.k_list = {0, 1, 2, 3};
  cfg.width = 4;
  std::size_t perfect_rows = 0;
  for (auto mode : {rg::ActorMode::safe, rg::ActorMode::natural_language}) {
    cfg.mode = mode;
    rg::LlmGateway oracle(std::make_shared<rg::ScriptedBackend>(rg::oracle_fixtures(cases)));
    const auto report = rg::run_suite(cases, ds.table, ds.kb, cfg, oracle);
    for (const auto& row : report.rows) {
      const bool perfect = row.success == row.total && row.rate.text() == "100%";
      perfect_rows += perfect;
      c.expect(perfect, std::string(rg::to_string(mode)) + " k=" + std::to_string(row.k_shot) + " band 1-" +
                            std::to_string(row.max_level) + " below 100%");
    }
  }

  cfg.mode = rg::ActorMode::safe;
  cfg.k_list = {0};
  rg::LlmGateway failing(std::make_shared<rg::ScriptedBackend>(rg::failing_fixtures(cases, {{0, 1, 13}})));
  const auto report = rg::run_suite(cases, ds.table, ds.kb, cfg, failing);
  const auto& row = report.rows.at(0);
  const std::string row_text = "(" + std::to_string(row.total) + ", " + std::to_string(row.success) + ", " +
                               std::to_string(row.failed) + ", " + row.rate.text() + ")";
  c.expect(row.max_level == 1 && row_text == "(16, 3, 13, 18.75%)", "Level-1 row " + row_text);
  const auto rate = rg::success_rate(45, 50).text();
  c.expect(rate == "90%", "success_rate(45,50) = " + rate);
  return c.verdict("bands 16/32/44/50; oracle 100% in " + std::to_string(perfect_rows) +
                   "/32 band rows (safe + natural_language); 13 designated failures -> " + row_text +
                   "; success_rate(45,50) = " + rate);
}

Verdict live_rates_substitution() {
  // Live hosted-model rates are out of reach offline; criteria 1-5 carry the claim and the
  // optional live smoke binary exercises a configured backend outside ctest.
  Checks c;
  c.expect(std::filesystem::exists(RELEASEGATE_LIVE_SMOKE_PATH), "live smoke binary missing");
  return c.verdict("live model rates not reproduced offline (by design); substituted by criteria 1-5 and 9; "
                   "optional live smoke test built, not registered with ctest");
}

Verdict determinism_and_data() {
  Checks c;
  const auto& first = rg::testing::default_dataset().table;
  const auto second = rg::generate(rg::GeneratorConfig{}).table;
  const auto csv_a = rg::to_csv(first);
  const auto csv_b = rg::to_csv(second);
  c.expect(csv_a == csv_b, "two seed-7 generations differ");
  c.expect(first.row_count() == 55'000 && first.column_count() == 40,
           "shape " + std::to_string(first.row_count()) + "x" + std::to_string(first.column_count()));
  c.expect(rg::validate(first).empty(), "dataset violates its schema");
  const auto back = rg::load_csv(csv_a, first.schema());
  c.expect(rg::strict_match(back, first, true).matched, "CSV round trip differs");
  return c.verdict("seed 7 byte-stable (" + std::to_string(csv_a.size()) + " bytes); " +
                   std::to_string(first.row_count()) + " rows x " + std::to_string(first.column_count()) +
                   " fields; CSV round trip strict-matches");
}

Verdict http_latency() {
  Checks c;
  const auto& ds = rg::testing::default_dataset();
  const auto plan = rg::parse_plan(kFailMostPlan, ds.table.schema());
  c.expect(rg::classify_difficulty(plan) == 4, "query is not Level 4");
  const auto dir = std::filesystem::temp_directory_path() / ("releasegate_acceptance_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  rg::AppConfig cfg;
  cfg.data_dir = dir;
  cfg.kb_dir = rg::testing::data_path("kb");
  cfg.suite_dir = rg::testing::data_path("bench");
  cfg.port = 0;
  rg::Fixture f;
  f.equals = kFailMostQuestion;
  f.response = "Reasoning:\n1. Filter, count, rank.\n" + fenced(rg::plan_to_wire(plan));
  f.repeat = true;
  double total_ms = -1;
  {
    rg::Service service(cfg, std::make_shared<rg::ScriptedBackend>(std::vector<rg::Fixture>{f}));
    httplib::Client client("127.0.0.1", service.start());
    client.set_read_timeout(120, 0);
    client.set_write_timeout(120, 0);
    auto up = client.Post("/v1/datasets?kb=releasegate_kb", rg::to_csv(ds.table), "text/csv");
    c.expect(up && up->status == 201, "dataset upload failed");
    if (up && up->status == 201) {
      const auto dataset_id = json::parse(up->body)["dataset_id"].get<std::string>();
      auto q = client.Post("/v1/query", json{{"dataset_id", dataset_id}, {"question", kFailMostQuestion}}.dump(),
                           "application/json");
      c.expect(q && q->status == 201, "query not accepted");
      if (q && q->status == 201) {
        const auto run_id = json::parse(q->body)["run_id"].get<std::string>();
        service.wait_for_run(run_id, 60'000);
        auto got = client.Get("/v1/runs/" + run_id);
        const auto rec = json::parse(got->body);
        c.expect(rec.value("status", "") == "done", "run status " + rec.value("status", std::string("?")));
        if (rec.contains("timings")) total_ms = rec["timings"].value("total_ms", -1.0);
        auto csv = client.Get("/v1/runs/" + run_id + "/result.csv");
        c.expect(csv && csv->body == rg::to_csv(rg::execute_plan(plan, ds.table).table), "result CSV differs");
      }
    }
  }
  std::filesystem::remove_all(dir);
  c.expect(total_ms >= 0 && total_ms < 1000, "total_ms " + fmt(total_ms));
  return c.verdict("Level-4 query on 55,000 rows via HTTP: total_ms = " + fmt(total_ms, 2));
}

Verdict fuzz_safety_gate() {
  Checks c;
  const auto r = rg::testing::fuzz_plan_parser(0xacce'0009, 10'000);
  c.expect(r.documents == 10'000, "documents " + std::to_string(r.documents));
  c.expect(r.execution_errors == 0, std::to_string(r.execution_errors) + " execution errors");
  c.expect(r.parsed_but_invalid == 0, std::to_string(r.parsed_but_invalid) + " parsed plans failed validation");
  c.expect(r.accepted > 0 && r.rejected_by_parser > 0, "degenerate corpus");
  for (const auto& e : r.examples) c.expect(false, e);
  return c.verdict(std::to_string(r.documents) + " documents: " + std::to_string(r.rejected_by_parser) +
                   " rejected, " + std::to_string(r.accepted) + " accepted, " + std::to_string(r.execution_errors) +
                   " execution errors, " + std::to_string(r.oracle_mismatches) + " oracle mismatches");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"executor-oracle equivalence", executor_matches_oracle},
      {"strict-match metamorphic suite", strict_match_metamorphic},
      {"self-consistency voting", self_consistency_voting},
      {"self-reflection loop", self_reflection},
      {"benchmark harness soundness", harness_soundness},
      {"live model rates (substituted)", live_rates_substitution},
      {"determinism and dataset shape", determinism_and_data},
      {"HTTP latency on the full dataset", http_latency},
      {"plan fuzzing safety gate", fuzz_safety_gate},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << i + 1 << ". " << criteria[i].first << " - " << v.detail
              << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
