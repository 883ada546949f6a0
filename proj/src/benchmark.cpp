// SPDX-License-Identifier: Apache-2.0
#include "releasegate/benchmark.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "releasegate/plan_wire.hpp"
#include "releasegate/planner.hpp"
#include "releasegate/reference_executor.hpp"

namespace releasegate {

using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Suite files
// ---------------------------------------------------------------------------

GeneratorConfig suite_dataset_config(const json& doc) {
  GeneratorConfig c;
  try {
    if (!doc.is_object()) throw BenchError("suite must be an object");
    if (doc.contains("dataset")) {
      const auto& d = doc.at("dataset");
      c.seed = d.value("seed", c.seed);
      c.n_rows = d.value("rows", c.n_rows);
      c.n_release_candidates = d.value("release_candidates", c.n_release_candidates);
      c.n_test_functions = d.value("test_functions", c.n_test_functions);
    }
  } catch (const json::exception& e) {
    throw BenchError(std::string("malformed suite dataset: ") + e.what());
  }
  return c;
}

SuiteFile suite_from_json(const json& doc, const Schema& schema) {
  SuiteFile suite;
  try {
    suite.name = doc.value("name", std::string("suite"));
    suite.dataset = suite_dataset_config(doc);
    if (doc.contains("expected_band_totals")) {
      suite.expected_band_totals = doc.at("expected_band_totals").get<std::vector<std::size_t>>();
    }
    for (const auto& s : doc.at("seeds")) {
      AblationSeed seed;
      seed.id = s.at("id").get<std::string>();
      seed.queries = s.at("queries").get<std::vector<std::string>>();
      try {
        seed.full_plan = plan_from_json(s.at("plan"), schema);
      } catch (const PlanError& e) {
        throw BenchError("seed " + seed.id + ": " + e.what());
      }
      suite.seeds.push_back(std::move(seed));
    }
  } catch (const json::exception& e) {
    throw BenchError(std::string("malformed suite: ") + e.what());
  }
  return suite;
}

SuiteFile load_suite(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BenchError("cannot read suite " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw BenchError(path.string() + ": " + e.what());
  }
  return suite_from_json(doc, schema);
}

ordered_json suite_to_json(const SuiteFile& suite) {
  ordered_json doc;
  doc["name"] = suite.name;
  doc["dataset"] = {{"seed", suite.dataset.seed},
                    {"rows", suite.dataset.n_rows},
                    {"release_candidates", suite.dataset.n_release_candidates},
                    {"test_functions", suite.dataset.n_test_functions}};
  if (suite.expected_band_totals) doc["expected_band_totals"] = *suite.expected_band_totals;
  ordered_json seeds = ordered_json::array();
  for (const auto& s : suite.seeds) {
    ordered_json j;
    j["id"] = s.id;
    j["plan"] = plan_to_json(s.full_plan);
    j["queries"] = s.queries;
    seeds.push_back(std::move(j));
  }
  doc["seeds"] = std::move(seeds);
  return doc;
}

std::vector<BenchmarkCase> generate_cases(const std::vector<AblationSeed>& seeds, const Table& dataset,
                                          const std::optional<std::vector<std::size_t>>& expected_band_totals) {
  std::vector<BenchmarkCase> cases;
  for (const auto& seed : seeds) {
    if (seed.queries.size() != seed.full_plan.steps.size()) {
      throw BenchError("seed " + seed.id + " has " + std::to_string(seed.full_plan.steps.size()) + " steps but " +
                       std::to_string(seed.queries.size()) + " queries");
    }
    AnalysisPlan prefix;
    for (std::size_t i = 0; i < seed.full_plan.steps.size(); ++i) {
      prefix.steps.push_back(seed.full_plan.steps[i]);
      auto violations = validate_plan(prefix, dataset.schema());
      if (!violations.empty()) {
        throw BenchError("seed " + seed.id + " prefix " + std::to_string(i + 1) + " is invalid: step " +
                         std::to_string(violations[0].step + 1) + ": " + violations[0].message);
      }
      BenchmarkCase c{seed.id + "." + std::to_string(i + 1),
                      seed.queries[i],
                      classify_difficulty(prefix),
                      prefix,
                      oracle_execute(prefix, dataset),
                      plan_output_is_ordered(prefix)};
      cases.push_back(std::move(c));
    }
  }
  if (expected_band_totals) {
    const auto got = band_totals(cases);
    if (got != *expected_band_totals) {
      auto show = [](const std::vector<std::size_t>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "/" : "") + std::to_string(v[i]);
        return s;
      };
      throw BenchError("band totals " + show(got) + " differ from the expected " + show(*expected_band_totals));
    }
  }
  return cases;
}

std::vector<std::size_t> band_totals(const std::vector<BenchmarkCase>& cases) {
  std::vector<std::size_t> totals(4, 0);
  for (const auto& c : cases) {
    for (int band = c.difficulty; band <= 4; ++band) ++totals[static_cast<std::size_t>(band - 1)];
  }
  return totals;
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

std::string Percentage::text() const {
  std::string s = std::to_string(hundredths / 100);
  const auto frac = hundredths % 100;
  if (frac != 0) {
    s += '.';
    s += static_cast<char>('0' + frac / 10);
    if (frac % 10 != 0) s += static_cast<char>('0' + frac % 10);
  }
  return s + "%";
}

Percentage success_rate(std::size_t success, std::size_t total) {
  if (total < 1) throw std::invalid_argument("success_rate: total must be at least 1");
  if (success > total) throw std::invalid_argument("success_rate: success exceeds total");
  return Percentage{static_cast<std::int64_t>((10000 * success) / total)};
}

std::string_view to_string(FailureReason reason) {
  switch (reason) {
    case FailureReason::planning_failure: return "planning_failure";
    case FailureReason::realization_failure: return "realization_failure";
    case FailureReason::mismatch: return "mismatch";
  }
  return "?";
}

namespace {

std::optional<FailureReason> parse_reason(std::string_view s) {
  if (s == "planning_failure") return FailureReason::planning_failure;
  if (s == "realization_failure") return FailureReason::realization_failure;
  if (s == "mismatch") return FailureReason::mismatch;
  return std::nullopt;
}

std::string band_label(int max_level) { return max_level == 1 ? "1" : "1-" + std::to_string(max_level); }

}  // namespace

std::vector<BandRow> aggregate_rows(const std::vector<CaseOutcome>& outcomes, const std::vector<std::size_t>& k_list) {
  std::vector<BandRow> rows;
  for (auto k : k_list) {
    for (int band = 1; band <= 4; ++band) {
      BandRow row;
      row.k_shot = k;
      row.max_level = band;
      for (const auto& o : outcomes) {
        if (o.k_shot != k || o.difficulty > band) continue;
        ++row.total;
        if (o.success) ++row.success;
      }
      row.failed = row.total - row.success;
      if (row.total > 0) row.rate = success_rate(row.success, row.total);
      rows.push_back(row);
    }
  }
  return rows;
}

std::string bench_sample_tag(std::size_t k_shot, const std::string& case_id) {
  return "bench/k" + std::to_string(k_shot) + "/" + case_id;
}

BenchReport run_suite(const std::vector<BenchmarkCase>& cases, const Table& dataset, const KnowledgeBase& kb,
                      const BenchConfig& config, const LlmGateway& gateway) {
  if (config.k_list.empty()) throw std::invalid_argument("run_suite: k list is empty");
  if (cases.empty()) throw std::invalid_argument("run_suite: no cases");
  if (config.n_samples < 1) throw std::invalid_argument("run_suite: n_samples must be at least 1");
  for (auto k : config.k_list) {
    if (k > kb.examples.size()) {
      throw std::invalid_argument("run_suite: k=" + std::to_string(k) + " exceeds the " +
                                  std::to_string(kb.examples.size()) + " stored examples");
    }
  }

  const std::size_t n_items = config.k_list.size() * cases.size();
  std::vector<std::optional<CaseOutcome>> outcomes(n_items);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> aborted{false};
  std::mutex mu;
  std::string abort_reason;
  std::exception_ptr fault;

  auto evaluate = [&](std::size_t item) {
    const std::size_t k = config.k_list[item / cases.size()];
    const auto& c = cases[item % cases.size()];
    const auto start = std::chrono::steady_clock::now();
    CaseOutcome o;
    o.k_shot = k;
    o.case_id = c.id;
    o.difficulty = c.difficulty;

    PlannerConfig pc;
    pc.k_shot = k;
    pc.n_samples = config.n_samples;
    pc.parallelism = config.n_samples;
    pc.sample_tag = bench_sample_tag(k, c.id);
    try {
      auto decision = plan_query(c.query_text, kb, pc, gateway);
      o.chosen_votes = decision.chosen_votes;
      ReflectionConfig rc{config.max_retries, config.mode};
      try {
        auto result = run(decision, std::nullopt, dataset, kb, &gateway, rc);
        o.reflection_attempts = result.reflection_attempts_total;
        auto verdict = strict_match(result.final_table, c.expected, c.ordered);
        o.success = verdict.matched;
        if (!verdict.matched) {
          o.reason = FailureReason::mismatch;
          o.detail = std::string(to_string(verdict.diff.kind)) + ": " + verdict.diff.message;
        }
      } catch (const RealizationFailure& e) {
        o.reason = FailureReason::realization_failure;
        o.detail = e.what();
        for (const auto& m : e.memory()) {
          if (m.error) o.reflection_attempts++;
        }
      }
    } catch (const PlanningFailure& e) {
      o.reason = FailureReason::planning_failure;
      o.detail = e.what();
    }
    o.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    outcomes[item] = std::move(o);
  };

  auto worker = [&] {
    while (!aborted) {
      const std::size_t item = next++;
      if (item >= n_items) return;
      try {
        evaluate(item);
      } catch (const GatewayError& e) {
        std::lock_guard lock(mu);
        if (!aborted.exchange(true)) abort_reason = e.what();
      } catch (...) {
        std::lock_guard lock(mu);
        if (!fault) fault = std::current_exception();
        aborted = true;
      }
    }
  };
  const std::size_t width = std::max<std::size_t>(1, std::min(config.width, n_items));
  if (width == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < width; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (fault) std::rethrow_exception(fault);

  BenchReport report;
  report.suite = config.suite_name;
  report.mode = std::string(to_string(config.mode));
  report.n_samples = config.n_samples;
  report.k_list = config.k_list;
  for (auto& o : outcomes) {
    if (o) report.cases.push_back(std::move(*o));
  }
  report.incomplete = aborted.load();
  report.abort_reason = abort_reason;
  report.rows = aggregate_rows(report.cases, config.k_list);
  return report;
}

// ---------------------------------------------------------------------------
// Report formats
// ---------------------------------------------------------------------------

std::string format_report_text(const BenchReport& report) {
  const std::vector<std::string> header = {"# Examples", "Task Difficulty", "# Total Tasks", "# Success", "# Failed",
                                           "Performance"};
  std::vector<std::vector<std::string>> lines;
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& r = report.rows[i];
    const bool first_of_k = i == 0 || report.rows[i - 1].k_shot != r.k_shot;
    lines.push_back({first_of_k ? std::to_string(r.k_shot) + "-shot" : "", band_label(r.max_level),
                     std::to_string(r.total), std::to_string(r.success), std::to_string(r.failed),
                     r.total ? r.rate.text() : "-"});
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& l : lines) width[c] = std::max(width[c], l[c].size());
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) line += "  ";
      std::string cell = cells[c];
      if (c + 1 < cells.size()) cell.resize(width[c], ' ');
      line += cell;
    }
    out << line << '\n';
  };
  auto rule = [&] {
    std::size_t total = 0;
    for (auto w : width) total += w;
    out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  };
  emit(header);
  rule();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i > 0 && !lines[i][0].empty()) rule();
    emit(lines[i]);
  }
  if (report.incomplete) out << "INCOMPLETE: " << report.abort_reason << '\n';
  return out.str();
}

ordered_json report_to_json(const BenchReport& report) {
  ordered_json j;
  j["suite"] = report.suite;
  j["mode"] = report.mode;
  j["n_samples"] = report.n_samples;
  j["k_list"] = report.k_list;
  j["incomplete"] = report.incomplete;
  if (report.incomplete) j["abort_reason"] = report.abort_reason;
  ordered_json rows = ordered_json::array();
  for (const auto& r : report.rows) {
    ordered_json row;
    row["k_shot"] = r.k_shot;
    row["band"] = band_label(r.max_level);
    row["max_level"] = r.max_level;
    row["total"] = r.total;
    row["success"] = r.success;
    row["failed"] = r.failed;
    row["rate"] = r.rate.text();
    row["rate_hundredths"] = r.rate.hundredths;
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  ordered_json cases = ordered_json::array();
  for (const auto& c : report.cases) {
    ordered_json o;
    o["k_shot"] = c.k_shot;
    o["case_id"] = c.case_id;
    o["difficulty"] = c.difficulty;
    o["success"] = c.success;
    if (c.reason) o["reason"] = std::string(to_string(*c.reason));
    if (!c.detail.empty()) o["detail"] = c.detail;
    o["reflection_attempts"] = c.reflection_attempts;
    o["chosen_votes"] = c.chosen_votes;
    o["elapsed_ms"] = c.elapsed_ms;
    cases.push_back(std::move(o));
  }
  j["cases"] = std::move(cases);
  return j;
}

BenchReport report_from_json(const json& j) {
  BenchReport r;
  try {
    r.suite = j.at("suite").get<std::string>();
    r.mode = j.at("mode").get<std::string>();
    r.n_samples = j.at("n_samples").get<std::size_t>();
    r.k_list = j.at("k_list").get<std::vector<std::size_t>>();
    r.incomplete = j.at("incomplete").get<bool>();
    r.abort_reason = j.value("abort_reason", std::string{});
    for (const auto& row : j.at("rows")) {
      BandRow b;
      b.k_shot = row.at("k_shot").get<std::size_t>();
      b.max_level = row.at("max_level").get<int>();
      b.total = row.at("total").get<std::size_t>();
      b.success = row.at("success").get<std::size_t>();
      b.failed = row.at("failed").get<std::size_t>();
      b.rate.hundredths = row.at("rate_hundredths").get<std::int64_t>();
      r.rows.push_back(b);
    }
    for (const auto& o : j.at("cases")) {
      CaseOutcome c;
      c.k_shot = o.at("k_shot").get<std::size_t>();
      c.case_id = o.at("case_id").get<std::string>();
      c.difficulty = o.at("difficulty").get<int>();
      c.success = o.at("success").get<bool>();
      if (o.contains("reason")) {
        c.reason = parse_reason(o.at("reason").get<std::string>());
        if (!c.reason) throw BenchError("unknown failure reason in report");
      }
      c.detail = o.value("detail", std::string{});
      c.reflection_attempts = o.value("reflection_attempts", std::size_t{0});
      c.chosen_votes = o.value("chosen_votes", std::size_t{0});
      c.elapsed_ms = o.value("elapsed_ms", 0.0);
      r.cases.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw BenchError(std::string("malformed report: ") + e.what());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Scripted planners
// ---------------------------------------------------------------------------

namespace {

std::string oracle_reply(const BenchmarkCase& c) {
  std::string reply = "Reasoning:\n";
  const auto steps = render_steps(c.ground_truth_plan);
  for (std::size_t i = 0; i < steps.size(); ++i) reply += std::to_string(i + 1) + ". " + steps[i] + "\n";
  reply += "```json\n" + plan_to_wire(c.ground_truth_plan) + "\n```\n";
  return reply;
}

void append_step_fixtures(const std::vector<BenchmarkCase>& cases, std::vector<Fixture>& out) {
  std::map<std::string, std::string> seen;
  for (const auto& c : cases) {
    for (const auto& step : c.ground_truth_plan.steps) {
      const auto sentence = render_step(step);
      const auto doc = "```json\n" + step_to_wire(step) + "\n```";
      auto [it, inserted] = seen.emplace(sentence, doc);
      if (!inserted) {
        if (it->second != doc) throw BenchError("two different steps render as '" + sentence + "'");
        continue;
      }
      Fixture f;
      f.equals = sentence;
      f.tag = "actor/";
      f.response = doc;
      f.repeat = true;
      out.push_back(std::move(f));
    }
  }
}

}  // namespace

std::vector<Fixture> oracle_fixtures(const std::vector<BenchmarkCase>& cases) {
  std::vector<Fixture> out;
  for (const auto& c : cases) {
    Fixture f;
    f.equals = c.query_text;
    f.tag = "bench/";
    f.response = oracle_reply(c);
    f.repeat = true;
    out.push_back(std::move(f));
  }
  append_step_fixtures(cases, out);
  return out;
}

std::vector<Fixture> failing_fixtures(const std::vector<BenchmarkCase>& cases,
                                      const std::vector<DesignatedFailures>& failures) {
  std::vector<Fixture> out;
  for (const auto& d : failures) {
    std::size_t picked = 0;
    for (const auto& c : cases) {
      if (picked == d.count) break;
      if (c.difficulty != d.level) continue;
      Fixture f;
      f.equals = c.query_text;
      f.tag = bench_sample_tag(d.k_shot, c.id) + "#";
      f.response = "I am not able to express this question as a plan.";
      f.repeat = true;
      out.push_back(std::move(f));
      ++picked;
    }
    if (picked < d.count) {
      throw BenchError("only " + std::to_string(picked) + " level-" + std::to_string(d.level) +
                       " cases available for " + std::to_string(d.count) + " designated failures");
    }
  }
  auto rest = oracle_fixtures(cases);
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

std::vector<DesignatedFailures> reference_table_failures() {
  return {
      {0, 1, 13}, {0, 2, 13}, {0, 3, 9}, {0, 4, 4},  //
      {1, 1, 1},  {1, 2, 4},  {1, 3, 7}, {1, 4, 4},  //
      {2, 1, 0},  {2, 2, 1},  {2, 3, 5}, {2, 4, 3},  //
      {3, 1, 0},  {3, 2, 0},  {3, 3, 3}, {3, 4, 2},
  };
}

}  // namespace releasegate
