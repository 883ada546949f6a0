// SPDX-License-Identifier: Apache-2.0
#include "releasegate/cli.hpp"

#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <pthread.h>

#include "releasegate/actor.hpp"
#include "releasegate/benchmark.hpp"
#include "releasegate/csv.hpp"
#include "releasegate/plan_wire.hpp"
#include "releasegate/planner.hpp"
#include "releasegate/service.hpp"
#include "releasegate/synthetic.hpp"

namespace releasegate {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

/// An error carrying its exit code.
struct CliFailure {
  int code;
  std::string kind;
  std::string message;
  json details = json::object();
};

std::string_view kind_for(int code) {
  switch (code) {
    case exit_usage: return "usage";
    case exit_io: return "io";
    case exit_validation: return "validation";
    case exit_planning: return "planning";
    case exit_realization: return "realization";
    case exit_gateway: return "gateway";
    case exit_bench_incomplete: return "bench_incomplete";
    default: return "error";
  }
}

[[noreturn]] void fail(int code, std::string message, json details = json::object()) {
  throw CliFailure{code, std::string(kind_for(code)), std::move(message), std::move(details)};
}

void require_file(const std::filesystem::path& path, const char* what) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) fail(exit_io, std::string(what) + " not found: " + path.string());
}

std::string read_file(const std::filesystem::path& path, const char* what) {
  require_file(path, what);
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (!in && !in.eof()) fail(exit_io, std::string("cannot read ") + what + ": " + path.string());
  return buf.str();
}

/// Writes to `out` for "-", otherwise to the file.
void emit(const std::string& target, const std::string& text, std::ostream& out) {
  if (target == "-") {
    out << text;
    return;
  }
  std::ofstream file(target, std::ios::binary);
  file << text;
  if (!file) fail(exit_io, "cannot write " + target);
}

KnowledgeBase read_kb(const std::filesystem::path& path) {
  require_file(path, "knowledge base");
  try {
    return load_kb(path);
  } catch (const KbError& e) {
    fail(exit_validation, std::string("knowledge base ") + path.string() + ": " + e.what());
  }
}

Table read_dataset(const std::filesystem::path& path, const Schema& schema) {
  require_file(path, "dataset");
  Table table = [&] {
    try {
      return load_csv_file(path, schema);
    } catch (const CsvError& e) {
      fail(e.kind() == CsvErrorKind::io ? exit_io : exit_validation, path.string() + ": " + e.what());
    }
  }();
  if (auto violations = validate(table); !violations.empty()) {
    json list = json::array();
    for (const auto& v : violations) list.push_back(format_violation(v));
    fail(exit_validation, path.string() + ": " + std::to_string(violations.size()) + " violation(s), first: " +
                              format_violation(violations.front()),
         json{{"violations", list}});
  }
  return table;
}

std::shared_ptr<ChatBackend> backend_from_choice(const std::string& choice, const AppConfig& config) {
  if (choice.rfind("scripted:", 0) == 0) {
    const std::filesystem::path path = choice.substr(9);
    require_file(path, "fixture file");
    try {
      return std::make_shared<ScriptedBackend>(load_fixtures(path));
    } catch (const GatewayError& e) {
      fail(exit_validation, path.string() + ": " + e.what());
    }
  }
  if (choice == "config") {
    try {
      return make_backend(config.backend);
    } catch (const GatewayError& e) {
      fail(exit_usage, e.what());
    }
  }
  fail(exit_usage, "unknown backend '" + choice + "'");
}

AppConfig app_config(const std::string& path) {
  try {
    return load_app_config(path.empty() ? std::nullopt : std::optional<std::filesystem::path>(path));
  } catch (const ConfigError& e) {
    fail(exit_usage, e.what());
  }
}

ActorMode mode_from(const std::string& text) {
  auto m = parse_actor_mode(text);
  if (!m) fail(exit_usage, "mode must be safe or natural_language, got '" + text + "'");
  return *m;
}

std::string fixed_ms(double ms) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(1);
  s << ms;
  return s.str();
}

/// One-line summary of a written file.
void report_written(const std::string& target, const std::string& text, const std::string& format,
                    std::ostream& out) {
  if (target == "-") return;
  if (format == "structured") {
    out << json{{"path", target}, {"bytes", text.size()}, {"sha256", sha256_hex(text)}}.dump() << '\n';
  } else {
    out << "wrote " << target << " (" << text.size() << " bytes)\n";
  }
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct CommonOptions {
  std::string format = "text";
  std::string config;
};

struct QueryOptions {
  std::string dataset;
  std::string kb;
  std::string question;
  std::size_t k = 3;
  std::size_t n = 3;
  std::string mode = "safe";
  int max_retries = 3;
  std::string backend = "config";
  std::size_t max_rows = 1000;
};

int cmd_query(const QueryOptions& o, const CommonOptions& c, std::ostream& out) {
  const auto config = app_config(c.config);
  const auto kb = read_kb(o.kb.empty() ? config.kb_dir / "releasegate_kb.json" : std::filesystem::path(o.kb));
  const auto table = read_dataset(o.dataset, kb.schema);
  if (o.question.find_first_not_of(" \t\r\n") == std::string::npos) fail(exit_usage, "question is empty");
  if (o.k > kb.examples.size()) {
    fail(exit_usage, "--k must be at most " + std::to_string(kb.examples.size()));
  }
  const auto mode = mode_from(o.mode);
  LlmGateway gateway(backend_from_choice(o.backend, config));

  PlannerConfig pc;
  pc.k_shot = o.k;
  pc.n_samples = o.n;
  pc.parallelism = o.n;
  pc.sample_tag = "cli";
  using Clock = std::chrono::steady_clock;
  auto ms_since = [](Clock::time_point t) { return std::chrono::duration<double, std::milli>(Clock::now() - t).count(); };
  const auto start = Clock::now();
  PlanDecision decision = [&] {
    try {
      return plan_query(o.question, kb, pc, gateway);
    } catch (const PlanningFailure& e) {
      json cands = json::array();
      for (const auto& cand : e.candidates()) cands.push_back(json::parse(candidate_to_json(cand).dump()));
      fail(exit_planning, e.what(), json{{"candidates", cands}});
    }
  }();
  const double planning_ms = ms_since(start);
  const auto exec_start = Clock::now();
  const RunResult result = [&] {
    try {
      return run(decision, std::nullopt, table, kb, &gateway, ReflectionConfig{o.max_retries, mode});
    } catch (const RealizationFailure& e) {
      fail(exit_realization, e.what(), json{{"memory", json::parse(memory_to_json(e.memory()).dump())}});
    }
  }();

  const double execution_ms = ms_since(exec_start);
  const double total_ms = ms_since(start);
  if (c.format == "structured") {
    ordered_json doc;
    doc["question"] = o.question;
    doc["config"] = {{"k_shot", o.k}, {"n_samples", o.n}, {"mode", std::string(to_string(mode))},
                     {"max_retries", o.max_retries}};
    doc["decision"] = decision_to_json(decision);
    doc["plan_executed"] = plan_to_json(result.plan_executed);
    doc["reflection_attempts"] = result.reflection_attempts_total;
    doc["memory"] = memory_to_json(result.memory);
    doc["result"] = result_table_json(result.final_table, o.max_rows);
    doc["timings"] = {{"planning_ms", planning_ms}, {"execution_ms", execution_ms}, {"total_ms", total_ms}};
    out << doc.dump(2) << '\n';
    return exit_ok;
  }
  out << "Plan (" << decision.chosen_votes << "/" << decision.n_samples << " votes, difficulty "
      << classify_difficulty(decision.chosen) << "):\n";
  const auto sentences = render_steps(decision.chosen);
  for (std::size_t i = 0; i < sentences.size(); ++i) out << "  " << i + 1 << ". " << sentences[i] << '\n';
  out << "Plan document:\n" << plan_to_wire(decision.chosen) << '\n';
  if (result.reflection_attempts_total > 0) out << "Reflection attempts: " << result.reflection_attempts_total << '\n';
  out << "Result (" << result.final_table.row_count() << " rows):\n";
  write_csv(result.final_table, out);
  out << "Timings: planning " << fixed_ms(planning_ms) << " ms, execution " << fixed_ms(execution_ms)
      << " ms, total " << fixed_ms(total_ms) << " ms\n";
  return exit_ok;
}

struct BenchData {
  std::string name;
  SyntheticDataset ds;
  std::vector<BenchmarkCase> cases;
};

BenchData load_bench(const std::filesystem::path& path) {
  const auto text = read_file(path, "suite");
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) fail(exit_validation, path.string() + ": not valid JSON");
  try {
    const auto gen = suite_dataset_config(doc);
    auto ds = generate(gen);
    auto suite = suite_from_json(doc, ds.table.schema());
    auto cases = generate_cases(suite.seeds, ds.table, suite.expected_band_totals);
    return BenchData{suite.name, std::move(ds), std::move(cases)};
  } catch (const BenchError& e) {
    fail(exit_validation, path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    fail(exit_validation, path.string() + ": " + e.what());
  }
}

std::vector<Fixture> profile_fixtures(const std::string& profile, const std::vector<BenchmarkCase>& cases) {
  if (profile == "oracle") return oracle_fixtures(cases);
  if (profile == "reference") return failing_fixtures(cases, reference_table_failures());
  fail(exit_usage, "unknown fixture profile '" + profile + "' (expected oracle or reference)");
}

struct BenchOptions {
  std::string suite;
  std::vector<std::size_t> k_list{0, 1, 2, 3};
  std::string mode = "safe";
  std::size_t n = 3;
  int max_retries = 3;
  std::size_t width = 1;
  std::string backend = "oracle";
  std::string out = "-";
  std::string json_out;
  std::string in;
  std::string profile = "oracle";
};

std::filesystem::path suite_path(const BenchOptions& o, const AppConfig& config) {
  return o.suite.empty() ? config.suite_dir / "suite.json" : std::filesystem::path(o.suite);
}

int cmd_bench_run(const BenchOptions& o, const CommonOptions& c, std::ostream& out) {
  const auto config = app_config(c.config);
  const auto data = load_bench(suite_path(o, config));
  std::shared_ptr<ChatBackend> backend;
  if (o.backend == "oracle" || o.backend == "reference") {
    backend = std::make_shared<ScriptedBackend>(profile_fixtures(o.backend, data.cases));
  } else {
    backend = backend_from_choice(o.backend, config);
  }
  LlmGateway gateway(backend);
  BenchConfig bc;
  bc.k_list = o.k_list;
  bc.mode = mode_from(o.mode);
  bc.n_samples = o.n;
  bc.max_retries = o.max_retries;
  bc.width = o.width;
  bc.suite_name = data.name;
  BenchReport report = [&] {
    try {
      return run_suite(data.cases, data.ds.table, data.ds.kb, bc, gateway);
    } catch (const std::invalid_argument& e) {
      fail(exit_usage, e.what());
    }
  }();
  const auto structured = report_to_json(report).dump(2) + "\n";
  const auto text = c.format == "structured" ? structured : format_report_text(report);
  emit(o.out, text, out);
  if (!o.json_out.empty()) emit(o.json_out, structured, out);
  if (o.out != "-") report_written(o.out, text, c.format, out);
  if (!o.json_out.empty() && o.json_out != "-") report_written(o.json_out, structured, c.format, out);
  return report.incomplete ? exit_bench_incomplete : exit_ok;
}

int cmd_bench_report(const BenchOptions& o, const CommonOptions& c, std::ostream& out) {
  const auto text = read_file(o.in, "report");
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) fail(exit_validation, o.in + ": not valid JSON");
  BenchReport report = [&] {
    try {
      return report_from_json(doc);
    } catch (const std::exception& e) {
      fail(exit_validation, o.in + ": " + e.what());
    }
  }();
  emit(o.out, c.format == "structured" ? report_to_json(report).dump(2) + "\n" : format_report_text(report), out);
  return report.incomplete ? exit_bench_incomplete : exit_ok;
}

int cmd_bench_fixtures(const BenchOptions& o, const CommonOptions& c, std::ostream& out) {
  const auto config = app_config(c.config);
  const auto data = load_bench(suite_path(o, config));
  const auto text = fixtures_to_json(profile_fixtures(o.profile, data.cases)).dump(2) + "\n";
  emit(o.out, text, out);
  report_written(o.out, text, c.format, out);
  return exit_ok;
}

struct DatasetOptions {
  GeneratorConfig gen;
  std::string dataset;
  std::string kb;
  std::string out = "-";
  std::string kb_out;
};

int cmd_dataset_generate(const DatasetOptions& o, const CommonOptions& c, std::ostream& out) {
  SyntheticDataset ds = [&] {
    try {
      return generate(o.gen);
    } catch (const std::invalid_argument& e) {
      fail(exit_usage, e.what());
    }
  }();
  const auto csv = to_csv(ds.table);
  emit(o.out, csv, out);
  report_written(o.out, csv, c.format, out);
  if (!o.kb_out.empty()) {
    const auto kb_text = kb_to_json(ds.kb).dump(2) + "\n";
    emit(o.kb_out, kb_text, out);
    report_written(o.kb_out, kb_text, c.format, out);
  }
  return exit_ok;
}

int cmd_dataset_validate(const DatasetOptions& o, const CommonOptions& c, std::ostream& out) {
  const auto config = app_config(c.config);
  const auto kb = read_kb(o.kb.empty() ? config.kb_dir / "releasegate_kb.json" : std::filesystem::path(o.kb));
  const auto table = read_dataset(o.dataset, kb.schema);
  if (c.format == "structured") {
    out << json{{"valid", true}, {"rows", table.row_count()}, {"columns", table.column_count()}}.dump() << '\n';
  } else {
    out << "ok: " << table.row_count() << " rows, " << table.column_count() << " columns\n";
  }
  return exit_ok;
}

int cmd_dataset_export(const DatasetOptions& o, const CommonOptions& c, std::ostream& out) {
  const auto config = app_config(c.config);
  const auto kb = read_kb(o.kb.empty() ? config.kb_dir / "releasegate_kb.json" : std::filesystem::path(o.kb));
  const auto csv = to_csv(read_dataset(o.dataset, kb.schema));
  emit(o.out, csv, out);
  report_written(o.out, csv, c.format, out);
  return exit_ok;
}

struct ServeOptions {
  std::optional<int> port;
  std::string data_dir;
};

int cmd_serve(const ServeOptions& o, const CommonOptions& c, std::ostream& out) {
  auto config = app_config(c.config);
  if (o.port) config.port = *o.port;
  if (!o.data_dir.empty()) config.data_dir = o.data_dir;
  if (config.port < 0 || config.port > 65535) fail(exit_usage, "port must be within 0..65535");

  // Block the stop signals so worker threads inherit the mask and this thread can wait for them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  sigset_t previous;
  pthread_sigmask(SIG_BLOCK, &signals, &previous);
  struct Restore {
    sigset_t mask;
    ~Restore() { pthread_sigmask(SIG_SETMASK, &mask, nullptr); }
  } restore{previous};

  std::unique_ptr<Service> service;
  try {
    std::filesystem::create_directories(config.data_dir);
    service = std::make_unique<Service>(config);
  } catch (const ConfigError& e) {
    fail(exit_usage, e.what());
  } catch (const GatewayError& e) {
    fail(exit_usage, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    fail(exit_io, e.what());
  }
  int port = 0;
  try {
    port = service->start();
  } catch (const std::runtime_error& e) {
    fail(exit_io, e.what());
  }
  const std::string url = "http://" + config.host + ":" + std::to_string(port);
  if (c.format == "structured") {
    out << json{{"event", "listening"}, {"url", url}, {"data_dir", config.data_dir.string()}}.dump() << std::endl;
  } else {
    out << "releasegate listening on " << url << std::endl;
  }
  int received = 0;
  sigwait(&signals, &received);
  service->stop();
  if (c.format == "structured") {
    out << json{{"event", "stopped"}, {"signal", received}}.dump() << std::endl;
  } else {
    out << "releasegate stopped" << std::endl;
  }
  return exit_ok;
}

void report_failure(const CliFailure& f, const CommonOptions& c, std::ostream& err) {
  if (c.format == "structured") {
    json e{{"kind", f.kind}, {"exit_code", f.code}, {"message", f.message}};
    for (const auto& [k, v] : f.details.items()) e[k] = v;
    err << json{{"error", e}}.dump() << '\n';
  } else {
    err << "error: " << f.message << '\n';
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Release-readiness analysis over test-result tables", "releasegate"};
  app.require_subcommand(1);
  app.fallthrough();
  CommonOptions common;
  app.add_option("--format", common.format, "Output format")
      ->check(CLI::IsMember({"text", "structured"}))
      ->capture_default_str();
  app.add_option("--config", common.config, "Configuration file (JSON)");

  ServeOptions serve_opts;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--port", serve_opts.port, "Listen port (0 picks a free port)");
  serve->add_option("--data-dir", serve_opts.data_dir, "Directory for logs, datasets and results");

  QueryOptions q;
  auto* query = app.add_subcommand("query", "Plan and execute one question");
  query->add_option("--dataset", q.dataset, "Dataset CSV")->required();
  query->add_option("--kb", q.kb, "Knowledge base JSON (default: <kb_dir>/releasegate_kb.json)");
  query->add_option("--question", q.question, "Question text")->required();
  query->add_option("--k", q.k, "Worked examples in the prompt")->capture_default_str();
  query->add_option("--n", q.n, "Planner samples")->check(CLI::Range(1, 32))->capture_default_str();
  query->add_option("--mode", q.mode, "safe or natural_language")->capture_default_str();
  query->add_option("--max-retries", q.max_retries, "Reflection retries per step")
      ->check(CLI::Range(0, 10))
      ->capture_default_str();
  query->add_option("--backend", q.backend, "config or scripted:<fixtures.json>")->capture_default_str();
  query->add_option("--max-rows", q.max_rows, "Rows shown in structured output")->capture_default_str();

  BenchOptions b;
  auto* bench = app.add_subcommand("bench", "Benchmark suite commands");
  bench->require_subcommand(1);
  auto* bench_run = bench->add_subcommand("run", "Run the suite and print the band table");
  bench_run->add_option("--suite", b.suite, "Suite file (default: <suite_dir>/suite.json)");
  bench_run->add_option("--k", b.k_list, "Worked-example counts")->delimiter(',')->capture_default_str();
  bench_run->add_option("--mode", b.mode, "safe or natural_language")->capture_default_str();
  bench_run->add_option("--n", b.n, "Planner samples")->check(CLI::Range(1, 32))->capture_default_str();
  bench_run->add_option("--max-retries", b.max_retries, "Reflection retries per step")
      ->check(CLI::Range(0, 10))
      ->capture_default_str();
  bench_run->add_option("--width", b.width, "Cases evaluated concurrently")
      ->check(CLI::Range(1, 64))
      ->capture_default_str();
  bench_run->add_option("--backend", b.backend, "oracle, reference, config or scripted:<fixtures.json>")
      ->capture_default_str();
  bench_run->add_option("--out", b.out, "Output file or - for stdout")->capture_default_str();
  bench_run->add_option("--json-out", b.json_out, "Also write the structured report here");
  auto* bench_report = bench->add_subcommand("report", "Render a saved structured report");
  bench_report->add_option("--in", b.in, "Structured report JSON")->required();
  bench_report->add_option("--out", b.out, "Output file or - for stdout")->capture_default_str();
  auto* bench_fixtures = bench->add_subcommand("fixtures", "Write scripted-backend fixtures for the suite");
  bench_fixtures->add_option("--suite", b.suite, "Suite file (default: <suite_dir>/suite.json)");
  bench_fixtures->add_option("--profile", b.profile, "oracle or reference")->capture_default_str();
  bench_fixtures->add_option("--out", b.out, "Output file or - for stdout")->capture_default_str();

  DatasetOptions d;
  auto* dataset = app.add_subcommand("dataset", "Synthetic dataset commands");
  dataset->require_subcommand(1);
  auto* ds_generate = dataset->add_subcommand("generate", "Write a synthetic dataset as CSV");
  ds_generate->add_option("--seed", d.gen.seed, "Generator seed")->capture_default_str();
  ds_generate->add_option("--rows", d.gen.n_rows, "Row count")->capture_default_str();
  ds_generate->add_option("--release-candidates", d.gen.n_release_candidates, "Release candidates")
      ->capture_default_str();
  ds_generate->add_option("--test-functions", d.gen.n_test_functions, "Test case functions")->capture_default_str();
  ds_generate->add_option("--out", d.out, "CSV output file or - for stdout")->capture_default_str();
  ds_generate->add_option("--kb-out", d.kb_out, "Also write the matching knowledge base");
  auto* ds_validate = dataset->add_subcommand("validate", "Check a CSV against a knowledge base");
  ds_validate->add_option("--dataset", d.dataset, "Dataset CSV")->required();
  ds_validate->add_option("--kb", d.kb, "Knowledge base JSON");
  auto* ds_export = dataset->add_subcommand("export", "Re-emit a validated CSV in canonical form");
  ds_export->add_option("--dataset", d.dataset, "Dataset CSV")->required();
  ds_export->add_option("--kb", d.kb, "Knowledge base JSON");
  ds_export->add_option("--out", d.out, "Output file or - for stdout")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\nRun with --help for usage.\n";
    return exit_usage;
  }

  try {
    if (*serve) return cmd_serve(serve_opts, common, out);
    if (*query) return cmd_query(q, common, out);
    if (*bench_run) return cmd_bench_run(b, common, out);
    if (*bench_report) return cmd_bench_report(b, common, out);
    if (*bench_fixtures) return cmd_bench_fixtures(b, common, out);
    if (*ds_generate) return cmd_dataset_generate(d, common, out);
    if (*ds_validate) return cmd_dataset_validate(d, common, out);
    if (*ds_export) return cmd_dataset_export(d, common, out);
    fail(exit_usage, "no command given");
  } catch (const CliFailure& f) {
    report_failure(f, common, err);
    return f.code;
  } catch (const GatewayError& e) {
    report_failure(CliFailure{exit_gateway, "gateway", e.what()}, common, err);
    return exit_gateway;
  } catch (const std::exception& e) {
    report_failure(CliFailure{exit_io, "io", e.what()}, common, err);
    return exit_io;
  }
}

}  // namespace releasegate
