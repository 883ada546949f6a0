// SPDX-License-Identifier: Apache-2.0
#include "releasegate/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

namespace releasegate {

namespace {

const std::vector<std::string> kComponents = {"brake_control",      "steering_assist",  "powertrain",
                                              "infotainment",       "adas_perception",  "battery_management",
                                              "body_electronics",   "connectivity"};

const std::vector<std::string> kFunctions = {
    "emergency_braking",   "abs_modulation",      "brake_wear_estimation", "lane_keeping",
    "park_assist",         "steering_torque_limit", "torque_vectoring",    "gear_shift_logic",
    "launch_control",      "media_playback",      "navigation_routing",    "voice_command",
    "object_detection",    "traffic_sign_recognition", "adaptive_cruise",   "cell_balancing",
    "charge_scheduling",   "thermal_derating",    "door_lock_control",     "window_pinch_protection",
    "seat_memory",         "ota_update",          "remote_unlock",         "telematics_upload",
    "hill_hold",           "regenerative_braking", "blind_spot_warning",   "driver_monitoring",
    "climate_control",     "headlight_leveling"};

const std::vector<std::string> kStatuses = {"passed", "failed", "N/A", "blocked"};
const std::vector<std::string> kVehicles = {"Aurora", "Borealis", "Cirrus", "Delta", "Equinox", "Fjord"};
const std::vector<std::string> kLevels = {"unit", "component", "subsystem", "system", "vehicle"};
const std::vector<std::string> kTracks = {"hil_bench_1",          "hil_bench_2",          "sil_cluster",
                                          "proving_ground_north", "proving_ground_south", "public_road"};
const std::vector<std::string> kSuites = {"smoke",     "regression", "nightly",  "endurance", "safety",
                                          "interface", "diagnostic", "acceptance", "stress",  "homologation"};
const std::vector<std::string> kPriorities = {"P1", "P2", "P3", "P4"};
const std::vector<std::string> kSeverities = {"critical", "major", "minor", "trivial"};
const std::vector<std::string> kRevisions = {"A", "B", "C", "D"};
const std::vector<std::string> kEcus = {"ECU_BRK", "ECU_STR", "ECU_PT", "ECU_IVI", "ECU_ADAS", "ECU_BMS", "ECU_BCM", "ECU_TCU"};
const std::vector<std::string> kBranches = {"main", "release", "hotfix", "feature"};

// 2024-01-08T00:00:00Z
constexpr std::int64_t kEpochStart = 1704672000;
constexpr std::int64_t kDay = 86400;

std::vector<std::string> release_candidates(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= n; ++i) out.push_back("RC" + std::to_string(i));
  return out;
}

std::vector<std::string> test_functions(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(i < kFunctions.size() ? kFunctions[i] : "test_function_" + std::to_string(i + 1));
  }
  return out;
}

/// Seeded source with an explicit bounded mapping so results do not depend on the
/// standard library's distributions.
class Source {
 public:
  explicit Source(std::uint64_t seed) : engine_(seed) {}
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return unit() < p; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
  template <class T>
  const T& pick(const std::vector<T>& xs) {
    return xs[below(xs.size())];
  }

 private:
  std::mt19937_64 engine_;
};

double round_to(double x, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(x * scale) / scale;
}

std::string padded(const char* prefix, std::size_t value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, value);
  return buf;
}

struct FieldDoc {
  const char* name;
  ColumnType type;
  const char* note;
};

// The ten core fields first, then thirty further attributes.
const std::vector<FieldDoc> kFieldDocs = {
    {"record_id", ColumnType::integer, "Unique sequential id of the test execution record."},
    {"release_candidate", ColumnType::text,
     "Software build under gate evaluation, written RC1, RC2, ... in release order."},
    {"software_component", ColumnType::text, "Software component that owns the tested function."},
    {"test_case_function", ColumnType::text, "Vehicle function exercised by the test case."},
    {"test_case_id", ColumnType::text, "Identifier of the test case specification, e.g. TC-0412."},
    {"test_status", ColumnType::text,
     "Outcome of the execution. Not binary: 'N/A' means the test was not applicable to this build or "
     "vehicle, 'blocked' means it could not run because of an upstream problem."},
    {"vehicle_model", ColumnType::text, "Vehicle model (code name) the test ran for."},
    {"integration_level", ColumnType::text, "Integration stage at which the test was executed."},
    {"test_track", ColumnType::text, "Test environment: HIL bench, SIL cluster, proving ground or public road."},
    {"executed_at", ColumnType::timestamp, "UTC time the execution started."},
    {"duration_s", ColumnType::floating, "Execution time in seconds."},
    {"tester_id", ColumnType::text, "Pseudonymous id of the responsible tester, e.g. T007."},
    {"test_suite", ColumnType::text, "Suite the test case belongs to."},
    {"priority", ColumnType::text, "Test case priority, P1 highest."},
    {"severity", ColumnType::text, "Severity of the finding; empty (null) when the test did not fail or block."},
    {"defect_id", ColumnType::text, "Linked defect ticket for failed tests, e.g. DEF-01234; often null."},
    {"retry_count", ColumnType::integer, "Number of automatic re-runs before the recorded outcome."},
    {"is_automated", ColumnType::boolean, "True when the test ran without manual steps."},
    {"is_regression", ColumnType::boolean, "True when the test is part of the regression set."},
    {"requirement_id", ColumnType::text, "Requirement covered by the test case, e.g. REQ-0123."},
    {"firmware_version", ColumnType::text, "Firmware version flashed for the execution."},
    {"hardware_revision", ColumnType::text, "Hardware revision of the device under test."},
    {"ecu_name", ColumnType::text, "Electronic control unit hosting the function."},
    {"bus_load_pct", ColumnType::floating, "Peak CAN bus load during the test in percent."},
    {"cpu_load_pct", ColumnType::floating, "Peak ECU CPU load during the test in percent."},
    {"memory_peak_mb", ColumnType::floating, "Peak memory use of the ECU in megabytes."},
    {"ambient_temp_c", ColumnType::floating, "Ambient temperature in degrees Celsius."},
    {"vehicle_speed_kmh", ColumnType::floating,
     "Maximum vehicle speed during the test in km/h; null on benches and in simulation."},
    {"battery_voltage_v", ColumnType::floating, "Minimum supply voltage during the test in volts."},
    {"error_code", ColumnType::text, "Diagnostic trouble code reported by a failed test; null otherwise."},
    {"log_size_kb", ColumnType::integer, "Size of the execution log in kilobytes."},
    {"assertions_total", ColumnType::integer, "Number of assertions evaluated."},
    {"assertions_failed", ColumnType::integer, "Number of assertions that did not hold."},
    {"coverage_pct", ColumnType::floating, "Requirement coverage reached by the execution in percent."},
    {"scheduled_at", ColumnType::timestamp, "UTC time the execution was scheduled."},
    {"build_number", ColumnType::integer, "CI build number of the release candidate."},
    {"branch_name", ColumnType::text, "Source branch the build came from."},
    {"ticket_reference", ColumnType::text, "Change request that triggered the run; often null."},
    {"reviewed", ColumnType::boolean, "True when a test engineer reviewed the result."},
    {"last_updated", ColumnType::timestamp, "UTC time the record was last modified."},
};

std::optional<std::vector<std::string>> states_for(std::string_view name, const GeneratorConfig& c) {
  if (name == "release_candidate") return release_candidates(c.n_release_candidates);
  if (name == "software_component") return kComponents;
  if (name == "test_case_function") return test_functions(c.n_test_functions);
  if (name == "test_status") return kStatuses;
  if (name == "vehicle_model") return kVehicles;
  if (name == "integration_level") return kLevels;
  if (name == "test_track") return kTracks;
  if (name == "test_suite") return kSuites;
  if (name == "priority") return kPriorities;
  if (name == "severity") return kSeverities;
  if (name == "hardware_revision") return kRevisions;
  if (name == "ecu_name") return kEcus;
  if (name == "branch_name") return kBranches;
  return std::nullopt;
}

const char* kExamples = R"([
  {"query": "Show the test executions of release candidate RC3 whose status is N/A.",
   "reasoning": ["Only rows of release candidate RC3 with test_status 'N/A' are wanted; 'N/A' is a status value, not missing data.",
                 "Keep record_id, test_case_function and test_status so the user can identify each execution."],
   "plan": {"steps": [{"kind": "slice", "select": ["record_id", "test_case_function", "test_status"],
                       "where": {"and": [{"col": "release_candidate", "op": "eq", "value": "RC3"},
                                         {"col": "test_status", "op": "eq", "value": "N/A"}]}}]},
   "difficulty": 1},
  {"query": "List the five longest failed test executions on release candidate RC5.",
   "reasoning": ["Filter first: rows of RC5 whose test_status is 'failed', keeping test_case_id and duration_s.",
                 "Sort the remaining rows by duration_s, longest first.",
                 "Keep the first five rows."],
   "plan": {"steps": [{"kind": "slice", "select": ["test_case_id", "duration_s"],
                       "where": {"and": [{"col": "release_candidate", "op": "eq", "value": "RC5"},
                                         {"col": "test_status", "op": "eq", "value": "failed"}]}},
                      {"kind": "sort", "keys": [{"col": "duration_s", "order": "desc"}]},
                      {"kind": "limit", "n": 5}]},
   "difficulty": 2},
  {"query": "What is the average duration of passed tests per integration level for release candidate RC2?",
   "reasoning": ["Filter first: rows of RC2 with test_status 'passed'.",
                 "Group by integration_level and take the mean of duration_s; the result column is mean_duration_s."],
   "plan": {"steps": [{"kind": "slice", "select": ["integration_level", "duration_s"],
                       "where": {"and": [{"col": "release_candidate", "op": "eq", "value": "RC2"},
                                         {"col": "test_status", "op": "eq", "value": "passed"}]}},
                      {"kind": "aggregate", "func": "mean", "column": "duration_s", "group_by": ["integration_level"]}]},
   "difficulty": 3},
  {"query": "Which three software components have the most blocked tests in release candidate RC4?",
   "reasoning": ["Filter first: rows of RC4 with test_status 'blocked'; 'blocked' is different from 'failed'.",
                 "Count the rows per software_component; the result column is count.",
                 "Sort by count, highest first.",
                 "Keep the first three rows."],
   "plan": {"steps": [{"kind": "slice", "select": ["software_component"],
                       "where": {"and": [{"col": "release_candidate", "op": "eq", "value": "RC4"},
                                         {"col": "test_status", "op": "eq", "value": "blocked"}]}},
                      {"kind": "aggregate", "func": "count", "group_by": ["software_component"]},
                      {"kind": "sort", "keys": [{"col": "count", "order": "desc"}]},
                      {"kind": "limit", "n": 3}]},
   "difficulty": 4}
])";

}  // namespace

void check_generator_config(const GeneratorConfig& c) {
  if (c.n_rows == 0 || c.n_release_candidates == 0 || c.n_test_functions == 0) {
    throw std::invalid_argument("generator counts must be positive");
  }
}

Schema synthetic_schema(const GeneratorConfig& config) {
  check_generator_config(config);
  std::vector<FieldSpec> fields;
  for (const auto& d : kFieldDocs) {
    fields.push_back(FieldSpec{d.name, d.type, d.note, states_for(d.name, config)});
  }
  return Schema(std::move(fields));
}

KnowledgeBase synthetic_kb(const GeneratorConfig& config) {
  nlohmann::ordered_json doc;
  const Schema schema = synthetic_schema(config);
  doc["schema"] = schema_to_json(schema);
  nlohmann::ordered_json notes = nlohmann::ordered_json::object();
  for (const auto& f : schema.fields()) {
    nlohmann::ordered_json n;
    n["note"] = f.description;
    if (f.states) n["states"] = *f.states;
    notes[f.name] = std::move(n);
  }
  doc["field_notes"] = std::move(notes);
  doc["dataset_prose"] =
      "One row per execution of an automated or manual test case against a release candidate of the vehicle "
      "software. Release managers use the table to decide whether a release candidate may pass its quality gate. "
      "The data is synthetic and representative only.";
  doc["terminology"] = nlohmann::ordered_json::array(
      {{{"term", "release candidate"},
        {"definition", "A software build proposed for release; identified in release_candidate as RC<number>."}},
       {{"term", "gate"}, {"definition", "A release checkpoint whose criteria must hold before integration continues."}},
       {{"term", "failing test"}, {"definition", "An execution whose test_status is 'failed'."}},
       {{"term", "HIL"}, {"definition", "Hardware-in-the-loop bench; see test_track values hil_bench_1 and hil_bench_2."}},
       {{"term", "SIL"}, {"definition", "Software-in-the-loop simulation; test_track value sil_cluster."}}});
  doc["constraints"] = nlohmann::ordered_json::array(
      {{{"id", kNonBinaryStatesConstraint},
        {"text",
         "test_status is not binary. Besides 'passed' and 'failed' it takes the values 'N/A' and 'blocked'. 'N/A' is "
         "a real status (the test did not apply), not missing data; decide explicitly which of the four states a "
         "question refers to."}},
       {{"id", kFilterFirstConstraint},
        {"text",
         "Narrow the data first: put slicing steps that filter rows and select columns before any sort, aggregate, "
         "limit or distinct step."}},
       {{"id", "exact_names"},
        {"text", "Use column names and categorical values exactly as documented; text comparison is case-sensitive."}},
       {{"id", "ranking"},
        {"text",
         "For 'most' or 'top' questions, aggregate per group, sort the result column descending and limit the rows."}}});
  doc["examples"] = nlohmann::json::parse(kExamples);
  return kb_from_json(nlohmann::json::parse(doc.dump()));
}

SyntheticDataset generate(const GeneratorConfig& config) {
  KnowledgeBase kb = synthetic_kb(config);
  const auto rcs = release_candidates(config.n_release_candidates);
  const auto functions = test_functions(config.n_test_functions);
  const std::size_t n = config.n_rows;
  std::vector<Column> cols(kFieldDocs.size());
  for (auto& c : cols) c.reserve(n);
  Source rng(config.seed);

  for (std::size_t r = 0; r < n; ++r) {
    std::size_t c = 0;
    auto put = [&](Value v) { cols[c++].push_back(std::move(v)); };
    const std::size_t rc = rng.below(rcs.size());
    const std::size_t fn = rng.below(functions.size());
    // Failure propensity varies by function and build so rankings have clear leaders.
    const double p_fail = 0.04 + 0.03 * static_cast<double>((fn * 7 + rc * 3) % 11);
    const double u = rng.unit();
    const std::string& status = u < p_fail ? kStatuses[1]
                                : u < p_fail + 0.06 ? kStatuses[2]
                                : u < p_fail + 0.11 ? kStatuses[3]
                                                    : kStatuses[0];
    const bool failed = status == "failed";
    const bool blocked = status == "blocked";
    const std::string& track = rng.pick(kTracks);
    const std::int64_t executed = kEpochStart + static_cast<std::int64_t>(rc) * 14 * kDay +
                                  static_cast<std::int64_t>(rng.below(14 * kDay));
    const auto assertions_total = static_cast<std::int64_t>(1 + rng.below(200));

    put(static_cast<std::int64_t>(r + 1));                               // record_id
    put(rcs[rc]);                                                         // release_candidate
    put(kComponents[fn % kComponents.size()]);                           // software_component
    put(functions[fn]);                                                   // test_case_function
    put(padded("TC-", fn * 100 + rng.below(40), 4));                     // test_case_id
    put(status);                                                          // test_status
    put(rng.pick(kVehicles));                                             // vehicle_model
    put(rng.pick(kLevels));                                               // integration_level
    put(track);                                                           // test_track
    put(Timestamp{executed});                                             // executed_at
    put(round_to(5 + 900 * std::pow(rng.unit(), 3), 2));                 // duration_s
    put(padded("T", 1 + rng.below(40), 3));                              // tester_id
    put(rng.pick(kSuites));                                               // test_suite
    put(kPriorities[rng.chance(0.15) ? 0 : 1 + rng.below(3)]);          // priority
    put(failed || blocked ? Value{rng.pick(kSeverities)} : Value{});    // severity
    put(failed && rng.chance(0.6) ? Value{padded("DEF-", rng.below(100000), 5)} : Value{});  // defect_id
    put(static_cast<std::int64_t>(failed ? rng.below(4) : rng.below(2)));  // retry_count
    put(rng.chance(0.85));                                                // is_automated
    put(rng.chance(0.3));                                                 // is_regression
    put(padded("REQ-", fn * 10 + rng.below(10), 4));                     // requirement_id
    put("fw-2." + std::to_string(rc + 1) + "." + std::to_string(rng.below(3)));  // firmware_version
    put(rng.pick(kRevisions));                                            // hardware_revision
    put(kEcus[fn % kEcus.size()]);                                        // ecu_name
    put(round_to(rng.uniform(10, 90), 2));                                // bus_load_pct
    put(round_to(rng.uniform(5, 99), 2));                                 // cpu_load_pct
    put(round_to(rng.uniform(64, 2048), 1));                              // memory_peak_mb
    put(round_to(rng.uniform(-30, 50), 1));                               // ambient_temp_c
    const bool on_road = track.rfind("proving", 0) == 0 || track == "public_road";
    put(on_road ? Value{round_to(rng.uniform(0, 180), 1)} : Value{});    // vehicle_speed_kmh
    put(round_to(rng.uniform(10.5, 14.8), 2));                            // battery_voltage_v
    if (failed) {
      char code[16];
      std::snprintf(code, sizeof code, "E%04zX", rng.below(0x40) * 0x10 + fn % 0x10);
      put(std::string(code));                                             // error_code
    } else {
      put(Value{});
    }
    put(static_cast<std::int64_t>(1 + rng.below(50000)));                 // log_size_kb
    put(assertions_total);                                                // assertions_total
    put(failed ? static_cast<std::int64_t>(1 + rng.below(static_cast<std::size_t>(assertions_total)))
               : std::int64_t{0});                                        // assertions_failed
    put(round_to(rng.uniform(40, 100), 2));                               // coverage_pct
    put(Timestamp{executed - static_cast<std::int64_t>(rng.below(3 * kDay))});  // scheduled_at
    put(static_cast<std::int64_t>(1000 + rc * 50 + rng.below(50)));       // build_number
    put(rng.pick(kBranches));                                             // branch_name
    put(rng.chance(0.2) ? Value{padded("CR-", rng.below(10000), 4)} : Value{});  // ticket_reference
    put(rng.chance(0.5));                                                 // reviewed
    put(Timestamp{executed + static_cast<std::int64_t>(rng.below(7 * kDay))});  // last_updated
  }
  return SyntheticDataset{Table(kb.schema, std::move(cols)), std::move(kb)};
}

void register_synthetic_plugin(PluginRegistry& registry) {
  registry.register_plugin("synthetic", [](const LoadRequest& req) {
    GeneratorConfig config;
    auto number = [&](const char* key, std::uint64_t fallback) -> std::uint64_t {
      auto it = req.options.find(key);
      if (it == req.options.end()) return fallback;
      auto v = parse_int(it->second);
      if (!v || *v < 0) throw PluginError(std::string("synthetic loader: bad ") + key + " '" + it->second + "'");
      return static_cast<std::uint64_t>(*v);
    };
    config.seed = number("seed", config.seed);
    config.n_rows = number("rows", config.n_rows);
    config.n_release_candidates = number("release_candidates", config.n_release_candidates);
    config.n_test_functions = number("test_functions", config.n_test_functions);
    return generate(config).table;
  });
}

}  // namespace releasegate
