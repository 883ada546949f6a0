// SPDX-License-Identifier: Apache-2.0
#include "releasegate/service.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <regex>
#include <sstream>

#include <boost/asio/post.hpp>
#include <boost/asio/thread_pool.hpp>
#include <httplib.h>
#include <openssl/evp.h>

#include "releasegate/actor.hpp"
#include "releasegate/benchmark.hpp"
#include "releasegate/csv.hpp"
#include "releasegate/plan_wire.hpp"
#include "releasegate/planner.hpp"
#include "releasegate/synthetic.hpp"

namespace releasegate {

using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

AppConfig app_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be an object");
  AppConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "data_dir") {
        c.data_dir = value.get<std::string>();
      } else if (key == "kb_dir") {
        c.kb_dir = value.get<std::string>();
      } else if (key == "suite_dir") {
        c.suite_dir = value.get<std::string>();
      } else if (key == "host") {
        c.host = value.get<std::string>();
      } else if (key == "port") {
        c.port = value.get<int>();
      } else if (key == "workers") {
        c.workers = value.get<std::size_t>();
      } else if (key == "max_rows") {
        c.max_rows = value.get<std::size_t>();
      } else if (key == "max_retries") {
        c.max_retries = value.get<int>();
      } else if (key == "backend") {
        c.backend = backend_config_from_json(value);
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  } catch (const GatewayError& e) {
    throw ConfigError(e.what());
  }
  if (c.port < 0 || c.port > 65535) throw ConfigError("port must be within 0..65535");
  if (c.workers < 1) throw ConfigError("workers must be at least 1");
  if (c.max_retries < 0) throw ConfigError("max_retries must be >= 0");
  return c;
}

json app_config_to_json(const AppConfig& c) {
  return json{{"data_dir", c.data_dir.string()},
              {"kb_dir", c.kb_dir.string()},
              {"suite_dir", c.suite_dir.string()},
              {"host", c.host},
              {"port", c.port},
              {"workers", c.workers},
              {"max_rows", c.max_rows},
              {"max_retries", c.max_retries},
              {"backend", backend_config_to_json(c.backend)}};
}

namespace {

template <class T>
T parse_number(const char* name, const char* text) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != std::string_view(text).size() || v < 0) throw std::invalid_argument(text);
    return static_cast<T>(v);
  } catch (const std::exception&) {
    throw ConfigError(std::string(name) + " must be a non-negative integer, got '" + text + "'");
  }
}

}  // namespace

void apply_env_overrides(AppConfig& c, const std::function<const char*(const char*)>& getenv_fn) {
  auto get = [&](const char* name) -> const char* {
    const char* v = getenv_fn ? getenv_fn(name) : std::getenv(name);
    return (v && *v) ? v : nullptr;
  };
  if (auto v = get("RELEASEGATE_DATA_DIR")) c.data_dir = v;
  if (auto v = get("RELEASEGATE_KB_DIR")) c.kb_dir = v;
  if (auto v = get("RELEASEGATE_SUITE_DIR")) c.suite_dir = v;
  if (auto v = get("RELEASEGATE_HOST")) c.host = v;
  if (auto v = get("RELEASEGATE_PORT")) {
    c.port = parse_number<int>("RELEASEGATE_PORT", v);
    if (c.port > 65535) throw ConfigError("RELEASEGATE_PORT must be within 0..65535");
  }
  if (auto v = get("RELEASEGATE_WORKERS")) {
    c.workers = parse_number<std::size_t>("RELEASEGATE_WORKERS", v);
    if (c.workers < 1) throw ConfigError("RELEASEGATE_WORKERS must be at least 1");
  }
  if (auto v = get("RELEASEGATE_MAX_ROWS")) c.max_rows = parse_number<std::size_t>("RELEASEGATE_MAX_ROWS", v);
  if (auto v = get("RELEASEGATE_BACKEND_KIND")) {
    const std::string kind = v;
    if (kind == "http") {
      c.backend.kind = BackendKind::http;
    } else if (kind == "scripted") {
      c.backend.kind = BackendKind::scripted;
    } else {
      throw ConfigError("RELEASEGATE_BACKEND_KIND must be http or scripted");
    }
  }
  if (auto v = get("RELEASEGATE_BACKEND_ENDPOINT")) c.backend.endpoint = v;
  if (auto v = get("RELEASEGATE_BACKEND_MODEL")) c.backend.model = v;
  if (auto v = get("RELEASEGATE_BACKEND_CREDENTIAL_ENV")) c.backend.credential_env = v;
  if (auto v = get("RELEASEGATE_BACKEND_FIXTURES")) c.backend.fixtures = v;
}

AppConfig load_app_config(const std::optional<std::filesystem::path>& path) {
  AppConfig c;
  if (path) {
    std::ifstream in(*path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path->string());
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError(path->string() + ": " + e.what());
    }
    c = app_config_from_json(doc);
  }
  apply_env_overrides(c);
  return c;
}

// ---------------------------------------------------------------------------
// Record log
// ---------------------------------------------------------------------------

RecordLog::RecordLog(std::filesystem::path path, std::string key_field)
    : path_(std::move(path)), key_field_(std::move(key_field)) {
  std::ifstream in(path_, std::ios::binary);
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object() || !rec.contains(key_field_) || !rec[key_field_].is_string()) {
      ++skipped_;
      continue;
    }
    const auto key = rec[key_field_].get<std::string>();
    auto [it, inserted] = index_.emplace(key, latest_.size());
    if (inserted) {
      latest_.push_back(std::move(rec));
    } else {
      latest_[it->second] = std::move(rec);
    }
  }
  // Terminate a torn final line so the next append starts a fresh record.
  in.clear();
  in.seekg(0, std::ios::end);
  if (in.tellg() > 0) {
    in.seekg(-1, std::ios::end);
    if (in.get() != '\n') std::ofstream(path_, std::ios::binary | std::ios::app) << '\n';
  }
}

void RecordLog::append(const json& record) {
  const auto key = record.at(key_field_).get<std::string>();
  std::lock_guard lock(mu_);
  {
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    out << record.dump() << '\n';
    out.flush();
    if (!out) throw std::runtime_error("cannot append to " + path_.string());
  }
  auto [it, inserted] = index_.emplace(key, latest_.size());
  if (inserted) {
    latest_.push_back(record);
  } else {
    latest_[it->second] = record;
  }
}

std::optional<json> RecordLog::latest(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return std::optional<json>(std::in_place, latest_[it->second]);
}

std::vector<json> RecordLog::all() const {
  std::lock_guard lock(mu_);
  return latest_;
}

std::size_t RecordLog::size() const {
  std::lock_guard lock(mu_);
  return latest_.size();
}

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

ordered_json result_table_json(const Table& t, std::size_t max_rows) {
  ordered_json j;
  ordered_json cols = ordered_json::array();
  for (const auto& f : t.schema().fields()) cols.push_back({{"name", f.name}, {"type", type_name(f.type)}});
  j["columns"] = std::move(cols);
  const std::size_t shown = std::min(t.row_count(), max_rows);
  ordered_json rows = ordered_json::array();
  for (std::size_t r = 0; r < shown; ++r) {
    ordered_json row = ordered_json::array();
    for (std::size_t c = 0; c < t.column_count(); ++c) row.push_back(ordered_json(value_to_json(t.at(r, c))));
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  j["row_count"] = t.row_count();
  j["truncated"] = t.row_count() > shown;
  return j;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string now_text() {
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
  return format_timestamp(Timestamp{secs});
}

bool terminal(const json& record) {
  const auto status = record.value("status", std::string{});
  return status == "done" || status == "failed";
}

std::string_view csv_kind_name(CsvErrorKind k) {
  switch (k) {
    case CsvErrorKind::malformed: return "malformed";
    case CsvErrorKind::header_mismatch: return "header_mismatch";
    case CsvErrorKind::field_count: return "field_count";
    case CsvErrorKind::unparseable_cell: return "unparseable_cell";
    case CsvErrorKind::state_violation: return "state_violation";
    case CsvErrorKind::io: return "io";
  }
  return "?";
}

bool safe_name(const std::string& name) {
  static const std::regex ok(R"(^[A-Za-z0-9_][A-Za-z0-9_.-]*$)");
  return std::regex_match(name, ok) && name.find("..") == std::string::npos;
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message, json extra = json::object()) {
  extra["error"] = message;
  send_json(res, status, extra);
}

/// Thrown by request handlers to produce an error response.
struct HttpFailure {
  int status;
  std::string message;
  json extra = json::object();
};

}  // namespace

// ---------------------------------------------------------------------------
// Service
// ---------------------------------------------------------------------------

struct Service::Dataset {
  std::string id;
  std::string kb_ref;
  std::shared_ptr<const KnowledgeBase> kb;
  Table table;
};

struct Service::Impl {
  AppConfig config;
  std::shared_ptr<ChatBackend> backend;
  std::unique_ptr<LlmGateway> gateway;
  httplib::Server server;
  std::unique_ptr<boost::asio::thread_pool> pool;
  RecordLog datasets_log;
  RecordLog runs_log;
  RecordLog reports_log;
  std::thread listener;
  std::atomic<bool> stopped{false};

  mutable std::shared_mutex ds_mu;
  std::map<std::string, std::shared_ptr<const Dataset>> datasets;

  std::mutex kb_mu;
  std::map<std::string, std::shared_ptr<const KnowledgeBase>> kbs;

  struct BenchData {
    SyntheticDataset ds;
    std::vector<BenchmarkCase> cases;
    std::string name;
  };
  std::mutex bench_mu;
  std::map<std::string, std::shared_ptr<const BenchData>> bench_cache;

  std::mutex id_mu;
  std::mt19937_64 id_rng{std::random_device{}()};

  explicit Impl(AppConfig c)
      : config(std::move(c)),
        datasets_log((std::filesystem::create_directories(config.data_dir), config.data_dir / "datasets.ndjson"),
                     "dataset_id"),
        runs_log(config.data_dir / "runs.ndjson", "run_id"),
        reports_log(config.data_dir / "reports.ndjson", "report_id") {}

  std::string new_id(const char* prefix) {
    std::lock_guard lock(id_mu);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(id_rng()));
    return std::string(prefix) + buf;
  }

  // -- knowledge bases and datasets ---------------------------------------

  std::shared_ptr<const KnowledgeBase> kb_for(const std::string& ref) {
    if (!safe_name(ref)) throw HttpFailure{400, "invalid knowledge-base reference '" + ref + "'"};
    std::lock_guard lock(kb_mu);
    auto it = kbs.find(ref);
    if (it != kbs.end()) return it->second;
    const auto path = config.kb_dir / (ref + ".json");
    if (!std::filesystem::exists(path)) throw HttpFailure{400, "unknown knowledge base '" + ref + "'"};
    try {
      auto kb = std::make_shared<const KnowledgeBase>(load_kb(path));
      kbs.emplace(ref, kb);
      return kb;
    } catch (const KbError& e) {
      throw HttpFailure{400, std::string("knowledge base '") + ref + "' is invalid: " + e.what()};
    }
  }

  std::shared_ptr<const Dataset> dataset(const std::string& id) const {
    std::shared_lock lock(ds_mu);
    auto it = datasets.find(id);
    return it == datasets.end() ? nullptr : it->second;
  }

  std::filesystem::path dataset_file(const std::string& id) const { return config.data_dir / "datasets" / (id + ".csv"); }
  std::filesystem::path result_file(const std::string& id) const { return config.data_dir / "results" / (id + ".csv"); }

  ordered_json dataset_json(const Dataset& d, const std::string& created_at) const {
    ordered_json j;
    j["dataset_id"] = d.id;
    j["kb"] = d.kb_ref;
    j["rows"] = d.table.row_count();
    j["columns"] = d.table.column_count();
    j["created_at"] = created_at;
    return j;
  }

  void replay() {
    for (const auto& rec : datasets_log.all()) {
      const auto id = rec.value("dataset_id", std::string{});
      const auto ref = rec.value("kb", std::string{});
      try {
        auto kb = kb_for(ref);
        auto table = load_csv_file(dataset_file(id), kb->schema);
        datasets[id] = std::make_shared<const Dataset>(Dataset{id, ref, kb, std::move(table)});
      } catch (const HttpFailure& f) {
        std::cerr << "releasegate: dataset " << id << " not restored: " << f.message << '\n';
      } catch (const std::exception& e) {
        std::cerr << "releasegate: dataset " << id << " not restored: " << e.what() << '\n';
      }
    }
    for (auto rec : runs_log.all()) {
      if (terminal(rec)) continue;
      rec["status"] = "failed";
      rec["failure"] = {{"reason", "interrupted"}, {"message", "the service stopped before the run finished"}};
      rec["updated_at"] = now_text();
      runs_log.append(rec);
    }
    for (auto rec : reports_log.all()) {
      if (terminal(rec)) continue;
      rec["status"] = "failed";
      rec["error"] = "the service stopped before the benchmark finished";
      rec["updated_at"] = now_text();
      reports_log.append(rec);
    }
  }

  // -- handlers -----------------------------------------------------------

  void post_dataset(const httplib::Request& req, httplib::Response& res) {
    const std::string ref = req.has_param("kb") ? req.get_param_value("kb") : "";
    if (ref.empty()) throw HttpFailure{400, "missing knowledge-base reference (?kb=<name>)"};
    auto kb = kb_for(ref);
    const std::string id = "ds-" + sha256_hex(ref + '\n' + req.body).substr(0, 32);
    if (auto existing = dataset(id)) {
      auto rec = datasets_log.latest(id);
      auto body = dataset_json(*existing, rec ? rec->value("created_at", std::string{}) : now_text());
      body["created"] = false;
      send_json(res, 201, body);
      return;
    }
    std::optional<Table> loaded;
    try {
      loaded.emplace(load_csv(req.body, kb->schema));
    } catch (const CsvError& e) {
      json report{{"kind", csv_kind_name(e.kind())}, {"message", e.what()}};
      if (e.row()) report["row"] = *e.row();
      if (!e.column().empty()) report["column"] = e.column();
      if (!e.raw().empty()) report["raw"] = e.raw();
      throw HttpFailure{400, std::string("CSV rejected: ") + e.what(), json{{"report", report}}};
    }
    Table table = std::move(*loaded);
    if (auto violations = validate(table); !violations.empty()) {
      json report = json::array();
      for (const auto& v : violations) {
        json item{{"field", v.field}, {"reason", v.reason}};
        if (v.row) item["row"] = *v.row;
        report.push_back(std::move(item));
      }
      throw HttpFailure{400, "table does not validate", json{{"report", report}}};
    }
    std::filesystem::create_directories(dataset_file(id).parent_path());
    {
      std::ofstream out(dataset_file(id), std::ios::binary);
      out << req.body;
      if (!out) throw HttpFailure{500, "cannot store dataset"};
    }
    auto ds = std::make_shared<const Dataset>(Dataset{id, ref, kb, std::move(table)});
    auto body = dataset_json(*ds, now_text());
    datasets_log.append(body);
    {
      std::unique_lock lock(ds_mu);
      datasets[id] = ds;
    }
    body["created"] = true;
    send_json(res, 201, body);
  }

  void list_datasets(httplib::Response& res) {
    json arr = json::array();
    for (const auto& rec : datasets_log.all()) {
      if (dataset(rec.value("dataset_id", std::string{}))) arr.push_back(rec);
    }
    send_json(res, 200, json{{"datasets", arr}});
  }

  static json parse_body(const httplib::Request& req) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) throw HttpFailure{400, "request body must be a JSON object"};
    return body;
  }

  template <class T>
  static T field(const json& body, const char* name, T fallback) {
    if (!body.contains(name) || body[name].is_null()) return fallback;
    try {
      return body[name].get<T>();
    } catch (const json::exception&) {
      throw HttpFailure{400, std::string("field '") + name + "' has the wrong type"};
    }
  }

  void post_query(const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    for (const auto& [key, _] : body.items()) {
      if (key != "dataset_id" && key != "question" && key != "k_shot" && key != "n_samples" && key != "mode" &&
          key != "max_retries") {
        throw HttpFailure{400, "unknown field '" + key + "'"};
      }
    }
    const auto dataset_id = field<std::string>(body, "dataset_id", "");
    const auto question = field<std::string>(body, "question", "");
    const auto k_shot = field<std::int64_t>(body, "k_shot", 3);
    const auto n_samples = field<std::int64_t>(body, "n_samples", 3);
    const auto mode_text = field<std::string>(body, "mode", "safe");
    const auto max_retries = field<std::int64_t>(body, "max_retries", config.max_retries);
    auto ds = dataset(dataset_id);
    if (!ds) throw HttpFailure{404, "unknown dataset '" + dataset_id + "'"};
    if (question.find_first_not_of(" \t\r\n") == std::string::npos) throw HttpFailure{422, "question is empty"};
    const auto mode = parse_actor_mode(mode_text);
    if (!mode) throw HttpFailure{422, "mode must be safe or natural_language"};
    if (k_shot < 0 || static_cast<std::size_t>(k_shot) > ds->kb->examples.size()) {
      throw HttpFailure{422, "k_shot must be within 0.." + std::to_string(ds->kb->examples.size())};
    }
    if (n_samples < 1 || n_samples > 32) throw HttpFailure{422, "n_samples must be within 1..32"};
    if (max_retries < 0 || max_retries > 10) throw HttpFailure{422, "max_retries must be within 0..10"};

    ordered_json rec;
    rec["run_id"] = new_id("run-");
    rec["dataset_id"] = dataset_id;
    rec["question"] = question;
    rec["config"] = {{"k_shot", k_shot},
                     {"n_samples", n_samples},
                     {"mode", std::string(to_string(*mode))},
                     {"max_retries", max_retries}};
    rec["status"] = "planning";
    rec["created_at"] = now_text();
    rec["updated_at"] = rec["created_at"];
    const json record = json::parse(rec.dump());
    runs_log.append(record);
    boost::asio::post(*pool, [this, record, ds] { process_run(record, ds); });
    send_json(res, 201, record);
  }

  void process_run(json rec, std::shared_ptr<const Dataset> ds) {
    const auto start = Clock::now();
    double planning_ms = 0, execution_ms = 0;
    auto finish = [&](const char* status) {
      rec["status"] = status;
      rec["timings"] = {{"planning_ms", planning_ms}, {"execution_ms", execution_ms}, {"total_ms", ms_since(start)}};
      rec["updated_at"] = now_text();
      runs_log.append(rec);
    };
    try {
      const auto& cfg = rec["config"];
      PlannerConfig pc;
      pc.k_shot = cfg["k_shot"].get<std::size_t>();
      pc.n_samples = cfg["n_samples"].get<std::size_t>();
      pc.parallelism = pc.n_samples;
      pc.sample_tag = "run/" + rec["run_id"].get<std::string>();
      const auto plan_start = Clock::now();
      PlanDecision decision;
      try {
        decision = plan_query(rec["question"].get<std::string>(), *ds->kb, pc, *gateway);
      } catch (const PlanningFailure& e) {
        planning_ms = ms_since(plan_start);
        json cands = json::array();
        for (const auto& c : e.candidates()) cands.push_back(json::parse(candidate_to_json(c).dump()));
        rec["failure"] = {{"reason", "planning_failure"}, {"message", e.what()}, {"candidates", cands}};
        finish("failed");
        return;
      }
      planning_ms = ms_since(plan_start);
      rec["decision"] = json::parse(decision_to_json(decision).dump());
      rec["status"] = "executing";
      rec["timings"] = {{"planning_ms", planning_ms}};
      rec["updated_at"] = now_text();
      runs_log.append(rec);

      const auto exec_start = Clock::now();
      ReflectionConfig rc{cfg["max_retries"].get<int>(), *parse_actor_mode(cfg["mode"].get<std::string>())};
      std::optional<RunResult> outcome;
      try {
        outcome.emplace(run(decision, std::nullopt, ds->table, *ds->kb, gateway.get(), rc));
      } catch (const RealizationFailure& e) {
        execution_ms = ms_since(exec_start);
        rec["memory"] = json::parse(memory_to_json(e.memory()).dump());
        rec["failure"] = {{"reason", "realization_failure"}, {"message", e.what()}, {"step_index", e.step_index()}};
        finish("failed");
        return;
      }
      const RunResult& result = *outcome;
      std::filesystem::create_directories(result_file(rec["run_id"]).parent_path());
      export_csv(result.final_table, result_file(rec["run_id"]));
      execution_ms = ms_since(exec_start);
      rec["memory"] = json::parse(memory_to_json(result.memory).dump());
      rec["reflection_attempts"] = result.reflection_attempts_total;
      rec["plan_executed"] = json::parse(plan_to_json(result.plan_executed).dump());
      json trace = json::array();
      for (const auto& s : result.trace.steps) {
        trace.push_back({{"kind", s.kind}, {"input_rows", s.input_rows}, {"output_rows", s.output_rows}, {"wall_ms", s.wall_ms}});
      }
      rec["trace"] = std::move(trace);
      rec["result"] = json::parse(result_table_json(result.final_table, config.max_rows).dump());
      finish("done");
    } catch (const GatewayError& e) {
      rec["failure"] = {{"reason", "gateway_error"}, {"kind", std::string(to_string(e.kind()))}, {"message", e.what()}};
      finish("failed");
    } catch (const std::exception& e) {
      rec["failure"] = {{"reason", "internal_error"}, {"message", e.what()}};
      finish("failed");
    }
  }

  void list_runs(const httplib::Request& req, httplib::Response& res) {
    auto number = [&](const char* name, std::size_t fallback) {
      if (!req.has_param(name)) return fallback;
      const auto text = req.get_param_value(name);
      try {
        std::size_t used = 0;
        const long long v = std::stoll(text, &used);
        if (used != text.size() || v < 0) throw std::invalid_argument(text);
        return static_cast<std::size_t>(v);
      } catch (const std::exception&) {
        throw HttpFailure{400, std::string(name) + " must be a non-negative integer"};
      }
    };
    const std::size_t limit = std::min<std::size_t>(number("limit", 50), 500);
    const std::size_t offset = number("offset", 0);
    const std::string filter = req.has_param("dataset_id") ? req.get_param_value("dataset_id") : "";
    auto all = runs_log.all();
    json runs = json::array();
    std::size_t matched = 0;
    for (auto it = all.rbegin(); it != all.rend(); ++it) {
      if (!filter.empty() && it->value("dataset_id", std::string{}) != filter) continue;
      if (matched >= offset && runs.size() < limit) runs.push_back(*it);
      ++matched;
    }
    send_json(res, 200, json{{"runs", runs}, {"total", matched}, {"limit", limit}, {"offset", offset}});
  }

  void get_run(const std::string& id, httplib::Response& res) {
    auto rec = runs_log.latest(id);
    if (!rec) throw HttpFailure{404, "unknown run '" + id + "'"};
    send_json(res, 200, *rec);
  }

  void get_result_csv(const std::string& id, httplib::Response& res) {
    auto rec = runs_log.latest(id);
    if (!rec) throw HttpFailure{404, "unknown run '" + id + "'"};
    if (rec->value("status", std::string{}) != "done") throw HttpFailure{404, "run '" + id + "' has no result"};
    std::ifstream in(result_file(id), std::ios::binary);
    if (!in) throw HttpFailure{404, "result of run '" + id + "' is not available"};
    std::ostringstream buf;
    buf << in.rdbuf();
    res.status = 200;
    res.set_content(buf.str(), "text/csv");
    res.set_header("Content-Disposition", "attachment; filename=\"" + id + ".csv\"");
  }

  // -- benchmark ----------------------------------------------------------

  std::shared_ptr<const BenchData> bench_data(const std::string& name) {
    std::lock_guard lock(bench_mu);
    auto it = bench_cache.find(name);
    if (it != bench_cache.end()) return it->second;
    const auto path = config.suite_dir / (name + ".json");
    std::ifstream in(path, std::ios::binary);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw BenchError("suite '" + name + "' is not valid JSON");
    const auto gen = suite_dataset_config(doc);
    auto ds = generate(gen);
    auto suite = suite_from_json(doc, ds.table.schema());
    auto cases = generate_cases(suite.seeds, ds.table, suite.expected_band_totals);
    auto data = std::make_shared<const BenchData>(BenchData{std::move(ds), std::move(cases), suite.name});
    bench_cache.emplace(name, data);
    return data;
  }

  void post_bench(const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    for (const auto& [key, _] : body.items()) {
      if (key != "suite" && key != "k_list" && key != "mode" && key != "n_samples") {
        throw HttpFailure{400, "unknown field '" + key + "'"};
      }
    }
    const auto suite = field<std::string>(body, "suite", "");
    const auto k_list = field<std::vector<std::int64_t>>(body, "k_list", {0, 1, 2, 3});
    const auto mode_text = field<std::string>(body, "mode", "safe");
    const auto n_samples = field<std::int64_t>(body, "n_samples", 3);
    if (suite.empty() || !safe_name(suite) || !std::filesystem::exists(config.suite_dir / (suite + ".json"))) {
      throw HttpFailure{404, "unknown suite '" + suite + "'"};
    }
    const auto mode = parse_actor_mode(mode_text);
    if (!mode) throw HttpFailure{422, "mode must be safe or natural_language"};
    if (k_list.empty()) throw HttpFailure{422, "k_list must not be empty"};
    for (auto k : k_list) {
      if (k < 0) throw HttpFailure{422, "k_list entries must be non-negative"};
    }
    if (n_samples < 1 || n_samples > 32) throw HttpFailure{422, "n_samples must be within 1..32"};

    ordered_json rec;
    rec["report_id"] = new_id("rep-");
    rec["suite"] = suite;
    rec["k_list"] = k_list;
    rec["mode"] = std::string(to_string(*mode));
    rec["n_samples"] = n_samples;
    rec["status"] = "running";
    rec["created_at"] = now_text();
    rec["updated_at"] = rec["created_at"];
    const json record = json::parse(rec.dump());
    reports_log.append(record);
    boost::asio::post(*pool, [this, record] { process_bench(record); });
    send_json(res, 201, record);
  }

  void process_bench(json rec) {
    try {
      auto data = bench_data(rec["suite"].get<std::string>());
      BenchConfig bc;
      for (const auto& k : rec["k_list"]) bc.k_list.push_back(k.get<std::size_t>());
      bc.mode = *parse_actor_mode(rec["mode"].get<std::string>());
      bc.n_samples = rec["n_samples"].get<std::size_t>();
      bc.max_retries = config.max_retries;
      bc.suite_name = data->name;
      auto report = run_suite(data->cases, data->ds.table, data->ds.kb, bc, *gateway);
      rec["report"] = json::parse(report_to_json(report).dump());
      rec["text"] = format_report_text(report);
      rec["status"] = "done";
    } catch (const std::exception& e) {
      rec["status"] = "failed";
      rec["error"] = e.what();
    }
    rec["updated_at"] = now_text();
    reports_log.append(rec);
  }

  void get_report(const std::string& id, httplib::Response& res) {
    auto rec = reports_log.latest(id);
    if (!rec) throw HttpFailure{404, "unknown report '" + id + "'"};
    send_json(res, 200, *rec);
  }

  // -- routing ------------------------------------------------------------

  template <class F>
  httplib::Server::Handler guarded(F f) {
    return [f = std::move(f)](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const HttpFailure& e) {
        send_error(res, e.status, e.message, e.extra);
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      }
    };
  }

  void routes() {
    server.set_payload_max_length(std::size_t{1} << 30);
    // SO_REUSEADDR only: an address already served by another process must fail to bind.
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    server.Get("/v1/health", guarded([this](const httplib::Request&, httplib::Response& res) {
                 send_json(res, 200,
                           json{{"status", "ok"},
                                {"backend", backend->id()},
                                {"datasets", datasets_log.size()},
                                {"runs", runs_log.size()},
                                {"reports", reports_log.size()},
                                {"workers", config.workers}});
               }));
    server.Post("/v1/datasets", guarded([this](const httplib::Request& q, httplib::Response& r) { post_dataset(q, r); }));
    server.Get("/v1/datasets", guarded([this](const httplib::Request&, httplib::Response& r) { list_datasets(r); }));
    server.Post("/v1/query", guarded([this](const httplib::Request& q, httplib::Response& r) { post_query(q, r); }));
    server.Get("/v1/runs", guarded([this](const httplib::Request& q, httplib::Response& r) { list_runs(q, r); }));
    server.Get(R"(/v1/runs/([A-Za-z0-9_-]+)/result\.csv)",
               guarded([this](const httplib::Request& q, httplib::Response& r) { get_result_csv(q.matches[1], r); }));
    server.Get(R"(/v1/runs/([A-Za-z0-9_-]+))",
               guarded([this](const httplib::Request& q, httplib::Response& r) { get_run(q.matches[1], r); }));
    server.Post("/v1/bench/run", guarded([this](const httplib::Request& q, httplib::Response& r) { post_bench(q, r); }));
    server.Get(R"(/v1/bench/reports/([A-Za-z0-9_-]+))",
               guarded([this](const httplib::Request& q, httplib::Response& r) { get_report(q.matches[1], r); }));
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) send_error(res, res.status, res.status == 404 ? "not found" : "request failed");
    });
  }
};

Service::Service(AppConfig config, std::shared_ptr<ChatBackend> backend) {
  if (config.workers < 1) throw ConfigError("workers must be at least 1");
  impl_ = std::make_unique<Impl>(std::move(config));
  if (!backend) backend = make_backend(impl_->config.backend);
  impl_->backend = backend;
  impl_->gateway = std::make_unique<LlmGateway>(backend);
  impl_->pool = std::make_unique<boost::asio::thread_pool>(impl_->config.workers);
  impl_->replay();
  impl_->routes();
}

Service::~Service() { stop(); }

int Service::bind() {
  const int port = impl_->config.port == 0 ? impl_->server.bind_to_any_port(impl_->config.host)
                                           : (impl_->server.bind_to_port(impl_->config.host, impl_->config.port)
                                                  ? impl_->config.port
                                                  : -1);
  if (port < 0) {
    throw std::runtime_error("cannot listen on " + impl_->config.host + ":" + std::to_string(impl_->config.port));
  }
  port_ = port;
  return port_;
}

void Service::listen() { impl_->server.listen_after_bind(); }

int Service::start() {
  bind();
  impl_->listener = std::thread([this] { listen(); });
  impl_->server.wait_until_ready();
  return port_;
}

void Service::stop() {
  if (!impl_ || impl_->stopped.exchange(true)) return;
  impl_->server.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
  impl_->pool->join();
}

namespace {

std::optional<json> wait_terminal(const RecordLog& log, const std::string& id, int timeout_ms) {
  const auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms);
  while (true) {
    auto rec = log.latest(id);
    if (rec && terminal(*rec)) return rec;
    if (Clock::now() >= deadline) return rec;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
}

}  // namespace

std::optional<json> Service::wait_for_run(const std::string& run_id, int timeout_ms) const {
  return wait_terminal(impl_->runs_log, run_id, timeout_ms);
}

std::optional<json> Service::wait_for_report(const std::string& report_id, int timeout_ms) const {
  return wait_terminal(impl_->reports_log, report_id, timeout_ms);
}

}  // namespace releasegate
