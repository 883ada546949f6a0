// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "releasegate/knowledge_base.hpp"
#include "releasegate/llm_gateway.hpp"
#include "releasegate/table.hpp"

namespace httplib {
class Server;
}

namespace releasegate {

// ---------------------------------------------------------------------------
// Configuration (shared by the service and the CLI)
// ---------------------------------------------------------------------------

struct AppConfig {
  /// Run logs, uploaded datasets and result files.
  std::filesystem::path data_dir = "releasegate-data";
  /// Knowledge bases referenced by name: <kb_dir>/<name>.json.
  std::filesystem::path kb_dir = "data/kb";
  /// Benchmark suites referenced by name: <suite_dir>/<name>.json.
  std::filesystem::path suite_dir = "data/bench";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t workers = 4;
  /// Result rows stored inline in a run record.
  std::size_t max_rows = 1000;
  int max_retries = 3;
  BackendConfig backend;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unknown keys are rejected. Throws ConfigError.
AppConfig app_config_from_json(const nlohmann::json& j);
nlohmann::json app_config_to_json(const AppConfig& config);

/// Applies RELEASEGATE_DATA_DIR, RELEASEGATE_KB_DIR, RELEASEGATE_SUITE_DIR, RELEASEGATE_HOST,
/// RELEASEGATE_PORT, RELEASEGATE_WORKERS, RELEASEGATE_MAX_ROWS, RELEASEGATE_BACKEND_KIND,
/// RELEASEGATE_BACKEND_ENDPOINT, RELEASEGATE_BACKEND_MODEL, RELEASEGATE_BACKEND_CREDENTIAL_ENV
/// and RELEASEGATE_BACKEND_FIXTURES. `getenv` is injectable for tests.
void apply_env_overrides(AppConfig& config,
                         const std::function<const char*(const char*)>& getenv = nullptr);

/// Defaults, then the file (when given), then the environment. Throws ConfigError.
AppConfig load_app_config(const std::optional<std::filesystem::path>& path);

// ---------------------------------------------------------------------------
// Append-only record log
// ---------------------------------------------------------------------------

/// Newline-delimited JSON records keyed by a string field. Records are only ever appended;
/// the current state of a key is its last record. Replay skips a torn final line.
class RecordLog {
 public:
  RecordLog(std::filesystem::path path, std::string key_field);

  /// Appends and flushes one record. Throws std::runtime_error on I/O failure.
  void append(const nlohmann::json& record);
  std::optional<nlohmann::json> latest(const std::string& key) const;
  /// Latest records, in order of each key's first appearance.
  std::vector<nlohmann::json> all() const;
  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }
  /// Lines ignored during replay because they did not parse.
  std::size_t skipped_lines() const { return skipped_; }

 private:
  std::filesystem::path path_;
  std::string key_field_;
  mutable std::mutex mu_;
  std::map<std::string, std::size_t> index_;
  std::vector<nlohmann::json> latest_;
  std::size_t skipped_ = 0;
};

// ---------------------------------------------------------------------------
// Service
// ---------------------------------------------------------------------------

/// {columns: [{name, type}], rows, row_count, truncated}; at most `max_rows` rows.
nlohmann::ordered_json result_table_json(const Table& table, std::size_t max_rows);

/// SHA-256 of `bytes`, lowercase hex.
std::string sha256_hex(std::string_view bytes);

/// The HTTP service. Endpoints:
///   GET  /v1/health
///   POST /v1/datasets?kb=<name>            body: CSV          -> 201 {dataset_id, ...}
///   GET  /v1/datasets
///   POST /v1/query                          {dataset_id, question, k_shot?, n_samples?, mode?}
///   GET  /v1/runs?dataset_id=&limit=&offset=
///   GET  /v1/runs/{id}
///   GET  /v1/runs/{id}/result.csv
///   POST /v1/bench/run                      {suite, k_list, mode?, n_samples?}
///   GET  /v1/bench/reports/{id}
class Service {
 public:
  /// Creates the data directory and replays the logs. `backend` overrides config.backend.
  /// Throws ConfigError or GatewayError on bad configuration.
  explicit Service(AppConfig config, std::shared_ptr<ChatBackend> backend = nullptr);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds config.host:config.port (port 0 picks a free port). Throws std::runtime_error
  /// when the address is unavailable.
  int bind();
  /// Serves until stop(). Requires bind().
  void listen();
  /// bind() + listen() on a background thread.
  int start();
  /// Stops accepting requests and waits for queued and running work.
  void stop();
  int port() const { return port_; }

  /// Waits until the run or report reaches a terminal status or `timeout_ms` elapses.
  /// Test helpers; the HTTP API is the public surface.
  std::optional<nlohmann::json> wait_for_run(const std::string& run_id, int timeout_ms) const;
  std::optional<nlohmann::json> wait_for_report(const std::string& report_id, int timeout_ms) const;

 private:
  struct Dataset;
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace releasegate
