#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "tsexplain/attributions.hpp"
#include "tsexplain/data.hpp"
#include "tsexplain/evaluation.hpp"
#include "tsexplain/nn.hpp"
#include "tsexplain/projections.hpp"
#include "tsexplain/transforms.hpp"

namespace tsexplain::session {

struct DatasetSource {
  std::filesystem::path train;
  std::optional<std::filesystem::path> test;
  Delimiter delimiter = Delimiter::kAuto;
  bool z_normalize = false;
  std::optional<double> test_fraction;  // resplit after loading
};

struct TrainRequest {
  nn::ConvClassifierSpec architecture;
  nn::TrainConfig train;
};

struct SessionConfig {
  DatasetSource dataset;
  std::optional<std::filesystem::path> model_path;
  std::optional<TrainRequest> train_request;
  std::vector<attr::Method> methods;
  attr::AttributionParams attribution;
  std::vector<eval::PerturbationConfig> grid;  // empty: eval::default_grid(seed)
  std::vector<transforms::Kind> transforms = transforms::all_kinds();
  transforms::TransformParams transform_params;
  std::vector<proj::Technique> techniques = proj::all_techniques();
  proj::ScoreWeights weights;
  std::size_t train_cap = 2000;  // train samples added to the test split for analysis
  std::uint64_t seed = 0;

  /// InvalidConfig for bad values, FileNotFound for missing inputs.
  void validate() const;
};

/// Relative paths resolve against `base`. Throws InvalidConfig.
SessionConfig config_from_json(std::string_view text, const std::filesystem::path& base = {});
std::string to_json(const SessionConfig& config);

enum class State { kPending, kRunning, kDone, kFailed };
enum class Stage { kLoad, kPredict, kAttributions, kEvaluation, kTransforms, kProjections };

std::string_view state_name(State state);
std::string_view stage_name(Stage stage);

struct SessionStatus {
  std::string id;
  State state = State::kPending;
  std::optional<Stage> stage;  // current stage while running, failing stage when failed
  std::string error_code;
  std::string error_message;
  bool partial = false;  // failed with some artifacts written
  std::vector<std::string> artifacts;
  std::uint64_t created = 0;  // creation order within the store
};

std::string to_json(const SessionStatus& status);

/// Everything a finished session persisted, reloaded.
struct SessionData {
  std::string id;
  SessionConfig config;
  TimeSeriesDataset dataset;
  std::optional<nn::Model> model;
  std::vector<int> predictions;       // every sample
  std::vector<std::size_t> analysis;  // samples with attributions and projection coords
  attr::AttributionMatrix attributions;
  std::vector<eval::EvalResult> evaluation;
  std::string ranking_json;  // ranking artifact, verbatim
  std::vector<proj::ProjectionCell> cells;

  const nn::Model& net() const { return *model; }
};

/// "raw", a transform name, "activations" or "attr:<method>".
std::vector<std::string> projection_sources(const SessionConfig& config);

/// A series in the representation of `source`. Stored attributions are used
/// for analysis samples; anything else is attributed with the stored params.
Series source_vector(const SessionData& data, const std::string& source, std::span<const float> series,
                     std::optional<std::size_t> index = std::nullopt);

/// Test split plus up to `train_cap` train samples (seeded subsample), sorted.
std::vector<std::size_t> analysis_samples(const TimeSeriesDataset& dataset, std::size_t train_cap,
                                          std::uint64_t seed);

/// One directory per session under `root`, each with manifest.json and text
/// artifacts. Safe for concurrent use within one process.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  /// Validates, copies the inputs into the session directory, status pending.
  std::string create(const SessionConfig& config);

  SessionStatus status(const std::string& id) const;  // NotFound
  std::vector<SessionStatus> list() const;            // creation order
  void remove(const std::string& id);                 // NotFound; InvalidArgument while running

  /// Runs the automatic phase to done or failed. InvalidArgument unless pending.
  void run(const std::string& id);

  SessionData load(const std::string& id) const;  // NotFound, NotDone

  /// Marks sessions left running by a dead process as failed and returns the
  /// ids still pending.
  std::vector<std::string> recover();

  std::filesystem::path directory(const std::string& id) const;

 private:
  SessionStatus read_status(const std::string& id) const;
  void write_status(const SessionStatus& status) const;
  void record_artifact(SessionStatus& status, const std::string& name, const std::string& text) const;

  std::filesystem::path root_;
  mutable std::mutex mutex_;
};

/// Fixed pool of workers running queued sessions.
class JobQueue {
 public:
  explicit JobQueue(SessionStore& store, unsigned workers = 0);  // 0: hardware threads
  ~JobQueue();
  JobQueue(const JobQueue&) = delete;
  JobQueue& operator=(const JobQueue&) = delete;

  void enqueue(std::string id);
  void wait_idle();

 private:
  void work();

  SessionStore& store_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable idle_;
  std::deque<std::string> queue_;
  std::size_t busy_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> threads_;
};

/// Ranking as a plain-text table.
std::string ranking_table(const eval::Ranking& ranking);

struct ApiRequest {
  std::string method;  // GET, POST, DELETE
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string body;  // JSON
};

/// Transport-free HTTP API over a store. Finished sessions are cached after
/// first load; the cache only ever mirrors persisted artifacts.
class Api {
 public:
  Api(SessionStore& store, JobQueue* jobs);

  ApiResponse handle(const ApiRequest& request);

 private:
  std::shared_ptr<const SessionData> data(const std::string& id);

  SessionStore& store_;
  JobQueue* jobs_;
  std::mutex cache_mutex_;
  std::map<std::string, std::shared_ptr<const SessionData>> cache_;
};

/// Binds `api` to host:port over HTTP and blocks until stop() or failure.
/// port 0 picks a free port, reported through `on_bound` before serving.
class HttpServer {
 public:
  explicit HttpServer(Api& api);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  bool listen(const std::string& host, int port, const std::function<void(int)>& on_bound = {});
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tsexplain::session
