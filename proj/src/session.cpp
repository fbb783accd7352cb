#include "tsexplain/session.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "json_codec.hpp"
#include "text_io.hpp"
#include "tsexplain/error.hpp"
#include "tsexplain/seed.hpp"

namespace tsexplain::session {
namespace fs = std::filesystem;
using detail::json;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kConfig = "config.json";

std::string_view delimiter_name(Delimiter d) {
  switch (d) {
    case Delimiter::kTab: return "tab";
    case Delimiter::kComma: return "comma";
    case Delimiter::kAuto: return "auto";
  }
  return "auto";
}

template <typename Fn>
auto as_config_error(const std::string& what, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, what + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kFileNotFound) throw;
    throw Error(ErrorCode::kInvalidConfig, what + ": " + e.what());
  }
}

bool valid_id(const std::string& id) {
  if (id.size() < 2 || id.size() > 40 || id[0] != 's') return false;
  return std::all_of(id.begin() + 1, id.end(), [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

State parse_state(const std::string& name) {
  for (State s : {State::kPending, State::kRunning, State::kDone, State::kFailed}) {
    if (state_name(s) == name) return s;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown session state '" + name + "'");
}

Stage parse_stage(const std::string& name) {
  for (Stage s : {Stage::kLoad, Stage::kPredict, Stage::kAttributions, Stage::kEvaluation, Stage::kTransforms,
                  Stage::kProjections}) {
    if (stage_name(s) == name) return s;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown stage '" + name + "'");
}

SessionStatus status_from_json(const std::string& text) {
  return as_config_error("manifest", [&] {
    const auto doc = json::parse(text);
    SessionStatus s;
    s.id = doc.at("id").get<std::string>();
    s.state = parse_state(doc.at("status").get<std::string>());
    if (!doc.at("stage").is_null()) s.stage = parse_stage(doc["stage"].get<std::string>());
    if (!doc.at("error").is_null()) {
      s.error_code = doc["error"].at("code").get<std::string>();
      s.error_message = doc["error"].at("message").get<std::string>();
    }
    s.partial = doc.at("partial").get<bool>();
    s.artifacts = doc.at("artifacts").get<std::vector<std::string>>();
    s.created = doc.at("created").get<std::uint64_t>();
    return s;
  });
}

TimeSeriesDataset load_dataset(const SessionConfig& config) {
  auto ds = load_ucr(config.dataset.train, config.dataset.test, config.dataset.delimiter);
  if (config.dataset.test_fraction) ds = resplit(ds, *config.dataset.test_fraction, config.seed);
  if (config.dataset.z_normalize) ds = z_normalize(ds);
  return ds;
}

std::vector<std::size_t> eval_samples(const TimeSeriesDataset& ds, const std::vector<std::size_t>& analysis) {
  std::vector<std::size_t> out;
  for (auto i : analysis) {
    if (ds.split(i) == Split::kTest) out.push_back(i);
  }
  return out.empty() ? analysis : out;
}

std::string predictions_json(const TimeSeriesDataset& ds, const std::vector<int>& preds,
                             const std::vector<std::size_t>& analysis) {
  json doc;
  json samples = json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto cell = confusion_assign(ds.label(i), preds[i], ds.class_count());
    samples.push_back({{"index", i},
                       {"split", std::string(split_name(ds.split(i)))},
                       {"label", ds.label(i)},
                       {"pred", preds[i]},
                       {"category", std::string(confusion_category_name(cell.category))}});
  }
  doc["samples"] = std::move(samples);
  doc["analysis"] = analysis;
  return doc.dump();
}

}  // namespace

std::string_view state_name(State state) {
  switch (state) {
    case State::kPending: return "pending";
    case State::kRunning: return "running";
    case State::kDone: return "done";
    case State::kFailed: return "failed";
  }
  return "pending";
}

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::kLoad: return "load";
    case Stage::kPredict: return "predict";
    case Stage::kAttributions: return "attributions";
    case Stage::kEvaluation: return "evaluation";
    case Stage::kTransforms: return "transforms";
    case Stage::kProjections: return "projections";
  }
  return "load";
}

void SessionConfig::validate() const {
  if (methods.empty()) throw Error(ErrorCode::kInvalidConfig, "at least one attribution method is required");
  if (std::set(methods.begin(), methods.end()).size() != methods.size()) {
    throw Error(ErrorCode::kInvalidConfig, "attribution methods repeat");
  }
  if (model_path.has_value() == train_request.has_value()) {
    throw Error(ErrorCode::kInvalidConfig, "give exactly one of a model path or a train request");
  }
  if (train_request) as_config_error("train request", [&] { train_request->train.validate(); });
  if (dataset.test_fraction && !(*dataset.test_fraction > 0.0 && *dataset.test_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "test_fraction must be in (0, 1)");
  }
  for (const auto& c : grid) c.validate();
  if (!(weights.predictions >= 0.0 && weights.labels >= 0.0) || !std::isfinite(weights.predictions) ||
      !std::isfinite(weights.labels)) {
    throw Error(ErrorCode::kInvalidConfig, "score weights must be finite and >= 0");
  }
  if (transform_params.sax_words < 1 || transform_params.sax_alphabet < 2) {
    throw Error(ErrorCode::kInvalidConfig, "sax needs words >= 1 and alphabet >= 2");
  }
  auto require = [](const fs::path& p, const char* what) {
    if (p.empty() || !fs::is_regular_file(p)) {
      throw Error(ErrorCode::kFileNotFound, std::string(what) + " not found: " + p.string());
    }
  };
  require(dataset.train, "dataset");
  if (dataset.test) require(*dataset.test, "test dataset");
  if (model_path) require(*model_path, "model");
}

SessionConfig config_from_json(std::string_view text, const fs::path& base) {
  return as_config_error("session config", [&] {
    const auto doc = json::parse(text);
    if (!doc.is_object()) throw Error(ErrorCode::kInvalidConfig, "session config must be an object");
    auto resolve = [&](const json& v) {
      fs::path p(v.get<std::string>());
      return p.is_relative() && !base.empty() ? base / p : p;
    };
    SessionConfig c;
    c.seed = doc.value("seed", c.seed);

    const auto& ds = doc.at("dataset");
    c.dataset.train = resolve(ds.at("train"));
    if (ds.contains("test") && !ds["test"].is_null()) c.dataset.test = resolve(ds["test"]);
    if (ds.contains("delimiter")) c.dataset.delimiter = parse_delimiter(ds["delimiter"].get<std::string>());
    c.dataset.z_normalize = ds.value("z_normalize", false);
    if (ds.contains("test_fraction") && !ds["test_fraction"].is_null()) {
      c.dataset.test_fraction = ds["test_fraction"].get<double>();
    }

    const auto& model = doc.at("model");
    if (model.contains("path")) c.model_path = resolve(model["path"]);
    if (model.contains("train")) {
      const auto& t = model["train"];
      TrainRequest req;
      if (t.contains("architecture")) {
        const auto& a = t["architecture"];
        req.architecture.filters = a.value("filters", req.architecture.filters);
        req.architecture.kernel = a.value("kernel", req.architecture.kernel);
        req.architecture.pool = a.value("pool", req.architecture.pool);
        req.architecture.dense = a.value("dense", req.architecture.dense);
        req.architecture.dropout = a.value("dropout", req.architecture.dropout);
      }
      req.train.epochs = t.value("epochs", req.train.epochs);
      req.train.batch_size = t.value("batch_size", req.train.batch_size);
      req.train.learning_rate = t.value("learning_rate", req.train.learning_rate);
      req.train.seed = t.value("seed", c.seed);
      c.train_request = req;
    }

    if (doc.contains("attributions")) {
      const auto& a = doc["attributions"];
      for (const auto& m : a.at("methods")) c.methods.push_back(attr::parse_method(m.get<std::string>()));
      c.attribution = detail::params_from_json(a.value("params", json()));
      if (!a.contains("params") || !a["params"].contains("seed")) c.attribution.seed = c.seed;
    }
    if (doc.contains("evaluation") && doc["evaluation"].contains("grid")) {
      for (const auto& g : doc["evaluation"]["grid"]) {
        auto cfg = eval::config_from_json(g.dump());
        if (!g.contains("seed")) cfg.seed = c.seed;
        c.grid.push_back(cfg);
      }
    }
    if (doc.contains("transforms")) {
      c.transforms.clear();
      for (const auto& k : doc["transforms"]) c.transforms.push_back(transforms::parse_kind(k.get<std::string>()));
    }
    if (doc.contains("sax")) {
      c.transform_params.sax_words = doc["sax"].value("words", c.transform_params.sax_words);
      c.transform_params.sax_alphabet = doc["sax"].value("alphabet", c.transform_params.sax_alphabet);
    }
    if (doc.contains("projections")) {
      c.techniques.clear();
      for (const auto& t : doc["projections"].at("techniques")) {
        c.techniques.push_back(proj::parse_technique(t.get<std::string>()));
      }
    }
    if (doc.contains("score_weights")) {
      c.weights.predictions = doc["score_weights"].value("predictions", c.weights.predictions);
      c.weights.labels = doc["score_weights"].value("labels", c.weights.labels);
    }
    c.train_cap = doc.value("train_cap", c.train_cap);
    return c;
  });
}

std::string to_json(const SessionConfig& c) {
  json doc;
  doc["seed"] = c.seed;
  json ds;
  ds["train"] = c.dataset.train.generic_string();
  ds["test"] = c.dataset.test ? json(c.dataset.test->generic_string()) : json();
  ds["delimiter"] = std::string(delimiter_name(c.dataset.delimiter));
  ds["z_normalize"] = c.dataset.z_normalize;
  ds["test_fraction"] = c.dataset.test_fraction ? json(*c.dataset.test_fraction) : json();
  doc["dataset"] = std::move(ds);
  json model = json::object();
  if (c.model_path) model["path"] = c.model_path->generic_string();
  if (c.train_request) {
    const auto& r = *c.train_request;
    model["train"] = {{"architecture",
                       {{"filters", r.architecture.filters},
                        {"kernel", r.architecture.kernel},
                        {"pool", r.architecture.pool},
                        {"dense", r.architecture.dense},
                        {"dropout", detail::float_value(r.architecture.dropout)}}},
                      {"epochs", r.train.epochs},
                      {"batch_size", r.train.batch_size},
                      {"learning_rate", r.train.learning_rate},
                      {"seed", r.train.seed}};
  }
  doc["model"] = std::move(model);
  json methods = json::array();
  for (auto m : c.methods) methods.push_back(std::string(attr::method_name(m)));
  doc["attributions"] = {{"methods", std::move(methods)}, {"params", detail::params_to_json(c.attribution)}};
  json grid = json::array();
  for (const auto& g : c.grid) grid.push_back(json::parse(eval::to_json(g)));
  doc["evaluation"] = {{"grid", std::move(grid)}};
  json kinds = json::array();
  for (auto k : c.transforms) kinds.push_back(std::string(transforms::kind_name(k)));
  doc["transforms"] = std::move(kinds);
  doc["sax"] = {{"words", c.transform_params.sax_words}, {"alphabet", c.transform_params.sax_alphabet}};
  json techniques = json::array();
  for (auto t : c.techniques) techniques.push_back(std::string(proj::technique_name(t)));
  doc["projections"] = {{"techniques", std::move(techniques)}};
  doc["score_weights"] = {{"predictions", c.weights.predictions}, {"labels", c.weights.labels}};
  doc["train_cap"] = c.train_cap;
  return doc.dump(2);
}

std::string to_json(const SessionStatus& s) {
  json doc;
  doc["id"] = s.id;
  doc["status"] = std::string(state_name(s.state));
  doc["stage"] = s.stage ? json(std::string(stage_name(*s.stage))) : json();
  doc["error"] = s.error_code.empty() ? json() : json{{"code", s.error_code}, {"message", s.error_message}};
  doc["partial"] = s.partial;
  doc["artifacts"] = s.artifacts;
  doc["created"] = s.created;
  return doc.dump();
}

std::vector<std::string> projection_sources(const SessionConfig& config) {
  std::vector<std::string> out{"raw"};
  for (auto k : config.transforms) out.emplace_back(transforms::kind_name(k));
  out.emplace_back("activations");
  for (auto m : config.methods) out.push_back("attr:" + std::string(attr::method_name(m)));
  return out;
}

Series source_vector(const SessionData& data, const std::string& source, std::span<const float> series,
                     std::optional<std::size_t> index) {
  if (source == "raw") return Series(series.begin(), series.end());
  if (source == "activations") return nn::activation_vector(data.net(), series);
  if (source.rfind("attr:", 0) == 0) {
    const auto method = attr::parse_method(source.substr(5));
    const auto& entry = data.attributions.at(method);
    if (index) {
      if (const Series* stored = entry.find(*index)) return *stored;
    }
    auto params = entry.params;
    if (index) params.seed = derive_seed(params.seed, *index);
    return attr::compute(method, data.net(), series, params).values;
  }
  return transforms::apply(transforms::parse_kind(source), series, data.config.transform_params);
}

std::vector<std::size_t> analysis_samples(const TimeSeriesDataset& dataset, std::size_t train_cap,
                                          std::uint64_t seed) {
  auto out = dataset.indices(Split::kTest);
  auto train = dataset.indices(Split::kTrain);
  if (train.size() > train_cap) {
    std::mt19937_64 rng(derive_seed(seed, 0x5e55));
    for (std::size_t i = 0; i < train_cap; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng() % (train.size() - i));
      std::swap(train[i], train[j]);
    }
    train.resize(train_cap);
  }
  out.insert(out.end(), train.begin(), train.end());
  std::sort(out.begin(), out.end());
  return out;
}

SessionStore::SessionStore(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

fs::path SessionStore::directory(const std::string& id) const {
  if (!valid_id(id) || !fs::is_directory(root_ / id) || !fs::is_regular_file(root_ / id / kManifest)) {
    throw Error(ErrorCode::kNotFound, "unknown session '" + id + "'");
  }
  return root_ / id;
}

SessionStatus SessionStore::read_status(const std::string& id) const {
  return status_from_json(detail::read_text_file(directory(id) / kManifest));
}

void SessionStore::write_status(const SessionStatus& status) const {
  detail::write_text_file(root_ / status.id / kManifest, to_json(status));
}

void SessionStore::record_artifact(SessionStatus& status, const std::string& name, const std::string& text) const {
  detail::write_text_file(root_ / status.id / name, text);
  std::lock_guard lock(mutex_);
  if (std::find(status.artifacts.begin(), status.artifacts.end(), name) == status.artifacts.end()) {
    status.artifacts.push_back(name);
  }
  write_status(status);
}

std::string SessionStore::create(const SessionConfig& config) {
  config.validate();
  std::lock_guard lock(mutex_);
  std::uint64_t created = 0;
  for (const auto& entry : fs::directory_iterator(root_)) {
    const auto name = entry.path().filename().string();
    if (!valid_id(name) || !fs::is_regular_file(entry.path() / kManifest)) continue;
    try {
      created = std::max(created, read_status(name).created);
    } catch (const Error&) {
    }
  }
  std::random_device device;
  std::string id;
  for (;;) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(device()) << 32) ^ device();
    char buf[20];
    std::snprintf(buf, sizeof buf, "s%016llx", static_cast<unsigned long long>(bits));
    id = buf;
    if (fs::create_directory(root_ / id)) break;
  }
  const fs::path dir = root_ / id;
  try {
    SessionConfig stored = config;
    fs::create_directories(dir / "input");
    fs::copy_file(config.dataset.train, dir / "input" / "train.txt");
    stored.dataset.train = "input/train.txt";
    if (config.dataset.test) {
      fs::copy_file(*config.dataset.test, dir / "input" / "test.txt");
      stored.dataset.test = "input/test.txt";
    }
    if (config.model_path) {
      fs::copy_file(*config.model_path, dir / "input" / "model.json");
      stored.model_path = "input/model.json";
    }
    detail::write_text_file(dir / kConfig, to_json(stored));
    SessionStatus status;
    status.id = id;
    status.created = created + 1;
    status.artifacts = {kConfig};
    write_status(status);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(dir, ec);
    throw;
  }
  return id;
}

SessionStatus SessionStore::status(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return read_status(id);
}

std::vector<SessionStatus> SessionStore::list() const {
  std::lock_guard lock(mutex_);
  std::vector<SessionStatus> out;
  for (const auto& entry : fs::directory_iterator(root_)) {
    const auto name = entry.path().filename().string();
    if (!valid_id(name) || !fs::is_regular_file(entry.path() / kManifest)) continue;
    out.push_back(read_status(name));
  }
  std::sort(out.begin(), out.end(), [](const SessionStatus& a, const SessionStatus& b) {
    return a.created != b.created ? a.created < b.created : a.id < b.id;
  });
  return out;
}

void SessionStore::remove(const std::string& id) {
  std::lock_guard lock(mutex_);
  const auto status = read_status(id);
  if (status.state == State::kRunning) throw Error(ErrorCode::kInvalidArgument, "session is running");
  fs::remove_all(root_ / id);
}

std::vector<std::string> SessionStore::recover() {
  std::vector<std::string> pending;
  for (auto status : list()) {
    if (status.state == State::kRunning) {
      status.state = State::kFailed;
      status.error_code = "Interrupted";
      status.error_message = "the process running this session stopped";
      status.partial = status.artifacts.size() > 1;
      std::lock_guard lock(mutex_);
      write_status(status);
    } else if (status.state == State::kPending) {
      pending.push_back(status.id);
    }
  }
  return pending;
}

void SessionStore::run(const std::string& id) {
  SessionStatus status;
  {
    std::lock_guard lock(mutex_);
    status = read_status(id);
    if (status.state != State::kPending) {
      throw Error(ErrorCode::kInvalidArgument, "session '" + id + "' is " + std::string(state_name(status.state)));
    }
    status.state = State::kRunning;
    status.stage = Stage::kLoad;
    write_status(status);
  }
  const fs::path dir = root_ / id;
  auto enter = [&](Stage stage) {
    std::lock_guard lock(mutex_);
    status.stage = stage;
    write_status(status);
  };
  try {
    const auto config = config_from_json(detail::read_text_file(dir / kConfig), dir);

    auto ds = load_dataset(config);
    std::optional<nn::Model> model;
    if (config.model_path) {
      model = nn::load_model(*config.model_path);
    } else {
      const auto& req = *config.train_request;
      const int length = static_cast<int>(ds.length());
      auto init = nn::Model::initialize(length, ds.class_count(),
                                        nn::conv_classifier_layers(length, ds.class_count(), req.architecture),
                                        req.train.seed);
      auto trained = nn::train(std::move(init), ds, req.train);
      json history = json::array();
      for (const auto& h : trained.history) {
        history.push_back({{"loss", h.loss}, {"train_accuracy", h.train_accuracy}, {"test_accuracy", h.test_accuracy}});
      }
      model = std::move(trained.model);
      record_artifact(status, "training.json", history.dump());
    }
    if (model->input_length() != static_cast<int>(ds.length()) || model->class_count() < ds.class_count()) {
      throw Error(ErrorCode::kShapeMismatch, "model shape does not fit the dataset");
    }
    record_artifact(status, "model.json", nn::to_manifest(*model));

    enter(Stage::kPredict);
    const auto preds = nn::predict_all(*model, ds.samples());
    const auto analysis = analysis_samples(ds, config.train_cap, config.seed);
    record_artifact(status, "predictions.json", predictions_json(ds, preds, analysis));

    enter(Stage::kAttributions);
    const auto matrix = attr::build_attribution_matrix(*model, ds, analysis, config.methods, config.attribution);
    record_artifact(status, "attributions.json", attr::to_json(matrix));

    enter(Stage::kEvaluation);
    const auto grid = config.grid.empty() ? eval::default_grid(config.seed) : config.grid;
    const auto samples = eval_samples(ds, analysis);
    const bool has_train = !ds.indices(Split::kTrain).empty();
    const auto stats = compute_stats(ds, has_train ? std::optional(Split::kTrain) : std::nullopt);
    std::vector<eval::EvalResult> results;
    for (auto m : matrix.methods()) {
      if (m == attr::Method::kRandom) continue;
      for (const auto& cfg : grid) results.push_back(eval::evaluate_method(*model, ds, samples, matrix.at(m), cfg, stats));
    }
    record_artifact(status, "evaluation.json", eval::to_json(std::span<const eval::EvalResult>(results)));
    record_artifact(status, "ranking.json", eval::to_json(eval::rank_methods(results)));

    enter(Stage::kTransforms);
    std::map<std::string, std::vector<Series>> rows;
    json transformed;
    transformed["samples"] = analysis;
    json kinds = json::object();
    for (auto k : config.transforms) {
      const std::string name(transforms::kind_name(k));
      json arr = json::array();
      for (auto i : analysis) {
        rows[name].push_back(transforms::apply(k, ds.sample(i), config.transform_params));
        arr.push_back(detail::float_array(rows[name].back()));
      }
      kinds[name] = std::move(arr);
    }
    transformed["values"] = std::move(kinds);
    record_artifact(status, "transforms.json", transformed.dump());

    enter(Stage::kProjections);
    std::vector<int> labels, predicted;
    for (auto i : analysis) {
      rows["raw"].push_back(ds.sample(i));
      rows["activations"].push_back(nn::activation_vector(*model, ds.sample(i)));
      labels.push_back(ds.label(i));
      predicted.push_back(preds[i]);
    }
    for (auto m : config.methods) {
      auto& dest = rows["attr:" + std::string(attr::method_name(m))];
      for (auto i : analysis) dest.push_back(*matrix.at(m).find(i));
    }
    std::vector<proj::ProjectionCell> cells;
    for (const auto& source : projection_sources(config)) {
      for (auto technique : config.techniques) {
        proj::ProjectionCell cell;
        cell.source = source;
        cell.projection = proj::fit(technique, rows.at(source), derive_seed(config.seed, cells.size()));
        cell.score = proj::cluster_score(cell.projection.coords, labels, predicted, config.weights);
        cells.push_back(std::move(cell));
      }
    }
    proj::set_visibility(cells);
    record_artifact(status, "projections.json", proj::state_to_json(cells));

    std::lock_guard lock(mutex_);
    status.state = State::kDone;
    status.stage.reset();
    write_status(status);
  } catch (const std::exception& e) {
    const auto* err = dynamic_cast<const Error*>(&e);
    std::lock_guard lock(mutex_);
    status.state = State::kFailed;
    status.error_code = err ? std::string(err->code_name()) : "Internal";
    status.error_message = e.what();
    status.partial = status.artifacts.size() > 1;
    write_status(status);
  }
}

SessionData SessionStore::load(const std::string& id) const {
  const auto st = status(id);
  if (st.state != State::kDone) {
    throw Error(ErrorCode::kNotDone, "session '" + id + "' is " + std::string(state_name(st.state)));
  }
  const fs::path dir = directory(id);
  SessionData data;
  data.id = id;
  data.config = config_from_json(detail::read_text_file(dir / kConfig), dir);
  data.dataset = load_dataset(data.config);
  data.model = nn::load_model(dir / "model.json");
  as_config_error("predictions", [&] {
    const auto doc = json::parse(detail::read_text_file(dir / "predictions.json"));
    for (const auto& s : doc.at("samples")) data.predictions.push_back(s.at("pred").get<int>());
    data.analysis = doc.at("analysis").get<std::vector<std::size_t>>();
    return 0;
  });
  data.attributions = attr::attribution_matrix_from_json(detail::read_text_file(dir / "attributions.json"));
  data.evaluation = eval::results_from_json(detail::read_text_file(dir / "evaluation.json"));
  data.ranking_json = detail::read_text_file(dir / "ranking.json");
  data.cells = proj::cells_from_state_json(detail::read_text_file(dir / "projections.json"));
  return data;
}

JobQueue::JobQueue(SessionStore& store, unsigned workers) : store_(store) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  for (unsigned i = 0; i < workers; ++i) threads_.emplace_back([this] { work(); });
}

JobQueue::~JobQueue() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  wake_.notify_all();
  for (auto& t : threads_) t.join();
}

void JobQueue::enqueue(std::string id) {
  {
    std::lock_guard lock(mutex_);
    queue_.push_back(std::move(id));
  }
  wake_.notify_one();
}

void JobQueue::wait_idle() {
  std::unique_lock lock(mutex_);
  idle_.wait(lock, [this] { return queue_.empty() && busy_ == 0; });
}

void JobQueue::work() {
  for (;;) {
    std::string id;
    {
      std::unique_lock lock(mutex_);
      wake_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      id = std::move(queue_.front());
      queue_.pop_front();
      ++busy_;
    }
    try {
      store_.run(id);
    } catch (const Error&) {
      // deleted or already run
    }
    {
      std::lock_guard lock(mutex_);
      --busy_;
    }
    idle_.notify_all();
  }
}

std::string ranking_table(const eval::Ranking& ranking) {
  auto fmt = [](double v) {
    if (std::isnan(v)) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  std::string out = "rank  method                 mean_drop  random_drop  beats_random";
  for (const auto& c : ranking.configs) out += "  " + c.label();
  out += "\n";
  for (std::size_t r = 0; r < ranking.entries.size(); ++r) {
    const auto& e = ranking.entries[r];
    char head[128];
    std::snprintf(head, sizeof head, "%-4zu  %-21s  %9s  %11s  %12s", r + 1,
                  std::string(attr::method_name(e.method)).c_str(), fmt(e.mean_drop).c_str(),
                  e.mean_random_drop ? fmt(*e.mean_random_drop).c_str() : "-", e.beats_random ? "yes" : "no");
    out += head;
    for (std::size_t k = 0; k < e.drops.size(); ++k) {
      const auto& label = ranking.configs[k].label();
      auto cell = fmt(e.drops[k]);
      out += "  " + std::string(label.size() > cell.size() ? label.size() - cell.size() : 0, ' ') + cell;
    }
    out += "\n";
  }
  return out;
}

}  // namespace tsexplain::session
