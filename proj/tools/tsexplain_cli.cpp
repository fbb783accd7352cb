// Headless front end: run sessions, serve the HTTP API, print rankings,
// train models and request counterfactuals.

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tsexplain/error.hpp"
#include "tsexplain/session.hpp"

namespace {

using namespace tsexplain;

session::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

std::string default_store() {
  const char* env = std::getenv("TSEXPLAIN_STORE");
  return env && *env ? env : "sessions";
}

int run_session(const std::string& store_dir, const std::string& config_path) {
  std::ifstream in(config_path);
  if (!in) throw Error(ErrorCode::kFileNotFound, "cannot read " + config_path);
  std::stringstream text;
  text << in.rdbuf();
  const auto base = std::filesystem::absolute(config_path).parent_path();
  const auto config = session::config_from_json(text.str(), base);
  session::SessionStore store(store_dir);
  const auto id = store.create(config);
  std::cerr << "session " << id << " created\n";
  store.run(id);
  const auto status = store.status(id);
  std::cout << session::to_json(status) << "\n";
  return status.state == session::State::kDone ? 0 : 1;
}

int serve(const std::string& store_dir, const std::string& host, int port, unsigned workers) {
  if (const char* env = std::getenv("APP_PORT"); env && *env) port = std::stoi(env);
  session::SessionStore store(store_dir);
  session::JobQueue jobs(store, workers);
  for (const auto& id : store.recover()) jobs.enqueue(id);
  session::Api api(store, &jobs);
  session::HttpServer server(api);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const bool ok = server.listen(host, port, [&](int bound) {
    std::cerr << "listening on http://" << host << ":" << bound << " (store " << store_dir << ")\n";
  });
  g_server = nullptr;
  if (!ok) {
    std::cerr << "cannot listen on " << host << ":" << port << "\n";
    return 1;
  }
  return 0;
}

int rank(const std::string& store_dir, const std::string& id, bool as_json) {
  session::SessionStore store(store_dir);
  const auto data = store.load(id);
  if (as_json) {
    std::cout << data.ranking_json << "\n";
  } else {
    std::cout << session::ranking_table(eval::rank_methods(data.evaluation));
  }
  return 0;
}

struct TrainArgs {
  std::string dataset;
  std::optional<std::string> test;
  std::string out;
  std::string delimiter = "auto";
  std::string architecture = "a";
  double test_fraction = 0.0;
  bool z_normalize = false;
  nn::TrainConfig config;
};

int train(const TrainArgs& args) {
  const std::optional<std::filesystem::path> test =
      args.test ? std::optional<std::filesystem::path>(*args.test) : std::nullopt;
  auto ds = load_ucr(args.dataset, test, parse_delimiter(args.delimiter));
  if (args.test_fraction > 0.0) ds = resplit(ds, args.test_fraction, args.config.seed);
  if (args.z_normalize) ds = z_normalize(ds);
  const auto spec = args.architecture == "b" ? nn::model_b_spec() : nn::model_a_spec();
  const int length = static_cast<int>(ds.length());
  auto model = nn::Model::initialize(length, ds.class_count(),
                                     nn::conv_classifier_layers(length, ds.class_count(), spec), args.config.seed);
  auto result = nn::train(std::move(model), ds, args.config);
  nn::save_model(result.model, args.out);
  const auto& last = result.history.back();
  std::printf("epochs %zu  loss %.4f  train_acc %.4f", result.history.size(), last.loss, last.train_accuracy);
  if (last.test_accuracy >= 0.0) std::printf("  test_acc %.4f", last.test_accuracy);
  std::printf("\nmodel written to %s\n", args.out.c_str());
  return 0;
}

int counterfactual(const std::string& store_dir, const std::string& id, std::size_t index, const std::string& method) {
  session::SessionStore store(store_dir);
  session::Api api(store, nullptr);
  nlohmann::json body{{"idx", index}, {"method", method}};
  const auto response = api.handle({"POST", "/api/sessions/" + id + "/counterfactual", {}, body.dump()});
  std::cout << response.body << "\n";
  return response.status == 200 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-series classifier explanation toolkit"};
  app.require_subcommand(1);
  std::string store_dir = default_store();
  app.add_option("--store", store_dir, "Session store directory (env TSEXPLAIN_STORE)");

  auto* run_cmd = app.add_subcommand("run", "Run the automatic phase headless");
  std::string config_path;
  run_cmd->add_option("--config", config_path, "Session config JSON")->required()->check(CLI::ExistingFile);

  auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API");
  int port = 8080;
  std::string host = "0.0.0.0";
  unsigned workers = 0;
  serve_cmd->add_option("--port", port, "Port (env APP_PORT overrides)");
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--workers", workers, "Concurrent session jobs (0: hardware threads)");

  auto* rank_cmd = app.add_subcommand("rank", "Print a session's method ranking");
  std::string session_id;
  bool as_json = false;
  rank_cmd->add_option("--session", session_id, "Session id")->required();
  rank_cmd->add_flag("--json", as_json, "Print the ranking artifact instead of a table");

  auto* train_cmd = app.add_subcommand("train", "Train a conv classifier on a UCR file");
  TrainArgs targs;
  train_cmd->add_option("--dataset", targs.dataset, "Train split (UCR text)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--test", targs.test, "Test split (UCR text)")->check(CLI::ExistingFile);
  train_cmd->add_option("--out", targs.out, "Model manifest to write")->required();
  train_cmd->add_option("--delimiter", targs.delimiter, "auto, tab or comma");
  train_cmd->add_option("--arch", targs.architecture, "a: filters 3,6,9; b: 10,50,100,150")
      ->check(CLI::IsMember({"a", "b"}));
  train_cmd->add_option("--test-fraction", targs.test_fraction, "Resplit with this test share");
  train_cmd->add_flag("--z-normalize", targs.z_normalize, "Z-normalize every series");
  train_cmd->add_option("--epochs", targs.config.epochs, "Epochs");
  train_cmd->add_option("--batch-size", targs.config.batch_size, "Batch size");
  train_cmd->add_option("--lr", targs.config.learning_rate, "Adam learning rate");
  train_cmd->add_option("--seed", targs.config.seed, "Seed");

  auto* cf_cmd = app.add_subcommand("cf", "Counterfactual for one sample of a session");
  std::size_t cf_index = 0;
  std::string cf_method = "native";
  cf_cmd->add_option("--session", session_id, "Session id")->required();
  cf_cmd->add_option("--index", cf_index, "Sample index")->required();
  cf_cmd->add_option("--method", cf_method, "native or wachter")->check(CLI::IsMember({"native", "wachter"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return run_session(store_dir, config_path);
    if (*serve_cmd) return serve(store_dir, host, port, workers);
    if (*rank_cmd) return rank(store_dir, session_id, as_json);
    if (*train_cmd) return train(targs);
    if (*cf_cmd) return counterfactual(store_dir, session_id, cf_index, cf_method);
  } catch (const Error& e) {
    std::cerr << "error: " << e.code_name() << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
