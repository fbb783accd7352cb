#include <charconv>

#include "json_codec.hpp"
#include "tsexplain/counterfactuals.hpp"
#include "tsexplain/error.hpp"
#include "tsexplain/seed.hpp"
#include "tsexplain/session.hpp"
#include "tsexplain/whatif.hpp"

namespace tsexplain::session {
namespace {

using detail::json;

constexpr int kMcPasses = 25;

// Raised for request problems that are not engine errors.
struct HttpError {
  int status;
  std::string code;
  std::string message;
};

ApiResponse reply(json body, int status = 200) { return {status, body.dump()}; }

ApiResponse error_reply(int status, std::string_view code, const std::string& message) {
  return reply({{"code", code}, {"message", message}}, status);
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kNotDone: return 409;
    default: return 422;
  }
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto end = path.find('/', start);
    const auto piece = path.substr(start, end == std::string::npos ? std::string::npos : end - start);
    if (!piece.empty()) parts.push_back(piece);
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return parts;
}

std::size_t parse_index(const std::string& text, const char* what) {
  std::size_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw HttpError{422, "InvalidArgument", std::string(what) + " must be a non-negative integer"};
  }
  return value;
}

json parse_body(const std::string& body) {
  try {
    auto doc = json::parse(body);
    if (!doc.is_object()) throw HttpError{422, "InvalidArgument", "request body must be a JSON object"};
    return doc;
  } catch (const json::exception& e) {
    throw HttpError{422, "InvalidArgument", std::string("malformed JSON: ") + e.what()};
  }
}

void check_sample(const SessionData& data, std::size_t index) {
  if (index >= data.dataset.size()) {
    throw HttpError{404, "IndexOutOfRange", "sample " + std::to_string(index) + " does not exist"};
  }
}

json uncertainty_json(const nn::Uncertainty& u) {
  return {{"mean", detail::float_array(u.mean)}, {"std", detail::float_array(u.std)}, {"passes", kMcPasses}};
}

json prediction_json(const SessionData& data, std::span<const float> series) {
  const auto trace = nn::forward(data.net(), series);
  return {{"class", trace.predicted_class()}, {"probabilities", detail::float_array(trace.probabilities)}};
}

json attributions_json(const SessionData& data, std::span<const float> series, std::optional<std::size_t> index) {
  json out = json::object();
  for (auto m : data.config.methods) {
    const std::string source = "attr:" + std::string(attr::method_name(m));
    out[std::string(attr::method_name(m))] = detail::float_array(source_vector(data, source, series, index));
  }
  return out;
}

// Out-of-sample coordinates of `series` in every visible cell.
json oos_json(const SessionData& data, std::span<const float> series, std::optional<std::size_t> index) {
  json out = json::array();
  std::map<std::string, Series> by_source;
  for (std::size_t c = 0; c < data.cells.size(); ++c) {
    const auto& cell = data.cells[c];
    if (!cell.visible) continue;
    auto it = by_source.find(cell.source);
    if (it == by_source.end()) it = by_source.emplace(cell.source, source_vector(data, cell.source, series, index)).first;
    const auto pt = proj::project_oos(cell.projection, it->second);
    out.push_back({{"cell", c},
                   {"source", cell.source},
                   {"technique", std::string(proj::technique_name(cell.projection.technique))},
                   {"coords", detail::float_array(pt)}});
  }
  return out;
}

}  // namespace

Api::Api(SessionStore& store, JobQueue* jobs) : store_(store), jobs_(jobs) {}

std::shared_ptr<const SessionData> Api::data(const std::string& id) {
  {
    std::lock_guard lock(cache_mutex_);
    if (auto it = cache_.find(id); it != cache_.end()) return it->second;
  }
  auto loaded = std::make_shared<const SessionData>(store_.load(id));
  std::lock_guard lock(cache_mutex_);
  return cache_.emplace(id, std::move(loaded)).first->second;
}

ApiResponse Api::handle(const ApiRequest& request) {
  try {
    const auto parts = split_path(request.path);
    const auto& m = request.method;
    if (parts.size() < 2 || parts[0] != "api" || parts[1] != "sessions") {
      throw HttpError{404, "NotFound", "no route for " + request.path};
    }

    if (parts.size() == 2) {
      if (m == "GET") {
        json arr = json::array();
        for (const auto& s : store_.list()) arr.push_back(json::parse(to_json(s)));
        return reply(arr);
      }
      if (m == "POST") {
        parse_body(request.body);
        const auto config = config_from_json(request.body, std::filesystem::current_path());
        const auto id = store_.create(config);
        if (jobs_) jobs_->enqueue(id);
        return reply({{"id", id}}, 201);
      }
      throw HttpError{405, "MethodNotAllowed", m + " " + request.path};
    }

    const std::string id = parts[2];
    if (parts.size() == 3) {
      if (m == "GET") return reply(json::parse(to_json(store_.status(id))));
      if (m == "DELETE") {
        const auto st = store_.status(id);
        if (st.state == State::kRunning) throw HttpError{409, "Running", "session is running"};
        store_.remove(id);
        std::lock_guard lock(cache_mutex_);
        cache_.erase(id);
        return reply({{"deleted", id}});
      }
      throw HttpError{405, "MethodNotAllowed", m + " " + request.path};
    }

    const std::string& what = parts[3];
    if (parts.size() == 4 && m == "GET" && what == "status") {
      return reply(json::parse(to_json(store_.status(id))));
    }
    if (parts.size() == 4 && m == "GET" && what == "ranking") {
      const auto d = data(id);
      return {200, d->ranking_json};
    }
    if (parts.size() == 4 && m == "GET" && what == "evaluation") {
      const auto d = data(id);
      return {200, eval::to_json(std::span<const eval::EvalResult>(d->evaluation))};
    }
    if (parts.size() == 4 && m == "GET" && what == "projections") {
      const auto d = data(id);
      json samples = json::array();
      for (auto i : d->analysis) {
        const auto cell = confusion_assign(d->dataset.label(i), d->predictions[i], d->dataset.class_count());
        samples.push_back({{"index", i},
                           {"split", std::string(split_name(d->dataset.split(i)))},
                           {"label", d->dataset.label(i)},
                           {"pred", d->predictions[i]},
                           {"category", std::string(confusion_category_name(cell.category))},
                           {"color", std::string(confusion_color(cell.category))}});
      }
      json cells = json::parse(proj::to_json(d->cells));
      for (std::size_t c = 0; c < cells.size(); ++c) cells[c]["cell"] = c;
      json techniques = json::array();
      for (auto t : d->config.techniques) techniques.push_back(std::string(proj::technique_name(t)));
      return reply({{"samples", std::move(samples)},
                    {"sources", projection_sources(d->config)},
                    {"techniques", std::move(techniques)},
                    {"cells", std::move(cells)}});
    }
    if (parts.size() == 5 && m == "GET" && what == "samples") {
      const auto d = data(id);
      const auto idx = parse_index(parts[4], "sample index");
      check_sample(*d, idx);
      const auto& x = d->dataset.sample(idx);
      const int pred = d->predictions[idx];
      const auto actmax = nn::activation_maximization(d->net(), pred, d->dataset);
      const auto u = nn::mc_dropout_predict(d->net(), x, kMcPasses, derive_seed(d->config.seed, idx));
      const bool analysed = std::binary_search(d->analysis.begin(), d->analysis.end(), idx);
      return reply({{"index", idx},
                    {"split", std::string(split_name(d->dataset.split(idx)))},
                    {"label", d->dataset.label(idx)},
                    {"series", detail::float_array(x)},
                    {"prediction", prediction_json(*d, x)},
                    {"in_analysis", analysed},
                    {"attributions", attributions_json(*d, x, idx)},
                    {"activation_max", {{"class", pred}, {"series", detail::float_array(actmax)}}},
                    {"uncertainty", uncertainty_json(u)}});
    }
    if (parts.size() == 4 && m == "GET" && what == "neighbors") {
      const auto d = data(id);
      auto get = [&](const std::string& key) -> std::optional<std::string> {
        auto it = request.query.find(key);
        return it == request.query.end() ? std::nullopt : std::optional(it->second);
      };
      const auto idx_text = get("idx");
      if (!idx_text) throw HttpError{422, "InvalidArgument", "idx is required"};
      const auto idx = parse_index(*idx_text, "idx");
      check_sample(*d, idx);
      const std::size_t k = get("k") ? parse_index(*get("k"), "k") : 5;
      std::string space_text = get("space").value_or("euclidean");
      std::optional<std::string> method_text = get("method");
      if (const auto colon = space_text.find(':'); colon != std::string::npos) {
        method_text = space_text.substr(colon + 1);
        space_text = space_text.substr(0, colon);
      }
      const auto space = whatif::parse_space(space_text);
      whatif::NeighborContext ctx;
      ctx.model = &d->net();
      ctx.matrix = &d->attributions;
      if (method_text) ctx.method = attr::parse_method(*method_text);
      const auto hits = whatif::nearest_neighbors(d->dataset, ctx, whatif::Query(idx), space, k);
      json arr = json::array();
      for (const auto& h : hits) {
        arr.push_back({{"index", h.index},
                       {"distance", h.distance},
                       {"label", d->dataset.label(h.index)},
                       {"pred", d->predictions[h.index]}});
      }
      return reply({{"query", idx}, {"space", space_text}, {"neighbors", std::move(arr)}});
    }
    if (parts.size() == 4 && m == "POST" && what == "whatif") {
      const auto d = data(id);
      const auto body = parse_body(request.body);
      if (!body.contains("base")) throw HttpError{422, "InvalidArgument", "base is required"};
      Series base;
      std::optional<std::size_t> base_index;
      if (body["base"].is_number_unsigned()) {
        base_index = body["base"].get<std::size_t>();
        check_sample(*d, *base_index);
        base = d->dataset.sample(*base_index);
      } else {
        base = detail::read_series(body["base"]);
        if (base.size() != d->dataset.length()) {
          throw Error(ErrorCode::kShapeMismatch, "base series must have " + std::to_string(d->dataset.length()) + " values");
        }
      }
      std::vector<whatif::EditOp> edits;
      if (body.contains("edits")) {
        if (!body["edits"].is_array()) throw HttpError{422, "InvalidArgument", "edits must be an array"};
        for (const auto& e : body["edits"]) edits.push_back(whatif::edit_from_json(e.dump()));
      }
      whatif::EditContext ctx;
      ctx.model = &d->net();
      ctx.dataset = &d->dataset;
      ctx.target_class = body.contains("class") ? std::optional(body["class"].get<int>())
                                                : std::optional(nn::predict(d->net(), base));
      const auto edited = whatif::apply_edits(base, edits, ctx);
      // An unedited dataset member keeps its stored attributions.
      const auto index = edits.empty() ? base_index : std::nullopt;
      const auto u = nn::mc_dropout_predict(d->net(), edited, kMcPasses,
                                            derive_seed(d->config.seed, base_index.value_or(d->dataset.size())));
      return reply({{"series", detail::float_array(edited)},
                    {"prediction", prediction_json(*d, edited)},
                    {"uncertainty", uncertainty_json(u)},
                    {"attributions", attributions_json(*d, edited, index)},
                    {"projections", oos_json(*d, edited, index)}});
    }
    if (parts.size() == 4 && m == "POST" && what == "counterfactual") {
      const auto d = data(id);
      const auto body = parse_body(request.body);
      if (!body.contains("idx") || !body["idx"].is_number_unsigned()) {
        throw HttpError{422, "InvalidArgument", "idx must be a non-negative integer"};
      }
      const auto idx = body["idx"].get<std::size_t>();
      check_sample(*d, idx);
      std::string method_text = body.value("method", std::string("native_guide"));
      if (method_text == "native") method_text = "native_guide";
      const auto method = cf::parse_method(method_text);
      const auto& x = d->dataset.sample(idx);
      const int pred = d->predictions[idx];
      cf::Counterfactual result;
      if (method == cf::Method::kNativeGuide) {
        const auto nun = cf::nearest_unlike_neighbor(d->net(), d->dataset, x, pred, d->predictions);
        // Attribution of the top-ranked method guides the window.
        const auto ranking = eval::rank_methods(d->evaluation);
        attr::Method guide = d->config.methods.front();
        if (!ranking.entries.empty()) guide = ranking.entries.front().method;
        const auto attribution = source_vector(*d, "attr:" + std::string(attr::method_name(guide)), x, idx);
        result = cf::native_guide(d->net(), x, attribution, d->dataset.sample(nun.index));
        result.nun_index = nun.index;
      } else {
        int target = body.contains("target") ? body["target"].get<int>() : -1;
        if (target < 0) {
          const auto probs = nn::forward(d->net(), x).probabilities;
          float best = -1.0f;
          for (int c = 0; c < static_cast<int>(probs.size()); ++c) {
            if (c != pred && probs[c] > best) {
              best = probs[c];
              target = c;
            }
          }
        }
        result = cf::wachter(d->net(), x, target);
      }
      result.origin_index = idx;
      auto doc = json::parse(cf::to_json(result));
      doc["projections"] = oos_json(*d, result.series, std::nullopt);
      return reply(doc);
    }
    throw HttpError{404, "NotFound", "no route for " + m + " " + request.path};
  } catch (const HttpError& e) {
    return error_reply(e.status, e.code, e.message);
  } catch (const Error& e) {
    return error_reply(status_for(e.code()), e.code_name(), e.what());
  } catch (const json::exception& e) {
    return error_reply(422, "InvalidArgument", e.what());
  } catch (const std::exception& e) {
    return error_reply(500, "Internal", e.what());
  }
}

}  // namespace tsexplain::session
