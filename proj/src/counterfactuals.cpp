#include "tsexplain/counterfactuals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json_codec.hpp"
#include "tsexplain/error.hpp"

namespace tsexplain::cf {
namespace {

void finish(Counterfactual& out, const nn::Model& model, std::span<const float> query) {
  out.predicted_class = nn::predict(model, out.series);
  out.l1 = 0.0;
  out.l2 = 0.0;
  for (std::size_t t = 0; t < query.size(); ++t) {
    const double d = static_cast<double>(out.series[t]) - query[t];
    out.l1 += std::abs(d);
    out.l2 += d * d;
  }
  out.l2 = std::sqrt(out.l2);
}

void check_length(const nn::Model& model, std::span<const float> x, const char* what) {
  if (static_cast<int>(x.size()) != model.input_length()) {
    throw Error(ErrorCode::kShapeMismatch, std::string(what) + " length does not match the model");
  }
}

int ceil_div(std::size_t a, std::size_t b) { return static_cast<int>((a + b - 1) / b); }

}  // namespace

std::string_view method_name(Method method) {
  return method == Method::kNativeGuide ? "native_guide" : "wachter";
}

Method parse_method(std::string_view name) {
  if (name == "native_guide" || name == "native") return Method::kNativeGuide;
  if (name == "wachter") return Method::kWachter;
  throw Error(ErrorCode::kInvalidConfig, "unknown counterfactual method '" + std::string(name) + "'");
}

Neighbor nearest_unlike_neighbor(const nn::Model& model, const TimeSeriesDataset& dataset,
                                 std::span<const float> query, int query_pred,
                                 std::span<const int> predictions) {
  if (query.size() != dataset.length()) throw Error(ErrorCode::kShapeMismatch, "query length != T");
  if (!predictions.empty() && predictions.size() != dataset.size()) {
    throw Error(ErrorCode::kShapeMismatch, "prediction cache does not cover the dataset");
  }
  auto candidates = dataset.indices(Split::kTrain);
  if (candidates.empty()) {
    candidates.resize(dataset.size());
    std::iota(candidates.begin(), candidates.end(), 0);
  }
  std::optional<Neighbor> best;
  for (std::size_t i : candidates) {
    const int pred = predictions.empty() ? nn::predict(model, dataset.sample(i)) : predictions[i];
    if (pred == query_pred) continue;
    const auto s = dataset.sample(i);
    double d = 0.0;
    for (std::size_t t = 0; t < s.size(); ++t) {
      const double diff = static_cast<double>(s[t]) - query[t];
      d += diff * diff;
    }
    if (!best || d < best->distance) best = Neighbor{i, d};
  }
  if (!best) throw Error(ErrorCode::kNoUnlikeNeighbor, "no train sample is predicted differently from the query");
  best->distance = std::sqrt(best->distance);
  return *best;
}

std::size_t best_window(std::span<const float> attribution, std::size_t window) {
  if (window == 0 || window > attribution.size()) {
    throw Error(ErrorCode::kInvalidArgument, "window must be in [1, T]");
  }
  double sum = 0.0;
  for (std::size_t t = 0; t < window; ++t) sum += std::abs(attribution[t]);
  double best = sum;
  std::size_t start = 0;
  for (std::size_t s = 1; s + window <= attribution.size(); ++s) {
    sum += std::abs(attribution[s + window - 1]) - std::abs(attribution[s - 1]);
    if (sum > best + 1e-12 * std::max(1.0, std::abs(best))) {
      best = sum;
      start = s;
    }
  }
  return start;
}

Counterfactual native_guide(const nn::Model& model, std::span<const float> query,
                            std::span<const float> attribution, std::span<const float> nun,
                            const NativeGuideParams& params) {
  check_length(model, query, "query");
  check_length(model, nun, "neighbour");
  if (attribution.size() != query.size()) throw Error(ErrorCode::kShapeMismatch, "attribution length != T");
  const std::size_t length = query.size();
  const int query_pred = nn::predict(model, query);
  if (nn::predict(model, nun) == query_pred) {
    throw Error(ErrorCode::kInvalidArgument, "neighbour must be predicted differently from the query");
  }
  const auto window0 = static_cast<std::size_t>(params.window0 > 0 ? params.window0 : ceil_div(length, 10));
  const auto grow = static_cast<std::size_t>(params.grow > 0 ? params.grow : ceil_div(length, 20));

  Counterfactual out;
  out.method = Method::kNativeGuide;
  out.origin_class = query_pred;
  std::size_t a = best_window(attribution, std::min(window0, length));
  std::size_t b = a + std::min(window0, length);
  for (;;) {
    out.series.assign(query.begin(), query.end());
    std::copy(nun.begin() + static_cast<std::ptrdiff_t>(a), nun.begin() + static_cast<std::ptrdiff_t>(b),
              out.series.begin() + static_cast<std::ptrdiff_t>(a));
    const bool full = a == 0 && b == length;
    if (full || nn::predict(model, out.series) != query_pred) {
      out.degenerate = full;
      break;
    }
    a = a > grow ? a - grow : 0;
    b = std::min(length, b + grow);
  }
  out.changed_mask.assign(length, false);
  for (std::size_t t = a; t < b; ++t) out.changed_mask[t] = true;
  finish(out, model, query);
  return out;
}

Counterfactual wachter(const nn::Model& model, std::span<const float> query, int target_class,
                       const WachterParams& params) {
  check_length(model, query, "query");
  if (target_class < 0 || target_class >= model.class_count()) {
    throw Error(ErrorCode::kInvalidArgument, "target class out of range");
  }
  if (params.inner_iters < 1 || params.max_iters < 1 || !(params.lr > 0.0) || !(params.lambda0 > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "wachter parameters must be positive");
  }
  const int origin = nn::predict(model, query);
  if (origin == target_class) throw Error(ErrorCode::kInvalidArgument, "query is already predicted as the target");

  const std::size_t length = query.size();
  std::vector<double> x(query.begin(), query.end()), m(length, 0.0), v(length, 0.0);
  Series current(query.begin(), query.end());
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double lambda = params.lambda0;
  int since_increase = 0;
  for (int iter = 1; iter <= params.max_iters; ++iter) {
    const auto trace = nn::forward(model, current);
    int rival = -1;
    for (int c = 0; c < model.class_count(); ++c) {
      if (c != target_class && (rival < 0 || trace.logits[c] > trace.logits[rival])) rival = c;
    }
    const double margin = static_cast<double>(trace.logits[rival]) - trace.logits[target_class];
    std::vector<double> grad(length, 0.0);
    if (margin >= 0.0) {
      std::vector<double> dlogits(model.class_count(), 0.0);
      dlogits[rival] = lambda;
      dlogits[target_class] = -lambda;
      grad = nn::input_vjp(model, current, trace, dlogits);
    }
    for (std::size_t t = 0; t < length; ++t) {
      const double diff = x[t] - query[t];
      grad[t] += diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
      m[t] = beta1 * m[t] + (1 - beta1) * grad[t];
      v[t] = beta2 * v[t] + (1 - beta2) * grad[t] * grad[t];
      const double mhat = m[t] / (1 - std::pow(beta1, iter));
      const double vhat = v[t] / (1 - std::pow(beta2, iter));
      x[t] -= params.lr * mhat / (std::sqrt(vhat) + eps);
      current[t] = static_cast<float>(x[t]);
    }
    if (nn::predict(model, current) == target_class) {
      Counterfactual out;
      out.method = Method::kWachter;
      out.origin_class = origin;
      out.series = current;
      out.iterations = iter;
      out.changed_mask.assign(length, false);
      for (std::size_t t = 0; t < length; ++t) out.changed_mask[t] = std::abs(x[t] - query[t]) > 1e-6;
      finish(out, model, query);
      return out;
    }
    if (++since_increase == params.inner_iters) {
      lambda *= params.lambda_mult;
      since_increase = 0;
    }
  }
  throw Error(ErrorCode::kNoFlipWithinBudget,
              "no flip to class " + std::to_string(target_class) + " within " + std::to_string(params.max_iters) +
                  " iterations");
}

std::string to_json(const Counterfactual& cf) {
  using detail::json;
  json doc;
  doc["method"] = std::string(method_name(cf.method));
  doc["origin_index"] = cf.origin_index ? json(*cf.origin_index) : json();
  doc["series"] = detail::float_array(cf.series);
  doc["origin_class"] = cf.origin_class;
  doc["predicted_class"] = cf.predicted_class;
  doc["changed_mask"] = cf.changed_mask;
  doc["l1"] = cf.l1;
  doc["l2"] = cf.l2;
  doc["degenerate"] = cf.degenerate;
  doc["nun_index"] = cf.nun_index ? json(*cf.nun_index) : json();
  doc["iterations"] = cf.iterations;
  return doc.dump();
}

}  // namespace tsexplain::cf
