#include "tsexplain/attributions.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "json_codec.hpp"
#include "tsexplain/error.hpp"
#include "tsexplain/seed.hpp"

namespace tsexplain::attr {
namespace {

int resolve_target(const nn::Model& model, std::span<const float> x,
                   const AttributionParams& params) {
  if (params.target_class) {
    if (*params.target_class < 0 || *params.target_class >= model.class_count()) {
      throw Error(ErrorCode::kInvalidArgument, "target class out of range");
    }
    return *params.target_class;
  }
  return nn::predict(model, x);
}

void check_length(const nn::Model& model, std::span<const float> x) {
  if (static_cast<int>(x.size()) != model.input_length()) {
    throw Error(ErrorCode::kShapeMismatch, "sample length does not match the model");
  }
}

float target_logit(const nn::Model& model, std::span<const float> x, int target) {
  return nn::forward(model, x).logits[target];
}

double mean_of(std::span<const float> x) {
  double s = 0.0;
  for (float v : x) s += v;
  return s / static_cast<double>(x.size());
}

float fill_value(Fill fill, std::span<const float> x, const AttributionParams& params) {
  switch (fill) {
    case Fill::kZero: return 0.0f;
    case Fill::kSampleMean: return static_cast<float>(mean_of(x));
    case Fill::kGlobalMean: return static_cast<float>(params.global_mean);
  }
  return 0.0f;
}

Series broadcast(const std::vector<double>& per_segment,
                 const std::vector<std::pair<std::size_t, std::size_t>>& bounds, std::size_t length) {
  Series out(length, 0.0f);
  for (std::size_t s = 0; s < bounds.size(); ++s) {
    for (std::size_t t = bounds[s].first; t < bounds[s].second; ++t) {
      out[t] = static_cast<float>(per_segment[s]);
    }
  }
  return out;
}

void check_segments(std::size_t length, int segments) {
  if (segments < 1 || static_cast<std::size_t>(segments) > length) {
    throw Error(ErrorCode::kInvalidArgument, "segments must be in [1, T]");
  }
}

}  // namespace

std::string_view method_name(Method method) {
  switch (method) {
    case Method::kSaliency: return "saliency";
    case Method::kGradInput: return "grad_input";
    case Method::kIntegratedGradients: return "integrated_gradients";
    case Method::kOcclusion: return "occlusion";
    case Method::kLime: return "lime";
    case Method::kShapleySampling: return "shapley_sampling";
    case Method::kRandom: return "random";
  }
  return "unknown";
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods{Method::kSaliency,         Method::kGradInput,
                                           Method::kIntegratedGradients, Method::kOcclusion,
                                           Method::kLime,             Method::kShapleySampling,
                                           Method::kRandom};
  return methods;
}

Method parse_method(std::string_view name) {
  for (Method m : all_methods()) {
    if (method_name(m) == name) return m;
  }
  throw Error(ErrorCode::kUnknownMethod, "unknown attribution method '" + std::string(name) + "'");
}

std::string_view fill_name(Fill fill) {
  switch (fill) {
    case Fill::kZero: return "zero";
    case Fill::kSampleMean: return "sample_mean";
    case Fill::kGlobalMean: return "global_mean";
  }
  return "zero";
}

Fill parse_fill(std::string_view name) {
  if (name == "zero") return Fill::kZero;
  if (name == "sample_mean") return Fill::kSampleMean;
  if (name == "global_mean") return Fill::kGlobalMean;
  throw Error(ErrorCode::kInvalidConfig, "unknown fill '" + std::string(name) + "'");
}

std::vector<std::pair<std::size_t, std::size_t>> segment_bounds(std::size_t length, int segments) {
  check_segments(length, segments);
  std::vector<std::pair<std::size_t, std::size_t>> bounds;
  const auto s = static_cast<std::size_t>(segments);
  for (std::size_t i = 0; i < s; ++i) bounds.emplace_back(i * length / s, (i + 1) * length / s);
  return bounds;
}

Attribution saliency(const nn::Model& model, std::span<const float> x,
                     const AttributionParams& params) {
  check_length(model, x);
  const int target = resolve_target(model, x, params);
  auto g = nn::backward_input(model, x, target);
  for (auto& v : g) v = std::abs(v);
  return {Method::kSaliency, std::move(g), target};
}

Attribution grad_input(const nn::Model& model, std::span<const float> x,
                       const AttributionParams& params) {
  check_length(model, x);
  const int target = resolve_target(model, x, params);
  auto g = nn::backward_input(model, x, target);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= x[i];
  return {Method::kGradInput, std::move(g), target};
}

Attribution integrated_gradients(const nn::Model& model, std::span<const float> x,
                                 const AttributionParams& params) {
  check_length(model, x);
  if (params.ig_steps < 1) throw Error(ErrorCode::kInvalidArgument, "ig_steps must be >= 1");
  const int target = resolve_target(model, x, params);
  Series baseline = params.ig_baseline.value_or(Series(x.size(), 0.0f));
  if (baseline.size() != x.size()) throw Error(ErrorCode::kShapeMismatch, "baseline length != T");

  std::vector<double> onehot(model.class_count(), 0.0);
  onehot[target] = 1.0;
  std::vector<double> total(x.size(), 0.0);
  Series point(x.size());
  auto accumulate = [&](double alpha) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      point[i] = static_cast<float>(baseline[i] + alpha * (static_cast<double>(x[i]) - baseline[i]));
    }
    const auto trace = nn::forward(model, point);
    const auto g = nn::input_vjp(model, point, trace, onehot);
    for (std::size_t i = 0; i < x.size(); ++i) total[i] += g[i];
  };

  const double delta = target_logit(model, x, target) - target_logit(model, baseline, target);
  long steps = params.ig_steps;
  for (long k = 0; k < steps; ++k) accumulate((k + 0.5) / static_cast<double>(steps));
  auto gap = [&] {
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sum += (static_cast<double>(x[i]) - baseline[i]) * total[i] / static_cast<double>(steps);
    }
    return std::abs(sum - delta);
  };
  // Tripling keeps every old midpoint: (k + 0.5) / n == (3k + 1.5) / 3n.
  while (steps * 3 <= params.ig_max_steps && gap() > 2.5e-4 * std::abs(delta) + 2.5e-5) {
    const long next = steps * 3;
    for (long j = 0; j < next; ++j) {
      if (j % 3 != 1) accumulate((j + 0.5) / static_cast<double>(next));
    }
    steps = next;
  }
  Series values(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    values[i] = static_cast<float>((static_cast<double>(x[i]) - baseline[i]) * total[i] /
                                   static_cast<double>(steps));
  }
  return {Method::kIntegratedGradients, std::move(values), target};
}

Attribution occlusion(const nn::Model& model, std::span<const float> x,
                      const AttributionParams& params) {
  check_length(model, x);
  const std::size_t length = x.size();
  const int window = params.occlusion_window > 0
                         ? params.occlusion_window
                         : std::max(1, static_cast<int>(std::ceil(0.05 * static_cast<double>(length))));
  if (static_cast<std::size_t>(window) > length || params.occlusion_stride < 1) {
    throw Error(ErrorCode::kInvalidArgument, "occlusion window must be in [1, T], stride >= 1");
  }
  const int target = resolve_target(model, x, params);
  const double base = target_logit(model, x, target);
  const float fill = fill_value(params.occlusion_fill, x, params);

  std::vector<double> sum(length, 0.0);
  std::vector<int> count(length, 0);
  Series work(x.begin(), x.end());
  for (std::size_t start = 0; start + window <= length; start += params.occlusion_stride) {
    for (std::size_t t = start; t < start + window; ++t) work[t] = fill;
    const double delta = base - target_logit(model, work, target);
    for (std::size_t t = start; t < start + window; ++t) {
      work[t] = x[t];
      sum[t] += delta;
      count[t] += 1;
    }
  }
  Series values(length, 0.0f);
  for (std::size_t t = 0; t < length; ++t) {
    if (count[t] > 0) values[t] = static_cast<float>(sum[t] / count[t]);
  }
  return {Method::kOcclusion, std::move(values), target};
}

SegmentScores lime_segments(const nn::Model& model, std::span<const float> x,
                            const AttributionParams& params) {
  check_length(model, x);
  const auto bounds = segment_bounds(x.size(), params.segments);
  if (params.lime_samples < 2) throw Error(ErrorCode::kInvalidArgument, "lime_samples must be >= 2");
  if (!(params.kernel_width > 0.0)) throw Error(ErrorCode::kInvalidArgument, "kernel_width must be > 0");
  const int target = resolve_target(model, x, params);
  const float fill = fill_value(params.segment_fill, x, params);
  const int s = params.segments;
  const int n = params.lime_samples;

  std::mt19937_64 rng(params.seed);
  Eigen::MatrixXd design(n, s);
  Eigen::VectorXd response(n), weight(n);
  Series work(x.size());
  for (int row = 0; row < n; ++row) {
    int kept = 0;
    std::copy(x.begin(), x.end(), work.begin());
    for (int j = 0; j < s; ++j) {
      const bool keep = (rng() >> 63) != 0;
      design(row, j) = keep ? 1.0 : 0.0;
      kept += keep;
      if (!keep) {
        for (std::size_t t = bounds[j].first; t < bounds[j].second; ++t) work[t] = fill;
      }
    }
    response(row) = nn::forward(model, work).probabilities[target];
    const double cosine = kept == 0 ? 0.0 : std::sqrt(static_cast<double>(kept) / s);
    const double d = 1.0 - cosine;
    weight(row) = std::exp(-(d * d) / (params.kernel_width * params.kernel_width));
  }
  bool degenerate = true;
  for (int row = 1; row < n && degenerate; ++row) {
    degenerate = design.row(row) == design.row(0);
  }
  if (degenerate) {
    throw Error(ErrorCode::kDegenerateDesign, "all LIME masks are identical; raise lime_samples");
  }

  const double wsum = weight.sum();
  const Eigen::RowVectorXd zmean = (weight.asDiagonal() * design).colwise().sum() / wsum;
  const double ymean = weight.dot(response) / wsum;
  const Eigen::MatrixXd zc = design.rowwise() - zmean;
  const Eigen::VectorXd yc = response.array() - ymean;
  Eigen::MatrixXd gram = zc.transpose() * weight.asDiagonal() * zc;
  gram.diagonal().array() += params.ridge_lambda;
  const Eigen::VectorXd rhs = zc.transpose() * weight.asDiagonal() * yc;
  const Eigen::VectorXd coef = gram.ldlt().solve(rhs);

  SegmentScores out;
  out.values.assign(coef.data(), coef.data() + coef.size());
  out.target_class = target;
  return out;
}

Attribution lime(const nn::Model& model, std::span<const float> x, const AttributionParams& params) {
  auto scores = lime_segments(model, x, params);
  return {Method::kLime, broadcast(scores.values, segment_bounds(x.size(), params.segments), x.size()),
          scores.target_class};
}

SegmentScores shapley_segments(const nn::Model& model, std::span<const float> x,
                               const AttributionParams& params) {
  check_length(model, x);
  const auto bounds = segment_bounds(x.size(), params.segments);
  if (params.permutations < 1) throw Error(ErrorCode::kInvalidArgument, "permutations must be >= 1");
  const int target = resolve_target(model, x, params);
  const float fill = fill_value(params.segment_fill, x, params);
  const std::size_t s = bounds.size();

  Series empty(x.begin(), x.end());
  for (const auto& b : bounds) std::fill(empty.begin() + b.first, empty.begin() + b.second, fill);
  const double v_empty = target_logit(model, empty, target);

  std::mt19937_64 rng(params.seed);
  std::vector<std::size_t> order(s);
  std::vector<double> mean(s, 0.0), m2(s, 0.0);
  Series work(x.size());
  for (int p = 0; p < params.permutations; ++p) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = s; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    work = empty;
    double prev = v_empty;
    for (std::size_t j : order) {
      std::copy(x.begin() + bounds[j].first, x.begin() + bounds[j].second, work.begin() + bounds[j].first);
      const double v = target_logit(model, work, target);
      const double marginal = v - prev;
      prev = v;
      const double delta = marginal - mean[j];
      mean[j] += delta / (p + 1);
      m2[j] += delta * (marginal - mean[j]);
    }
  }
  SegmentScores out;
  out.values = mean;
  out.target_class = target;
  for (std::size_t j = 0; j < s; ++j) {
    const double var = params.permutations > 1 ? m2[j] / (params.permutations - 1) : 0.0;
    out.std_error.push_back(std::sqrt(var / params.permutations));
  }
  return out;
}

Attribution shapley_sampling(const nn::Model& model, std::span<const float> x,
                             const AttributionParams& params) {
  auto scores = shapley_segments(model, x, params);
  return {Method::kShapleySampling,
          broadcast(scores.values, segment_bounds(x.size(), params.segments), x.size()),
          scores.target_class};
}

Series random_values(std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Series out(length);
  // 24 random bits: exactly representable, strictly below 1.
  for (auto& v : out) v = static_cast<float>(rng() >> 40) * 0x1.0p-24f;
  return out;
}

Attribution random(std::size_t length, std::uint64_t seed) {
  return {Method::kRandom, random_values(length, seed), 0};
}

Attribution compute(Method method, const nn::Model& model, std::span<const float> x,
                    const AttributionParams& params) {
  switch (method) {
    case Method::kSaliency: return saliency(model, x, params);
    case Method::kGradInput: return grad_input(model, x, params);
    case Method::kIntegratedGradients: return integrated_gradients(model, x, params);
    case Method::kOcclusion: return occlusion(model, x, params);
    case Method::kLime: return lime(model, x, params);
    case Method::kShapleySampling: return shapley_sampling(model, x, params);
    case Method::kRandom: {
      check_length(model, x);
      auto a = random(x.size(), params.seed);
      a.target_class = resolve_target(model, x, params);
      return a;
    }
  }
  throw Error(ErrorCode::kUnknownMethod, "unknown method");
}

float population_std(std::span<const float> values) {
  if (values.empty()) return 0.0f;
  const double mean = mean_of(values);
  double var = 0.0;
  for (float v : values) var += (v - mean) * (v - mean);
  return static_cast<float>(std::sqrt(var / static_cast<double>(values.size())));
}

const Series* MethodAttributions::find(std::size_t sample) const {
  auto it = std::find(samples.begin(), samples.end(), sample);
  if (it == samples.end()) return nullptr;
  return &values[static_cast<std::size_t>(it - samples.begin())];
}

void AttributionMatrix::insert(MethodAttributions entry) {
  const Method m = entry.method;
  by_method_.insert_or_assign(m, std::move(entry));
}

const MethodAttributions* AttributionMatrix::get(Method method) const {
  auto it = by_method_.find(method);
  return it == by_method_.end() ? nullptr : &it->second;
}

const MethodAttributions& AttributionMatrix::at(Method method) const {
  const auto* entry = get(method);
  if (!entry) {
    throw Error(ErrorCode::kMissingAttributions,
                "no attributions for method '" + std::string(method_name(method)) + "'");
  }
  return *entry;
}

std::vector<Method> AttributionMatrix::methods() const {
  std::vector<Method> out;
  for (const auto& [m, _] : by_method_) out.push_back(m);
  return out;
}

std::size_t AttributionMatrix::vector_count() const {
  std::size_t n = 0;
  for (const auto& [_, entry] : by_method_) n += entry.values.size();
  return n;
}

AttributionMatrix build_attribution_matrix(const nn::Model& model, const TimeSeriesDataset& dataset,
                                           std::span<const std::size_t> samples,
                                           std::span<const Method> methods,
                                           const AttributionParams& params,
                                           const ProgressFn& progress) {
  AttributionMatrix matrix;
  for (Method method : methods) {
    MethodAttributions entry;
    entry.method = method;
    entry.params = params;
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const std::size_t index = samples[k];
      if (index >= dataset.size()) throw Error(ErrorCode::kIndexOutOfRange, "sample index out of range");
      AttributionParams local = params;
      local.seed = derive_seed(params.seed, index);
      auto a = compute(method, model, dataset.sample(index), local);
      entry.samples.push_back(index);
      entry.std.push_back(population_std(a.values));
      entry.targets.push_back(a.target_class);
      entry.values.push_back(std::move(a.values));
      if (progress) progress(method, k + 1, samples.size());
    }
    matrix.insert(std::move(entry));
  }
  return matrix;
}

std::string to_json(const AttributionMatrix& matrix) {
  detail::json doc = detail::json::object();
  for (Method m : matrix.methods()) {
    const auto& entry = matrix.at(m);
    detail::json obj;
    obj["params"] = detail::params_to_json(entry.params);
    obj["samples"] = entry.samples;
    obj["targets"] = entry.targets;
    detail::json values = detail::json::array();
    for (const auto& v : entry.values) values.push_back(detail::float_array(v));
    obj["values"] = std::move(values);
    obj["std"] = detail::float_array(entry.std);
    doc[std::string(method_name(m))] = std::move(obj);
  }
  return doc.dump();
}

AttributionMatrix attribution_matrix_from_json(std::string_view text) {
  AttributionMatrix matrix;
  try {
    const auto doc = detail::json::parse(text);
    for (const auto& [name, obj] : doc.items()) {
      MethodAttributions entry;
      entry.method = parse_method(name);
      entry.params = detail::params_from_json(obj.value("params", detail::json()));
      entry.samples = obj.at("samples").get<std::vector<std::size_t>>();
      entry.targets = obj.at("targets").get<std::vector<int>>();
      for (const auto& v : obj.at("values")) entry.values.push_back(detail::read_series(v));
      entry.std = detail::read_series(obj.at("std"));
      if (entry.values.size() != entry.samples.size() || entry.std.size() != entry.samples.size()) {
        throw Error(ErrorCode::kShapeMismatch, "attribution artifact is incomplete");
      }
      matrix.insert(std::move(entry));
    }
  } catch (const detail::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("attribution artifact: ") + e.what());
  }
  return matrix;
}

}  // namespace tsexplain::attr
