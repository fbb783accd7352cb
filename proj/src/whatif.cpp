#include "tsexplain/whatif.hpp"

#include <algorithm>
#include <cmath>

#include "json_codec.hpp"
#include "tsexplain/error.hpp"

namespace tsexplain::whatif {
namespace {

double train_mean(const TimeSeriesDataset& dataset) {
  const bool has_train = !dataset.indices(Split::kTrain).empty();
  return compute_stats(dataset, has_train ? std::optional(Split::kTrain) : std::nullopt).mean;
}

double squared_distance(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

std::string_view region_op_name(RegionOp op) {
  switch (op) {
    case RegionOp::kActMax: return "actmax";
    case RegionOp::kGlobalMean: return "global_mean";
    case RegionOp::kLocalMean: return "local_mean";
    case RegionOp::kInverse: return "inverse";
    case RegionOp::kMovingAvg: return "moving_avg";
    case RegionOp::kExpSmooth: return "exp_smooth";
  }
  return "local_mean";
}

RegionOp parse_region_op(std::string_view name) {
  for (RegionOp op : {RegionOp::kActMax, RegionOp::kGlobalMean, RegionOp::kLocalMean, RegionOp::kInverse,
                      RegionOp::kMovingAvg, RegionOp::kExpSmooth}) {
    if (region_op_name(op) == name) return op;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown region op '" + std::string(name) + "'");
}

Series drag_edit(std::span<const float> series, std::size_t t, float value, int radius) {
  if (t >= series.size()) throw Error(ErrorCode::kIndexOutOfRange, "drag index out of range");
  if (radius < 0) throw Error(ErrorCode::kInvalidArgument, "radius must be >= 0");
  Series out(series.begin(), series.end());
  const double delta = static_cast<double>(value) - series[t];
  const double sigma = std::max(radius, 1) / 2.0;
  const long lo = std::max(0L, static_cast<long>(t) - radius);
  const long hi = std::min(static_cast<long>(series.size()) - 1, static_cast<long>(t) + radius);
  for (long i = lo; i <= hi; ++i) {
    const double d = static_cast<double>(i) - static_cast<double>(t);
    out[i] = static_cast<float>(series[i] + delta * std::exp(-d * d / (2.0 * sigma * sigma)));
  }
  out[t] = value;
  return out;
}

Series region_edit(std::span<const float> series, const RegionEdit& edit, const EditContext& context) {
  const std::size_t a = edit.a, b = edit.b;
  if (a > b || b >= series.size()) throw Error(ErrorCode::kIndexOutOfRange, "region must satisfy 0 <= a <= b < T");
  Series out(series.begin(), series.end());
  switch (edit.op) {
    case RegionOp::kActMax: {
      if (!context.model) throw Error(ErrorCode::kMissingContext, "actmax needs a model");
      const auto cls = edit.target_class ? edit.target_class : context.target_class;
      if (!cls) throw Error(ErrorCode::kMissingContext, "actmax needs a target class");
      if (*cls < 0 || *cls >= context.model->class_count()) {
        throw Error(ErrorCode::kInvalidArgument, "actmax class out of range");
      }
      const auto synth = context.dataset
                             ? nn::activation_maximization(*context.model, *cls, *context.dataset, context.actmax)
                             : nn::activation_maximization(*context.model, *cls, series, context.actmax);
      if (synth.size() != series.size()) throw Error(ErrorCode::kShapeMismatch, "model length != series length");
      for (std::size_t i = a; i <= b; ++i) out[i] = synth[i];
      break;
    }
    case RegionOp::kGlobalMean: {
      if (!context.dataset) throw Error(ErrorCode::kMissingContext, "global_mean needs the dataset");
      const auto m = static_cast<float>(train_mean(*context.dataset));
      for (std::size_t i = a; i <= b; ++i) out[i] = m;
      break;
    }
    case RegionOp::kLocalMean: {
      double sum = 0.0;
      for (std::size_t i = a; i <= b; ++i) sum += series[i];
      const auto m = static_cast<float>(sum / static_cast<double>(b - a + 1));
      for (std::size_t i = a; i <= b; ++i) out[i] = m;
      break;
    }
    case RegionOp::kInverse:
      for (std::size_t i = a; i <= b; ++i) out[i] = -series[i];
      break;
    case RegionOp::kMovingAvg: {
      if (edit.window < 1) throw Error(ErrorCode::kInvalidArgument, "moving average window must be >= 1");
      const long k = edit.window;
      for (std::size_t i = a; i <= b; ++i) {
        const long start = std::max(static_cast<long>(a), static_cast<long>(i) - k / 2);
        const long end = std::min(static_cast<long>(b), static_cast<long>(i) - k / 2 + k - 1);
        double sum = 0.0;
        for (long j = start; j <= end; ++j) sum += series[j];
        out[i] = static_cast<float>(sum / static_cast<double>(end - start + 1));
      }
      break;
    }
    case RegionOp::kExpSmooth: {
      if (!(edit.alpha > 0.0 && edit.alpha <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must be in (0, 1]");
      double s = series[a];
      for (std::size_t i = a + 1; i <= b; ++i) {
        s = edit.alpha * series[i] + (1.0 - edit.alpha) * s;
        out[i] = static_cast<float>(s);
      }
      break;
    }
  }
  return out;
}

Series apply_edit(std::span<const float> series, const EditOp& edit, const EditContext& context) {
  if (const auto* d = std::get_if<DragEdit>(&edit)) return drag_edit(series, d->t, d->value, d->radius);
  return region_edit(series, std::get<RegionEdit>(edit), context);
}

Series apply_edits(std::span<const float> series, std::span<const EditOp> edits, const EditContext& context) {
  Series cur(series.begin(), series.end());
  for (const auto& e : edits) cur = apply_edit(cur, e, context);
  return cur;
}

EditOp edit_from_json(std::string_view text) {
  using detail::json;
  try {
    const auto obj = json::parse(text);
    const auto kind = obj.at("kind").get<std::string>();
    if (kind == "drag") {
      DragEdit d;
      d.t = obj.at("t").get<std::size_t>();
      d.value = static_cast<float>(obj.at("value").get<double>());
      d.radius = obj.value("radius", 0);
      return d;
    }
    if (kind == "region") {
      RegionEdit r;
      r.a = obj.at("a").get<std::size_t>();
      r.b = obj.at("b").get<std::size_t>();
      r.op = parse_region_op(obj.at("op").get<std::string>());
      if (obj.contains("class")) r.target_class = obj["class"].get<int>();
      r.window = obj.value("k", r.window);
      r.alpha = obj.value("alpha", r.alpha);
      return r;
    }
    throw Error(ErrorCode::kInvalidArgument, "unknown edit kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("edit op: ") + e.what());
  }
}

std::string to_json(const EditOp& edit) {
  using detail::json;
  json obj;
  if (const auto* d = std::get_if<DragEdit>(&edit)) {
    obj["kind"] = "drag";
    obj["t"] = d->t;
    obj["value"] = detail::float_value(d->value);
    obj["radius"] = d->radius;
  } else {
    const auto& r = std::get<RegionEdit>(edit);
    obj["kind"] = "region";
    obj["a"] = r.a;
    obj["b"] = r.b;
    obj["op"] = std::string(region_op_name(r.op));
    if (r.target_class) obj["class"] = *r.target_class;
    obj["k"] = r.window;
    obj["alpha"] = r.alpha;
  }
  return obj.dump();
}

std::string_view space_name(Space space) {
  switch (space) {
    case Space::kEuclidean: return "euclidean";
    case Space::kActivations: return "activations";
    case Space::kAttributions: return "attributions";
  }
  return "euclidean";
}

Space parse_space(std::string_view name) {
  for (Space s : {Space::kEuclidean, Space::kActivations, Space::kAttributions}) {
    if (space_name(s) == name) return s;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown neighbour space '" + std::string(name) + "'");
}

std::vector<NeighborHit> nearest_neighbors(const TimeSeriesDataset& dataset, const NeighborContext& context,
                                           const Query& query, Space space, std::size_t k) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  std::optional<std::size_t> self;
  Series raw;
  if (const auto* index = std::get_if<std::size_t>(&query)) {
    if (*index >= dataset.size()) throw Error(ErrorCode::kIndexOutOfRange, "query index out of range");
    self = *index;
    const auto s = dataset.sample(*index);
    raw.assign(s.begin(), s.end());
  } else {
    raw = std::get<Series>(query);
    if (raw.size() != dataset.length()) throw Error(ErrorCode::kShapeMismatch, "query length != T");
  }

  std::vector<std::size_t> candidates;
  std::vector<Series> rows;
  Series probe;
  switch (space) {
    case Space::kEuclidean:
      probe = raw;
      for (std::size_t i = 0; i < dataset.size(); ++i) {
        candidates.push_back(i);
        const auto s = dataset.sample(i);
        rows.emplace_back(s.begin(), s.end());
      }
      break;
    case Space::kActivations:
      if (!context.model) throw Error(ErrorCode::kMissingContext, "activations space needs a model");
      probe = nn::activation_vector(*context.model, raw);
      for (std::size_t i = 0; i < dataset.size(); ++i) {
        candidates.push_back(i);
        rows.push_back(nn::activation_vector(*context.model, dataset.sample(i)));
      }
      break;
    case Space::kAttributions: {
      if (!context.method) throw Error(ErrorCode::kUnknownMethod, "attributions space needs a method");
      if (!context.matrix) throw Error(ErrorCode::kMissingContext, "attributions space needs the attribution matrix");
      const auto& entry = context.matrix->at(*context.method);
      if (self) {
        const Series* own = entry.find(*self);
        if (!own) throw Error(ErrorCode::kMissingAttributions, "query sample has no attributions");
        probe = *own;
      } else {
        if (!context.model) throw Error(ErrorCode::kMissingContext, "attributing a new series needs the model");
        probe = attr::compute(*context.method, *context.model, raw, entry.params).values;
      }
      candidates = entry.samples;
      rows = entry.values;
      break;
    }
  }

  std::vector<NeighborHit> hits;
  for (std::size_t n = 0; n < candidates.size(); ++n) {
    if (self && candidates[n] == *self) continue;
    hits.push_back({candidates[n], std::sqrt(squared_distance(rows[n], probe))});
  }
  std::sort(hits.begin(), hits.end(), [](const NeighborHit& x, const NeighborHit& y) {
    return x.distance != y.distance ? x.distance < y.distance : x.index < y.index;
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

}  // namespace tsexplain::whatif
