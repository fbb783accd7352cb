#include "tsexplain/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "json_codec.hpp"
#include "text_io.hpp"
#include "tsexplain/error.hpp"
#include "tsexplain/seed.hpp"

namespace tsexplain::eval {
namespace {

double mean_accuracy(const nn::Model& model, const std::vector<Series>& inputs,
                     const TimeSeriesDataset& dataset, std::span<const std::size_t> samples) {
  if (samples.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    correct += nn::predict(model, inputs[k]) == dataset.label(samples[k]);
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace

std::string_view regime_name(Regime regime) {
  return regime == Regime::kPoint ? "point" : "time";
}

Regime parse_regime(std::string_view name) {
  if (name == "point") return Regime::kPoint;
  if (name == "time") return Regime::kTime;
  throw Error(ErrorCode::kInvalidConfig, "unknown regime '" + std::string(name) + "'");
}

std::string_view strategy_name(Strategy strategy) {
  switch (strategy) {
    case Strategy::kZero: return "zero";
    case Strategy::kInverse: return "inverse";
    case Strategy::kMean: return "mean";
    case Strategy::kMin: return "min";
    case Strategy::kMax: return "max";
    case Strategy::kSwap: return "swap";
  }
  return "zero";
}

Strategy parse_strategy(std::string_view name) {
  for (Strategy s : {Strategy::kZero, Strategy::kInverse, Strategy::kMean, Strategy::kMin,
                     Strategy::kMax, Strategy::kSwap}) {
    if (strategy_name(s) == name) return s;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown strategy '" + std::string(name) + "'");
}

void PerturbationConfig::validate() const {
  if (threshold.kind == Threshold::Kind::kTopPercent &&
      !(threshold.value > 0.0 && threshold.value <= 100.0)) {
    throw Error(ErrorCode::kInvalidConfig, "top percent must be in (0, 100]");
  }
  if (threshold.kind == Threshold::Kind::kAbsValue && !std::isfinite(threshold.value)) {
    throw Error(ErrorCode::kInvalidConfig, "abs threshold must be finite");
  }
  if (span < 1) throw Error(ErrorCode::kInvalidConfig, "span must be >= 1");
  if (strategy == Strategy::kSwap && regime == Regime::kPoint) {
    throw Error(ErrorCode::kInvalidConfig, "swap needs the time regime");
  }
}

std::string PerturbationConfig::label() const {
  std::string out = std::string(regime_name(regime)) + "/" + std::string(strategy_name(strategy)) + "/";
  out += threshold.kind == Threshold::Kind::kTopPercent ? "top" : "abs";
  out += detail::format_number(threshold.value);
  if (regime == Regime::kTime) out += "/L" + std::to_string(span);
  return out;
}

std::vector<PerturbationConfig> default_grid(std::uint64_t seed) {
  std::vector<PerturbationConfig> grid;
  for (Regime r : {Regime::kPoint, Regime::kTime}) {
    for (Strategy s : {Strategy::kZero, Strategy::kInverse, Strategy::kMean, Strategy::kSwap}) {
      if (s == Strategy::kSwap && r == Regime::kPoint) continue;
      PerturbationConfig c;
      c.regime = r;
      c.strategy = s;
      c.threshold = Threshold::top_percent(10.0);
      c.span = 5;
      c.compare_random = true;
      c.seed = seed;
      grid.push_back(c);
    }
  }
  return grid;
}

std::vector<std::size_t> top_k(std::span<const float> values, std::size_t k) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  k = std::min(k, values.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const float va = std::abs(values[a]), vb = std::abs(values[b]);
                      return va != vb ? va > vb : a < b;
                    });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<std::size_t> select_relevant(std::span<const float> values, const Threshold& threshold) {
  if (threshold.kind == Threshold::Kind::kTopPercent) {
    const auto k = static_cast<std::size_t>(
        std::ceil(threshold.value * static_cast<double>(values.size()) / 100.0 - 1e-9));
    return top_k(values, k);
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::abs(values[i]) >= threshold.value) out.push_back(i);
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> merged_windows(std::span<const std::size_t> indices,
                                                                 std::size_t length, int span) {
  std::vector<std::pair<std::size_t, std::size_t>> windows;
  for (std::size_t t : indices) {
    if (t >= length) throw Error(ErrorCode::kIndexOutOfRange, "perturbation index out of range");
    const long start = static_cast<long>(t) - span / 2;
    const long end = start + span - 1;
    windows.emplace_back(static_cast<std::size_t>(std::max(0L, start)),
                         static_cast<std::size_t>(std::min(end, static_cast<long>(length) - 1)));
  }
  std::sort(windows.begin(), windows.end());
  std::vector<std::pair<std::size_t, std::size_t>> merged;
  for (const auto& w : windows) {
    if (!merged.empty() && w.first <= merged.back().second) {
      merged.back().second = std::max(merged.back().second, w.second);
    } else {
      merged.push_back(w);
    }
  }
  return merged;
}

Series perturb(std::span<const float> series, std::span<const std::size_t> indices,
               const PerturbationConfig& config, const DatasetStats& stats) {
  config.validate();
  Series out(series.begin(), series.end());
  auto replace = [&](std::size_t t) {
    switch (config.strategy) {
      case Strategy::kZero: out[t] = 0.0f; break;
      case Strategy::kInverse: out[t] = -series[t]; break;
      case Strategy::kMean: out[t] = static_cast<float>(stats.mean); break;
      case Strategy::kMin: out[t] = static_cast<float>(stats.min); break;
      case Strategy::kMax: out[t] = static_cast<float>(stats.max); break;
      case Strategy::kSwap: break;
    }
  };
  if (config.regime == Regime::kPoint) {
    for (std::size_t t : indices) {
      if (t >= series.size()) throw Error(ErrorCode::kIndexOutOfRange, "perturbation index out of range");
      replace(t);
    }
    return out;
  }
  for (const auto& [a, b] : merged_windows(indices, series.size(), config.span)) {
    if (config.strategy == Strategy::kSwap) {
      std::reverse(out.begin() + static_cast<std::ptrdiff_t>(a),
                   out.begin() + static_cast<std::ptrdiff_t>(b) + 1);
    } else {
      for (std::size_t t = a; t <= b; ++t) replace(t);
    }
  }
  return out;
}

EvalResult evaluate_method(const nn::Model& model, const TimeSeriesDataset& dataset,
                           std::span<const std::size_t> samples,
                           const attr::MethodAttributions& attributions,
                           const PerturbationConfig& config, const DatasetStats& stats) {
  config.validate();
  std::vector<Series> original, perturbed, randomized;
  for (std::size_t index : samples) {
    const Series* values = attributions.find(index);
    if (!values) {
      throw Error(ErrorCode::kMissingAttributions,
                  "no " + std::string(attr::method_name(attributions.method)) +
                      " attribution for sample " + std::to_string(index));
    }
    const auto x = dataset.sample(index);
    original.emplace_back(x.begin(), x.end());
    const auto selected = select_relevant(*values, config.threshold);
    perturbed.push_back(perturb(x, selected, config, stats));
    if (config.compare_random) {
      const auto noise = attr::random_values(x.size(), derive_seed(config.seed, index));
      randomized.push_back(perturb(x, top_k(noise, selected.size()), config, stats));
    }
  }
  EvalResult result;
  result.method = attributions.method;
  result.config = config;
  result.acc_before = mean_accuracy(model, original, dataset, samples);
  result.acc_after = mean_accuracy(model, perturbed, dataset, samples);
  result.drop = result.acc_before - result.acc_after;
  if (config.compare_random) {
    result.random_drop = result.acc_before - mean_accuracy(model, randomized, dataset, samples);
    result.beats_random = result.drop > *result.random_drop;
  }
  return result;
}

EvalResult evaluate_method(const nn::Model& model, const TimeSeriesDataset& dataset,
                           const attr::MethodAttributions& attributions,
                           const PerturbationConfig& config) {
  auto samples = dataset.indices(Split::kTest);
  if (samples.empty()) {
    samples.resize(dataset.size());
    std::iota(samples.begin(), samples.end(), 0);
  }
  const bool has_train = !dataset.indices(Split::kTrain).empty();
  const auto stats = compute_stats(dataset, has_train ? std::optional(Split::kTrain) : std::nullopt);
  return evaluate_method(model, dataset, samples, attributions, config, stats);
}

Ranking rank_methods(std::span<const EvalResult> results) {
  Ranking ranking;
  std::map<std::string, std::size_t> config_slot;
  for (const auto& r : results) {
    if (config_slot.emplace(r.config.label(), ranking.configs.size()).second) {
      ranking.configs.push_back(r.config);
    }
  }
  std::map<attr::Method, RankEntry> rows;
  std::map<attr::Method, std::pair<double, int>> random_sums;
  for (const auto& r : results) {
    if (r.method == attr::Method::kRandom) continue;
    auto& row = rows[r.method];
    row.method = r.method;
    if (row.drops.empty()) row.drops.assign(ranking.configs.size(), std::numeric_limits<double>::quiet_NaN());
    row.drops[config_slot.at(r.config.label())] = r.drop;
    if (r.random_drop) {
      auto& acc = random_sums[r.method];
      acc.first += *r.random_drop;
      acc.second += 1;
    }
  }
  for (auto& [method, row] : rows) {
    double sum = 0.0;
    int n = 0;
    for (double d : row.drops) {
      if (!std::isnan(d)) {
        sum += d;
        ++n;
      }
    }
    row.mean_drop = n > 0 ? sum / n : 0.0;
    if (auto it = random_sums.find(method); it != random_sums.end()) {
      row.mean_random_drop = it->second.first / it->second.second;
      row.beats_random = row.mean_drop > *row.mean_random_drop;
    }
    ranking.entries.push_back(row);
  }
  std::sort(ranking.entries.begin(), ranking.entries.end(), [](const RankEntry& a, const RankEntry& b) {
    if (a.mean_drop != b.mean_drop) return a.mean_drop > b.mean_drop;
    return attr::method_name(a.method) < attr::method_name(b.method);
  });
  return ranking;
}

std::vector<EvalResult> evaluate_grid(const nn::Model& model, const TimeSeriesDataset& dataset,
                                      const attr::AttributionMatrix& matrix,
                                      std::span<const PerturbationConfig> grid) {
  std::vector<EvalResult> results;
  for (attr::Method m : matrix.methods()) {
    if (m == attr::Method::kRandom) continue;
    for (const auto& config : grid) results.push_back(evaluate_method(model, dataset, matrix.at(m), config));
  }
  return results;
}

namespace {

detail::json config_json(const PerturbationConfig& c) {
  using detail::json;
  json entry;
  entry["label"] = c.label();
  entry["regime"] = std::string(regime_name(c.regime));
  entry["strategy"] = std::string(strategy_name(c.strategy));
  entry["threshold"] = {{"kind", c.threshold.kind == Threshold::Kind::kTopPercent ? "top_percent" : "abs_value"},
                        {"value", c.threshold.value}};
  entry["span"] = c.span;
  entry["compare_random"] = c.compare_random;
  entry["seed"] = c.seed;
  return entry;
}

PerturbationConfig config_of(const detail::json& obj) {
  if (!obj.is_object()) throw Error(ErrorCode::kInvalidConfig, "perturbation config must be an object");
  PerturbationConfig c;
  try {
    if (obj.contains("regime")) c.regime = parse_regime(obj["regime"].get<std::string>());
    if (obj.contains("strategy")) c.strategy = parse_strategy(obj["strategy"].get<std::string>());
    if (obj.contains("threshold")) {
      const auto& t = obj["threshold"];
      const auto kind = t.value("kind", std::string("top_percent"));
      if (kind == "top_percent") c.threshold = Threshold::top_percent(t.value("value", 10.0));
      else if (kind == "abs_value") c.threshold = Threshold::abs_value(t.at("value").get<double>());
      else throw Error(ErrorCode::kInvalidConfig, "unknown threshold kind '" + kind + "'");
    }
    c.span = obj.value("span", c.span);
    c.compare_random = obj.value("compare_random", c.compare_random);
    c.seed = obj.value("seed", c.seed);
  } catch (const detail::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("perturbation config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace

std::string to_json(const Ranking& ranking) {
  using detail::json;
  json doc;
  json configs = json::array();
  for (const auto& c : ranking.configs) configs.push_back(config_json(c));
  doc["configs"] = std::move(configs);
  json rows = json::array();
  for (std::size_t rank = 0; rank < ranking.entries.size(); ++rank) {
    const auto& e = ranking.entries[rank];
    json row;
    row["rank"] = rank + 1;
    row["method"] = std::string(attr::method_name(e.method));
    row["mean_drop"] = e.mean_drop;
    row["random_drop"] = e.mean_random_drop ? json(*e.mean_random_drop) : json();
    row["beats_random"] = e.beats_random;
    json drops = json::array();
    for (double d : e.drops) drops.push_back(std::isnan(d) ? json() : json(d));
    row["drops"] = std::move(drops);
    rows.push_back(std::move(row));
  }
  doc["rows"] = std::move(rows);
  return doc.dump();
}

std::string to_json(std::span<const EvalResult> results) {
  using detail::json;
  json arr = json::array();
  for (const auto& r : results) {
    json row;
    row["method"] = std::string(attr::method_name(r.method));
    row["config"] = config_json(r.config);
    row["acc_before"] = r.acc_before;
    row["acc_after"] = r.acc_after;
    row["drop"] = r.drop;
    row["random_drop"] = r.random_drop ? json(*r.random_drop) : json();
    row["beats_random"] = r.beats_random;
    arr.push_back(std::move(row));
  }
  return arr.dump();
}

std::vector<EvalResult> results_from_json(std::string_view text) {
  using detail::json;
  std::vector<EvalResult> out;
  try {
    const auto arr = json::parse(text);
    if (!arr.is_array()) throw Error(ErrorCode::kInvalidConfig, "evaluation table must be an array");
    for (const auto& row : arr) {
      EvalResult r;
      try {
        r.method = attr::parse_method(row.at("method").get<std::string>());
      } catch (const Error& e) {
        throw Error(ErrorCode::kInvalidConfig, e.what());
      }
      r.config = config_of(row.at("config"));
      r.acc_before = row.at("acc_before").get<double>();
      r.acc_after = row.at("acc_after").get<double>();
      r.drop = row.at("drop").get<double>();
      if (!row.at("random_drop").is_null()) r.random_drop = row["random_drop"].get<double>();
      r.beats_random = row.at("beats_random").get<bool>();
      out.push_back(r);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("evaluation table: ") + e.what());
  }
  return out;
}

std::string to_json(const PerturbationConfig& config) { return config_json(config).dump(); }

PerturbationConfig config_from_json(std::string_view text) {
  try {
    return config_of(detail::json::parse(text));
  } catch (const detail::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("perturbation config: ") + e.what());
  }
}

}  // namespace tsexplain::eval
