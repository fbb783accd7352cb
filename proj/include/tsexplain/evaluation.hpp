#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tsexplain/attributions.hpp"
#include "tsexplain/data.hpp"
#include "tsexplain/nn.hpp"

namespace tsexplain::eval {

enum class Regime { kPoint, kTime };
enum class Strategy { kZero, kInverse, kMean, kMin, kMax, kSwap };

std::string_view regime_name(Regime regime);
Regime parse_regime(std::string_view name);
std::string_view strategy_name(Strategy strategy);
Strategy parse_strategy(std::string_view name);

struct Threshold {
  enum class Kind { kTopPercent, kAbsValue };
  Kind kind = Kind::kTopPercent;
  double value = 10.0;

  static Threshold top_percent(double p) { return {Kind::kTopPercent, p}; }
  static Threshold abs_value(double v) { return {Kind::kAbsValue, v}; }
};

struct PerturbationConfig {
  Regime regime = Regime::kPoint;
  Strategy strategy = Strategy::kZero;
  Threshold threshold;
  int span = 5;  // window length, time regime only
  bool compare_random = true;
  std::uint64_t seed = 0;

  void validate() const;  // throws InvalidConfig
  std::string label() const;
};

/// {point, time} x {zero, inverse, mean, swap (time only)}, top 10%, span 5.
std::vector<PerturbationConfig> default_grid(std::uint64_t seed = 0);

/// Sorted indices. TopPercent keeps the ceil(p*T/100) largest |values|,
/// lower index first on ties; AbsValue keeps |value| >= v.
std::vector<std::size_t> select_relevant(std::span<const float> values, const Threshold& threshold);

/// Indices of the k largest |values|, ties to the lower index, returned sorted.
std::vector<std::size_t> top_k(std::span<const float> values, std::size_t k);

/// Windows of length `span` starting at t - span/2, clamped to [0, T), with
/// windows sharing an index merged. Inclusive bounds.
std::vector<std::pair<std::size_t, std::size_t>> merged_windows(std::span<const std::size_t> indices,
                                                                 std::size_t length, int span);

Series perturb(std::span<const float> series, std::span<const std::size_t> indices,
               const PerturbationConfig& config, const DatasetStats& stats);

struct EvalResult {
  attr::Method method = attr::Method::kSaliency;
  PerturbationConfig config;
  double acc_before = 0.0;
  double acc_after = 0.0;
  double drop = 0.0;
  std::optional<double> random_drop;
  bool beats_random = false;
};

/// Evaluates over `samples` (normally the test split). Throws
/// MissingAttributions when any sample has no attribution vector.
EvalResult evaluate_method(const nn::Model& model, const TimeSeriesDataset& dataset,
                           std::span<const std::size_t> samples,
                           const attr::MethodAttributions& attributions,
                           const PerturbationConfig& config, const DatasetStats& stats);

/// Test split (all samples when there is none); stats from the train split.
EvalResult evaluate_method(const nn::Model& model, const TimeSeriesDataset& dataset,
                           const attr::MethodAttributions& attributions,
                           const PerturbationConfig& config);

struct RankEntry {
  attr::Method method = attr::Method::kSaliency;
  double mean_drop = 0.0;
  std::optional<double> mean_random_drop;
  bool beats_random = false;
  std::vector<double> drops;  // one per config, in Ranking::configs order (NaN when absent)
};

struct Ranking {
  std::vector<PerturbationConfig> configs;
  std::vector<RankEntry> entries;  // best first
};

/// Descending mean drop, ties by method name. Rows for the random method
/// itself are left out; it is the baseline.
Ranking rank_methods(std::span<const EvalResult> results);

/// Every method in the matrix (except random) against every config.
std::vector<EvalResult> evaluate_grid(const nn::Model& model, const TimeSeriesDataset& dataset,
                                      const attr::AttributionMatrix& matrix,
                                      std::span<const PerturbationConfig> grid);

std::string to_json(const Ranking& ranking);

std::string to_json(std::span<const EvalResult> results);
/// Throws InvalidConfig on malformed documents.
std::vector<EvalResult> results_from_json(std::string_view text);

std::string to_json(const PerturbationConfig& config);
PerturbationConfig config_from_json(std::string_view text);  // validates

}  // namespace tsexplain::eval
