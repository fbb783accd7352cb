#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tsexplain/data.hpp"
#include "tsexplain/nn.hpp"

namespace tsexplain::attr {

enum class Method {
  kSaliency,
  kGradInput,
  kIntegratedGradients,
  kOcclusion,
  kLime,
  kShapleySampling,
  kRandom,
};

std::string_view method_name(Method method);
Method parse_method(std::string_view name);  // throws UnknownMethod
const std::vector<Method>& all_methods();

// Value written into occluded windows / masked segments.
enum class Fill { kZero, kSampleMean, kGlobalMean };

std::string_view fill_name(Fill fill);
Fill parse_fill(std::string_view name);

struct AttributionParams {
  std::optional<int> target_class;  // unset: the model's predicted class
  int ig_steps = 50;
  // Step count is tripled (reusing earlier midpoints) until the completeness
  // gap is small or this cap would be exceeded. Set equal to ig_steps to disable.
  int ig_max_steps = 12150;
  std::optional<Series> ig_baseline;  // unset: zero vector
  int occlusion_window = 0;           // 0: max(1, ceil(0.05 * T))
  int occlusion_stride = 1;
  Fill occlusion_fill = Fill::kZero;
  double global_mean = 0.0;  // used by Fill::kGlobalMean
  int segments = 10;
  Fill segment_fill = Fill::kSampleMean;
  int lime_samples = 1000;
  double kernel_width = 0.25;
  double ridge_lambda = 1.0;
  int permutations = 500;
  std::uint64_t seed = 0;
};

struct Attribution {
  Method method = Method::kSaliency;
  Series values;
  int target_class = 0;
};

/// Half-open [begin, end) bounds of `segments` near-equal contiguous pieces.
std::vector<std::pair<std::size_t, std::size_t>> segment_bounds(std::size_t length, int segments);

Attribution saliency(const nn::Model& model, std::span<const float> x,
                     const AttributionParams& params = {});
Attribution grad_input(const nn::Model& model, std::span<const float> x,
                       const AttributionParams& params = {});
Attribution integrated_gradients(const nn::Model& model, std::span<const float> x,
                                 const AttributionParams& params = {});
Attribution occlusion(const nn::Model& model, std::span<const float> x,
                      const AttributionParams& params = {});

struct SegmentScores {
  std::vector<double> values;
  std::vector<double> std_error;  // Monte-Carlo standard error (Shapley only)
  int target_class = 0;
};

/// Weighted ridge fit (with intercept) from segment keep-masks to the
/// target-class probability. Throws DegenerateDesign when all masks agree.
SegmentScores lime_segments(const nn::Model& model, std::span<const float> x,
                            const AttributionParams& params = {});
Attribution lime(const nn::Model& model, std::span<const float> x,
                 const AttributionParams& params = {});

/// Permutation-sampling Shapley values over segments; the value of a
/// coalition is the target logit with absent segments filled.
SegmentScores shapley_segments(const nn::Model& model, std::span<const float> x,
                               const AttributionParams& params = {});
Attribution shapley_sampling(const nn::Model& model, std::span<const float> x,
                             const AttributionParams& params = {});

Series random_values(std::size_t length, std::uint64_t seed);
Attribution random(std::size_t length, std::uint64_t seed);

Attribution compute(Method method, const nn::Model& model, std::span<const float> x,
                    const AttributionParams& params = {});

float population_std(std::span<const float> values);

/// All attributions of one method over a set of samples, keyed by dataset index.
struct MethodAttributions {
  Method method = Method::kSaliency;
  AttributionParams params;
  std::vector<std::size_t> samples;
  std::vector<Series> values;
  std::vector<int> targets;
  std::vector<float> std;

  const Series* find(std::size_t sample) const;
};

class AttributionMatrix {
 public:
  void insert(MethodAttributions entry);
  const MethodAttributions* get(Method method) const;
  const MethodAttributions& at(Method method) const;  // throws MissingAttributions
  std::vector<Method> methods() const;
  bool empty() const { return by_method_.empty(); }
  std::size_t vector_count() const;

 private:
  std::map<Method, MethodAttributions> by_method_;
};

using ProgressFn = std::function<void(Method, std::size_t done, std::size_t total)>;

// Per-sample seeds are derived from (params.seed, sample index), so the
// result does not depend on the order samples are listed in.
AttributionMatrix build_attribution_matrix(const nn::Model& model, const TimeSeriesDataset& dataset,
                                           std::span<const std::size_t> samples,
                                           std::span<const Method> methods,
                                           const AttributionParams& params,
                                           const ProgressFn& progress = {});

std::string to_json(const AttributionMatrix& matrix);
AttributionMatrix attribution_matrix_from_json(std::string_view text);

}  // namespace tsexplain::attr
