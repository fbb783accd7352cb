#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsexplain/data.hpp"
#include "tsexplain/nn.hpp"

namespace tsexplain::cf {

enum class Method { kNativeGuide, kWachter };

std::string_view method_name(Method method);
Method parse_method(std::string_view name);  // throws InvalidConfig

struct Counterfactual {
  Method method = Method::kNativeGuide;
  std::optional<std::size_t> origin_index;
  Series series;
  int origin_class = 0;     // model prediction for the query
  int predicted_class = 0;  // model prediction for `series`
  std::vector<bool> changed_mask;
  double l1 = 0.0;
  double l2 = 0.0;
  bool degenerate = false;
  std::optional<std::size_t> nun_index;  // native guide
  int iterations = 0;                    // wachter
};

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;
};

/// Closest train sample (all samples without a train split) whose model
/// prediction differs from `query_pred`; ties go to the lower index.
/// `predictions` may be empty, in which case they are computed.
/// Throws NoUnlikeNeighbor.
Neighbor nearest_unlike_neighbor(const nn::Model& model, const TimeSeriesDataset& dataset,
                                 std::span<const float> query, int query_pred,
                                 std::span<const int> predictions = {});

struct NativeGuideParams {
  int window0 = 0;  // 0: ceil(T / 10)
  int grow = 0;     // 0: ceil(T / 20)
};

/// Start of the length-`window` run with the largest summed |attribution|.
std::size_t best_window(std::span<const float> attribution, std::size_t window);

/// Transplants a growing window of `nun` into `query`. When the window
/// reaches the full length the result is a copy of `nun` flagged degenerate.
/// changed_mask marks the transplanted window.
Counterfactual native_guide(const nn::Model& model, std::span<const float> query,
                            std::span<const float> attribution, std::span<const float> nun,
                            const NativeGuideParams& params = {});

struct WachterParams {
  double lambda0 = 0.1;
  double lambda_mult = 2.0;
  int inner_iters = 100;
  int max_iters = 2000;
  double lr = 0.01;
};

/// Adam on lambda * max(0, margin) + |x' - x|_1; returns the first iterate
/// predicted as `target_class`. Throws InvalidArgument when the query is
/// already predicted as the target and NoFlipWithinBudget on exhaustion.
Counterfactual wachter(const nn::Model& model, std::span<const float> query, int target_class,
                       const WachterParams& params = {});

std::string to_json(const Counterfactual& cf);

}  // namespace tsexplain::cf
