#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tsexplain/attributions.hpp"
#include "tsexplain/data.hpp"
#include "tsexplain/nn.hpp"

namespace tsexplain::whatif {

struct DragEdit {
  std::size_t t = 0;
  float value = 0.0f;
  int radius = 0;
};

enum class RegionOp { kActMax, kGlobalMean, kLocalMean, kInverse, kMovingAvg, kExpSmooth };

std::string_view region_op_name(RegionOp op);
RegionOp parse_region_op(std::string_view name);  // throws InvalidArgument

struct RegionEdit {
  std::size_t a = 0;
  std::size_t b = 0;  // inclusive
  RegionOp op = RegionOp::kLocalMean;
  std::optional<int> target_class;  // actmax; falls back to the context class
  int window = 3;                   // moving_avg
  double alpha = 0.5;               // exp_smooth
};

using EditOp = std::variant<DragEdit, RegionEdit>;

struct EditContext {
  const nn::Model* model = nullptr;
  const TimeSeriesDataset* dataset = nullptr;
  std::optional<int> target_class;
  nn::ActivationMaxConfig actmax;
};

/// Gaussian bump with sigma = max(radius, 1) / 2; series[t] lands exactly on value.
Series drag_edit(std::span<const float> series, std::size_t t, float value, int radius);

/// Throws MissingContext when actmax lacks a model or global_mean lacks a dataset.
/// actmax starts from the train class mean when a dataset is given, else from the series.
Series region_edit(std::span<const float> series, const RegionEdit& edit, const EditContext& context = {});

Series apply_edit(std::span<const float> series, const EditOp& edit, const EditContext& context = {});
Series apply_edits(std::span<const float> series, std::span<const EditOp> edits, const EditContext& context = {});

// JSON form: {"kind":"drag","t","value","radius"} or
// {"kind":"region","a","b","op", optional "class","k","alpha"}.
EditOp edit_from_json(std::string_view text);
std::string to_json(const EditOp& edit);

enum class Space { kEuclidean, kActivations, kAttributions };

std::string_view space_name(Space space);
Space parse_space(std::string_view name);  // throws InvalidArgument

struct NeighborContext {
  const nn::Model* model = nullptr;                  // activations space
  const attr::AttributionMatrix* matrix = nullptr;  // attributions space
  std::optional<attr::Method> method;               // attributions space
};

struct NeighborHit {
  std::size_t index = 0;
  double distance = 0.0;
};

using Query = std::variant<std::size_t, Series>;

/// k nearest samples by Euclidean distance in the chosen representation,
/// ascending, ties by index. A query given by index excludes itself. In the
/// attributions space only samples covered by the matrix are candidates, and
/// a by-value query is attributed with the matrix's stored parameters.
std::vector<NeighborHit> nearest_neighbors(const TimeSeriesDataset& dataset, const NeighborContext& context,
                                           const Query& query, Space space, std::size_t k);

}  // namespace tsexplain::whatif
