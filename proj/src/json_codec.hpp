#pragma once

// nlohmann conversions shared by the artifact writers inside the library.

#include <span>
#include <vector>

#include "json.hpp"
#include "tsexplain/attributions.hpp"
#include "tsexplain/data.hpp"

namespace tsexplain::detail {

using json = nlohmann::ordered_json;

// Shortest-decimal float encoding (see model_io.cpp).
json float_value(float value);
json float_array(std::span<const float> values);
Series read_series(const json& arr);

json params_to_json(const attr::AttributionParams& params);
attr::AttributionParams params_from_json(const json& obj);

}  // namespace tsexplain::detail
