#include "json_codec.hpp"

#include <cstdlib>

#include "text_io.hpp"
#include "tsexplain/error.hpp"

namespace tsexplain::detail {

json float_value(float value) {
  const auto text = format_float(value);
  return std::strtod(text.c_str(), nullptr);
}

json float_array(std::span<const float> values) {
  json arr = json::array();
  for (float v : values) arr.push_back(float_value(v));
  return arr;
}

Series read_series(const json& arr) {
  if (!arr.is_array()) throw Error(ErrorCode::kInvalidArgument, "expected an array of numbers");
  Series out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number()) throw Error(ErrorCode::kInvalidArgument, "expected a number");
    out.push_back(static_cast<float>(v.get<double>()));
  }
  return out;
}

json params_to_json(const attr::AttributionParams& p) {
  json obj;
  if (p.target_class) obj["target_class"] = *p.target_class;
  obj["ig_steps"] = p.ig_steps;
  obj["ig_max_steps"] = p.ig_max_steps;
  if (p.ig_baseline) obj["ig_baseline"] = float_array(*p.ig_baseline);
  obj["occlusion_window"] = p.occlusion_window;
  obj["occlusion_stride"] = p.occlusion_stride;
  obj["occlusion_fill"] = std::string(attr::fill_name(p.occlusion_fill));
  obj["global_mean"] = p.global_mean;
  obj["segments"] = p.segments;
  obj["segment_fill"] = std::string(attr::fill_name(p.segment_fill));
  obj["lime_samples"] = p.lime_samples;
  obj["kernel_width"] = p.kernel_width;
  obj["ridge_lambda"] = p.ridge_lambda;
  obj["permutations"] = p.permutations;
  obj["seed"] = p.seed;
  return obj;
}

attr::AttributionParams params_from_json(const json& obj) {
  attr::AttributionParams p;
  if (obj.is_null()) return p;
  if (!obj.is_object()) throw Error(ErrorCode::kInvalidConfig, "attribution params must be an object");
  try {
    if (obj.contains("target_class")) p.target_class = obj["target_class"].get<int>();
    p.ig_steps = obj.value("ig_steps", p.ig_steps);
    p.ig_max_steps = obj.value("ig_max_steps", p.ig_max_steps);
    if (obj.contains("ig_baseline")) p.ig_baseline = read_series(obj["ig_baseline"]);
    p.occlusion_window = obj.value("occlusion_window", p.occlusion_window);
    p.occlusion_stride = obj.value("occlusion_stride", p.occlusion_stride);
    if (obj.contains("occlusion_fill")) p.occlusion_fill = attr::parse_fill(obj["occlusion_fill"].get<std::string>());
    p.global_mean = obj.value("global_mean", p.global_mean);
    p.segments = obj.value("segments", p.segments);
    if (obj.contains("segment_fill")) p.segment_fill = attr::parse_fill(obj["segment_fill"].get<std::string>());
    p.lime_samples = obj.value("lime_samples", p.lime_samples);
    p.kernel_width = obj.value("kernel_width", p.kernel_width);
    p.ridge_lambda = obj.value("ridge_lambda", p.ridge_lambda);
    p.permutations = obj.value("permutations", p.permutations);
    p.seed = obj.value("seed", p.seed);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("attribution params: ") + e.what());
  }
  return p;
}

}  // namespace tsexplain::detail
