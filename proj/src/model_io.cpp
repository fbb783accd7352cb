#include "json_codec.hpp"
#include "text_io.hpp"
#include "tsexplain/error.hpp"
#include "tsexplain/nn.hpp"

namespace tsexplain::nn {
namespace {

using detail::json;

using detail::float_array;

std::vector<float> read_floats(const json& arr, std::size_t expected, const std::string& what) {
  if (!arr.is_array()) throw Error(ErrorCode::kManifestParse, what + " must be an array");
  if (arr.size() != expected) {
    throw Error(ErrorCode::kShapeMismatch, what + " has " + std::to_string(arr.size()) +
                                               " entries, expected " + std::to_string(expected));
  }
  std::vector<float> out;
  out.reserve(expected);
  for (const auto& v : arr) {
    if (!v.is_number()) throw Error(ErrorCode::kManifestParse, what + " holds a non-number");
    out.push_back(static_cast<float>(v.get<double>()));
  }
  return out;
}

int read_int(const json& obj, const char* key) {
  if (!obj.contains(key) || !obj[key].is_number_integer()) {
    throw Error(ErrorCode::kManifestParse, std::string("missing integer field '") + key + "'");
  }
  return obj[key].get<int>();
}

}  // namespace

std::string to_manifest(const Model& model) {
  json doc;
  doc["input_length"] = model.input_length();
  doc["classes"] = model.class_count();
  json layers = json::array();
  for (const auto& layer : model.layers()) {
    json entry;
    entry["kind"] = std::string(layer_kind(layer.spec));
    if (const auto* c = std::get_if<Conv1D>(&layer.spec)) {
      entry["in"] = c->in_channels;
      entry["out"] = c->out_channels;
      entry["kernel"] = c->kernel;
      entry["stride"] = c->stride;
      json weights = json::array();
      for (int o = 0; o < c->out_channels; ++o) {
        json per_out = json::array();
        for (int i = 0; i < c->in_channels; ++i) {
          const std::size_t base = (static_cast<std::size_t>(o) * c->in_channels + i) * c->kernel;
          per_out.push_back(float_array(std::span(layer.weights).subspan(base, c->kernel)));
        }
        weights.push_back(std::move(per_out));
      }
      entry["weights"] = std::move(weights);
      entry["bias"] = float_array(layer.bias);
    } else if (const auto* d = std::get_if<Dense>(&layer.spec)) {
      entry["in"] = d->in;
      entry["out"] = d->out;
      json weights = json::array();
      for (int o = 0; o < d->out; ++o) {
        weights.push_back(
            float_array(std::span(layer.weights).subspan(static_cast<std::size_t>(o) * d->in, d->in)));
      }
      entry["weights"] = std::move(weights);
      entry["bias"] = float_array(layer.bias);
    } else if (const auto* p = std::get_if<MaxPool1D>(&layer.spec)) {
      entry["size"] = p->size;
    } else if (const auto* dr = std::get_if<Dropout>(&layer.spec)) {
      entry["p"] = detail::float_value(dr->p);
    }
    layers.push_back(std::move(entry));
  }
  doc["layers"] = std::move(layers);
  return doc.dump();
}

Model from_manifest(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kManifestParse, std::string("model manifest: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("layers") || !doc["layers"].is_array()) {
    throw Error(ErrorCode::kManifestParse, "model manifest needs a 'layers' array");
  }
  const int input_length = read_int(doc, "input_length");
  const int classes = read_int(doc, "classes");
  std::vector<Layer> layers;
  const auto& entries = doc["layers"];
  for (std::size_t n = 0; n < entries.size(); ++n) {
    const auto& e = entries[n];
    if (!e.is_object() || !e.contains("kind") || !e["kind"].is_string()) {
      throw Error(ErrorCode::kManifestParse, "layer " + std::to_string(n) + " has no kind");
    }
    const auto kind = e["kind"].get<std::string>();
    const std::string where = "layer " + std::to_string(n) + " (" + kind + ")";
    Layer layer;
    if (kind == "conv1d") {
      Conv1D c{read_int(e, "in"), read_int(e, "out"), read_int(e, "kernel"),
               e.contains("stride") ? read_int(e, "stride") : 1};
      if (c.in_channels < 1 || c.out_channels < 1 || c.kernel < 1 || c.stride < 1) {
        throw Error(ErrorCode::kShapeMismatch, where + ": sizes must be >= 1");
      }
      const auto& w = e.value("weights", json());
      if (!w.is_array()) throw Error(ErrorCode::kManifestParse, where + ": weights missing");
      if (static_cast<int>(w.size()) != c.out_channels) {
        throw Error(ErrorCode::kShapeMismatch, where + ": weights outer size != out");
      }
      for (const auto& per_out : w) {
        if (!per_out.is_array()) throw Error(ErrorCode::kManifestParse, where + ": bad weights");
        if (static_cast<int>(per_out.size()) != c.in_channels) {
          throw Error(ErrorCode::kShapeMismatch, where + ": weights middle size != in");
        }
        for (const auto& kernel : per_out) {
          auto vals = read_floats(kernel, static_cast<std::size_t>(c.kernel), where + " weights");
          layer.weights.insert(layer.weights.end(), vals.begin(), vals.end());
        }
      }
      layer.bias = read_floats(e.value("bias", json()), static_cast<std::size_t>(c.out_channels),
                               where + " bias");
      layer.spec = c;
    } else if (kind == "dense") {
      Dense d{read_int(e, "in"), read_int(e, "out")};
      if (d.in < 1 || d.out < 1) throw Error(ErrorCode::kShapeMismatch, where + ": sizes must be >= 1");
      const auto& w = e.value("weights", json());
      if (!w.is_array()) throw Error(ErrorCode::kManifestParse, where + ": weights missing");
      if (static_cast<int>(w.size()) != d.out) {
        throw Error(ErrorCode::kShapeMismatch, where + ": weights rows != out");
      }
      for (const auto& row : w) {
        auto vals = read_floats(row, static_cast<std::size_t>(d.in), where + " weights");
        layer.weights.insert(layer.weights.end(), vals.begin(), vals.end());
      }
      layer.bias = read_floats(e.value("bias", json()), static_cast<std::size_t>(d.out),
                               where + " bias");
      layer.spec = d;
    } else if (kind == "relu") {
      layer.spec = ReLU{};
    } else if (kind == "maxpool1d") {
      layer.spec = MaxPool1D{read_int(e, "size")};
    } else if (kind == "flatten") {
      layer.spec = Flatten{};
    } else if (kind == "dropout") {
      if (!e.contains("p") || !e["p"].is_number()) {
        throw Error(ErrorCode::kManifestParse, where + ": missing p");
      }
      layer.spec = Dropout{static_cast<float>(e["p"].get<double>())};
    } else if (kind == "softmax" && n + 1 == entries.size()) {
      continue;  // applied outside the stack
    } else {
      throw Error(ErrorCode::kUnknownLayerKind, where + ": unknown layer kind");
    }
    layers.push_back(std::move(layer));
  }
  return Model(input_length, classes, std::move(layers));
}

void save_model(const Model& model, const std::filesystem::path& path) {
  detail::write_text_file(path, to_manifest(model));
}

Model load_model(const std::filesystem::path& path) {
  return from_manifest(detail::read_text_file(path));
}

}  // namespace tsexplain::nn
