#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tsexplain/data.hpp"

namespace tsexplain::nn {

// Valid (unpadded) 1-D convolution.
struct Conv1D {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 3;
  int stride = 1;
};
struct ReLU {};
// Non-overlapping pooling, window == stride == size.
struct MaxPool1D {
  int size = 2;
};
struct Flatten {};
struct Dense {
  int in = 1;
  int out = 1;
};
struct Dropout {
  float p = 0.5f;
};

using LayerSpec = std::variant<Conv1D, ReLU, MaxPool1D, Flatten, Dense, Dropout>;

std::string_view layer_kind(const LayerSpec& spec);

struct Shape {
  int channels = 1;
  int length = 0;
  int size() const { return channels * length; }
  bool operator==(const Shape&) const = default;
};

/// One layer with its parameters. Conv weights are `[out][in][kernel]`,
/// dense weights `[out][in]`, both row-major.
struct Layer {
  LayerSpec spec;
  std::vector<float> weights;
  std::vector<float> bias;
};

/// Ordered layer stack mapping a length-T series to `class_count` logits.
/// Shapes are validated on construction; the final layer is always Dense.
class Model {
 public:
  Model(int input_length, int class_count, std::vector<Layer> layers);

  /// Glorot-uniform weights, zero biases.
  static Model initialize(int input_length, int class_count, const std::vector<LayerSpec>& specs,
                          std::uint64_t seed);

  int input_length() const { return input_length_; }
  int class_count() const { return class_count_; }
  const std::vector<Layer>& layers() const { return layers_; }
  Shape input_shape(std::size_t layer) const { return shapes_.at(layer); }
  Shape output_shape(std::size_t layer) const { return shapes_.at(layer + 1); }
  bool has_dropout() const;
  std::size_t parameter_count() const;

  std::span<float> mutable_weights(std::size_t layer) { return layers_.at(layer).weights; }
  std::span<float> mutable_bias(std::size_t layer) { return layers_.at(layer).bias; }

 private:
  int input_length_ = 0;
  int class_count_ = 0;
  std::vector<Layer> layers_;
  std::vector<Shape> shapes_;
};

/// Conv -> ReLU -> MaxPool blocks, then Flatten -> Dense -> ReLU -> Dropout -> Dense.
/// Pooling is skipped for a block whose conv output is shorter than the pool.
struct ConvClassifierSpec {
  std::vector<int> filters{3, 6, 9};
  int kernel = 3;
  int pool = 5;
  int dense = 50;
  float dropout = 0.5f;
};

std::vector<LayerSpec> conv_classifier_layers(int input_length, int class_count,
                                              const ConvClassifierSpec& spec);

// The two FordA architectures: filters (3, 6, 9) and (10, 50, 100, 150).
ConvClassifierSpec model_a_spec();
ConvClassifierSpec model_b_spec();

struct ForwardTrace {
  std::vector<Series> outputs;       // output of each layer
  std::vector<Series> dropout_scale; // per layer; empty unless an active Dropout
  std::vector<float> logits;
  std::vector<float> probabilities;
  std::vector<float> penultimate;    // input of the final Dense layer

  int predicted_class() const;
};

ForwardTrace forward(const Model& model, std::span<const float> x, bool dropout_active = false,
                     std::uint64_t rng_seed = 0);

std::vector<float> softmax(std::span<const float> logits);

int predict(const Model& model, std::span<const float> x);
std::vector<int> predict_all(const Model& model, std::span<const Series> samples);

/// d(dlogits . logits)/dx for a trace produced with dropout inactive.
std::vector<double> input_vjp(const Model& model, std::span<const float> x,
                              const ForwardTrace& trace, std::span<const double> dlogits);

/// Gradient of logit[target_class] with respect to the input.
Series backward_input(const Model& model, std::span<const float> x, int target_class);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochStats {
  double loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = -1.0;  // negative when the dataset has no test split
};

struct TrainResult {
  Model model;
  std::vector<EpochStats> history;
};

/// Cross-entropy + Adam over the train split (all samples when there is none).
TrainResult train(Model model, const TimeSeriesDataset& dataset, const TrainConfig& config);

double accuracy(const Model& model, const TimeSeriesDataset& dataset, Split split);

std::vector<float> activation_vector(const Model& model, std::span<const float> x);

struct ActivationMaxConfig {
  int steps = 256;
  double learning_rate = 0.1;
  double l2 = 1e-3;
};

/// Gradient ascent on logit[target] - l2 * |x|^2 starting from `init`. The L2
/// term is applied as a proximal step so large penalties stay stable.
Series activation_maximization(const Model& model, int target_class, std::span<const float> init,
                               const ActivationMaxConfig& config = {});

// Starts from the mean training sample of `target_class` (zeros if none).
Series activation_maximization(const Model& model, int target_class,
                               const TimeSeriesDataset& dataset,
                               const ActivationMaxConfig& config = {});

struct Uncertainty {
  std::vector<float> mean;
  std::vector<float> std;
};

Uncertainty mc_dropout_predict(const Model& model, std::span<const float> x, int passes = 25,
                               std::uint64_t seed = 0);

std::string to_manifest(const Model& model);
Model from_manifest(std::string_view text);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace tsexplain::nn
