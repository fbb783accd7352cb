#include "tsexplain/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "text_io.hpp"
#include "tsexplain/error.hpp"
#include "tsexplain/seed.hpp"

namespace tsexplain::nn {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Shape propagate(const LayerSpec& spec, Shape in) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kShapeMismatch, msg); };
  return std::visit(
      overloaded{
          [&](const Conv1D& c) {
            if (c.kernel < 1 || c.stride < 1 || c.in_channels < 1 || c.out_channels < 1) {
              fail("conv1d: kernel, stride and channels must be >= 1");
            }
            if (in.channels != c.in_channels) {
              fail("conv1d expects " + std::to_string(c.in_channels) + " channels, got " +
                   std::to_string(in.channels));
            }
            if (in.length < c.kernel) fail("conv1d kernel longer than input");
            return Shape{c.out_channels, (in.length - c.kernel) / c.stride + 1};
          },
          [&](const ReLU&) { return in; },
          [&](const MaxPool1D& p) {
            if (p.size < 1) fail("maxpool1d size must be >= 1");
            if (in.length < p.size) fail("maxpool1d window longer than input");
            return Shape{in.channels, in.length / p.size};
          },
          [&](const Flatten&) { return Shape{1, in.size()}; },
          [&](const Dense& d) {
            if (d.in < 1 || d.out < 1) fail("dense sizes must be >= 1");
            if (in.channels != 1 || in.length != d.in) {
              fail("dense expects flat input of " + std::to_string(d.in) + ", got " +
                   std::to_string(in.channels) + "x" + std::to_string(in.length));
            }
            return Shape{1, d.out};
          },
          [&](const Dropout& d) {
            if (!(d.p >= 0.0f && d.p < 1.0f)) {
              throw Error(ErrorCode::kInvalidArgument, "dropout p must be in [0, 1)");
            }
            return in;
          },
      },
      spec);
}

std::pair<std::size_t, std::size_t> parameter_sizes(const LayerSpec& spec) {
  if (const auto* c = std::get_if<Conv1D>(&spec)) {
    return {static_cast<std::size_t>(c->out_channels) * c->in_channels * c->kernel,
            static_cast<std::size_t>(c->out_channels)};
  }
  if (const auto* d = std::get_if<Dense>(&spec)) {
    return {static_cast<std::size_t>(d->out) * d->in, static_cast<std::size_t>(d->out)};
  }
  return {0, 0};
}

struct ParamGrads {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;

  explicit ParamGrads(const Model& model) {
    for (const auto& layer : model.layers()) {
      weights.emplace_back(layer.weights.size(), 0.0);
      bias.emplace_back(layer.bias.size(), 0.0);
    }
  }
  void zero() {
    for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : bias) std::fill(b.begin(), b.end(), 0.0);
  }
};

// Reverse pass. `grad` holds d/d(logits) on entry. Parameter gradients are
// accumulated into `params` when given; the input gradient is written to
// `dinput` when given.
void backward_impl(const Model& model, std::span<const float> x, const ForwardTrace& trace,
                   std::vector<double> grad, ParamGrads* params, std::vector<double>* dinput) {
  const auto& layers = model.layers();
  for (std::size_t li = layers.size(); li-- > 0;) {
    const Layer& layer = layers[li];
    const Shape in_shape = model.input_shape(li);
    const Shape out_shape = model.output_shape(li);
    std::span<const float> input =
        li == 0 ? x : std::span<const float>(trace.outputs[li - 1]);
    const bool need_input_grad = li > 0 || dinput != nullptr;
    std::vector<double> next(need_input_grad ? static_cast<std::size_t>(in_shape.size()) : 0, 0.0);

    std::visit(
        overloaded{
            [&](const Conv1D& c) {
              const int lout = out_shape.length;
              const int lin = in_shape.length;
              for (int o = 0; o < c.out_channels; ++o) {
                for (int t = 0; t < lout; ++t) {
                  const double g = grad[static_cast<std::size_t>(o) * lout + t];
                  if (g == 0.0) continue;
                  if (params) params->bias[li][o] += g;
                  for (int ci = 0; ci < c.in_channels; ++ci) {
                    const std::size_t wbase =
                        (static_cast<std::size_t>(o) * c.in_channels + ci) * c.kernel;
                    const std::size_t ibase = static_cast<std::size_t>(ci) * lin + t * c.stride;
                    for (int k = 0; k < c.kernel; ++k) {
                      if (params) params->weights[li][wbase + k] += g * input[ibase + k];
                      if (need_input_grad) next[ibase + k] += g * layer.weights[wbase + k];
                    }
                  }
                }
              }
            },
            [&](const ReLU&) {
              if (!need_input_grad) return;
              for (std::size_t i = 0; i < next.size(); ++i) next[i] = input[i] > 0.0f ? grad[i] : 0.0;
            },
            [&](const MaxPool1D& p) {
              if (!need_input_grad) return;
              for (int ch = 0; ch < out_shape.channels; ++ch) {
                for (int t = 0; t < out_shape.length; ++t) {
                  const std::size_t base = static_cast<std::size_t>(ch) * in_shape.length + t * p.size;
                  std::size_t best = base;
                  for (int j = 1; j < p.size; ++j) {
                    if (input[base + j] > input[best]) best = base + j;
                  }
                  next[best] += grad[static_cast<std::size_t>(ch) * out_shape.length + t];
                }
              }
            },
            [&](const Flatten&) {
              if (need_input_grad) next = grad;
            },
            [&](const Dense& d) {
              for (int o = 0; o < d.out; ++o) {
                const double g = grad[o];
                if (g == 0.0) continue;
                if (params) params->bias[li][o] += g;
                const std::size_t wbase = static_cast<std::size_t>(o) * d.in;
                for (int i = 0; i < d.in; ++i) {
                  if (params) params->weights[li][wbase + i] += g * input[i];
                  if (need_input_grad) next[i] += g * layer.weights[wbase + i];
                }
              }
            },
            [&](const Dropout&) {
              if (!need_input_grad) return;
              const auto& scale = trace.dropout_scale[li];
              for (std::size_t i = 0; i < next.size(); ++i) {
                next[i] = scale.empty() ? grad[i] : grad[i] * scale[i];
              }
            },
        },
        layer.spec);
    grad = std::move(next);
  }
  if (dinput) *dinput = std::move(grad);
}

std::vector<double> softmax_double(std::span<const float> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(static_cast<double>(logits[i]) - top);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

int argmax(std::span<const float> values) {
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

}  // namespace

std::string_view layer_kind(const LayerSpec& spec) {
  return std::visit(overloaded{
                        [](const Conv1D&) { return std::string_view("conv1d"); },
                        [](const ReLU&) { return std::string_view("relu"); },
                        [](const MaxPool1D&) { return std::string_view("maxpool1d"); },
                        [](const Flatten&) { return std::string_view("flatten"); },
                        [](const Dense&) { return std::string_view("dense"); },
                        [](const Dropout&) { return std::string_view("dropout"); },
                    },
                    spec);
}

Model::Model(int input_length, int class_count, std::vector<Layer> layers)
    : input_length_(input_length), class_count_(class_count), layers_(std::move(layers)) {
  if (input_length_ < 1) throw Error(ErrorCode::kShapeMismatch, "input length must be >= 1");
  if (class_count_ < 2) throw Error(ErrorCode::kInvalidArgument, "model needs >= 2 classes");
  if (layers_.empty()) throw Error(ErrorCode::kShapeMismatch, "model has no layers");
  Shape shape{1, input_length_};
  shapes_.push_back(shape);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    shape = propagate(layers_[i].spec, shape);
    shapes_.push_back(shape);
    auto [nw, nb] = parameter_sizes(layers_[i].spec);
    if (layers_[i].weights.size() != nw || layers_[i].bias.size() != nb) {
      throw Error(ErrorCode::kShapeMismatch, "layer " + std::to_string(i) + " (" +
                                                 std::string(layer_kind(layers_[i].spec)) +
                                                 ") parameter count mismatch");
    }
  }
  const auto* last = std::get_if<Dense>(&layers_.back().spec);
  if (!last || last->out != class_count_) {
    throw Error(ErrorCode::kShapeMismatch, "final layer must be Dense with class_count outputs");
  }
}

Model Model::initialize(int input_length, int class_count, const std::vector<LayerSpec>& specs,
                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Layer> layers;
  for (const auto& spec : specs) {
    Layer layer{spec, {}, {}};
    auto [nw, nb] = parameter_sizes(spec);
    double fan_in = 0.0, fan_out = 0.0;
    if (const auto* c = std::get_if<Conv1D>(&spec)) {
      fan_in = static_cast<double>(c->in_channels) * c->kernel;
      fan_out = static_cast<double>(c->out_channels) * c->kernel;
    } else if (const auto* d = std::get_if<Dense>(&spec)) {
      fan_in = d->in;
      fan_out = d->out;
    }
    layer.weights.resize(nw);
    layer.bias.assign(nb, 0.0f);
    if (nw > 0) {
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      for (auto& w : layer.weights) w = static_cast<float>((2.0 * unit_uniform(rng) - 1.0) * limit);
    }
    layers.push_back(std::move(layer));
  }
  return Model(input_length, class_count, std::move(layers));
}

bool Model::has_dropout() const {
  return std::any_of(layers_.begin(), layers_.end(), [](const Layer& l) {
    const auto* d = std::get_if<Dropout>(&l.spec);
    return d && d->p > 0.0f;
  });
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

std::vector<LayerSpec> conv_classifier_layers(int input_length, int class_count,
                                              const ConvClassifierSpec& spec) {
  std::vector<LayerSpec> layers;
  int channels = 1;
  int length = input_length;
  for (int filters : spec.filters) {
    layers.push_back(Conv1D{channels, filters, spec.kernel, 1});
    layers.push_back(ReLU{});
    length = length - spec.kernel + 1;
    if (length < 1) throw Error(ErrorCode::kShapeMismatch, "series too short for conv stack");
    if (spec.pool > 1 && length >= spec.pool) {
      layers.push_back(MaxPool1D{spec.pool});
      length /= spec.pool;
    }
    channels = filters;
  }
  layers.push_back(Flatten{});
  layers.push_back(Dense{channels * length, spec.dense});
  layers.push_back(ReLU{});
  if (spec.dropout > 0.0f) layers.push_back(Dropout{spec.dropout});
  layers.push_back(Dense{spec.dense, class_count});
  return layers;
}

ConvClassifierSpec model_a_spec() { return ConvClassifierSpec{{3, 6, 9}, 3, 5, 50, 0.5f}; }
ConvClassifierSpec model_b_spec() { return ConvClassifierSpec{{10, 50, 100, 150}, 3, 5, 50, 0.5f}; }

int ForwardTrace::predicted_class() const { return argmax(logits); }

ForwardTrace forward(const Model& model, std::span<const float> x, bool dropout_active,
                     std::uint64_t rng_seed) {
  if (static_cast<int>(x.size()) != model.input_length()) {
    throw Error(ErrorCode::kShapeMismatch, "input length " + std::to_string(x.size()) +
                                               " != model input length " +
                                               std::to_string(model.input_length()));
  }
  std::mt19937_64 rng(rng_seed);
  ForwardTrace trace;
  const auto& layers = model.layers();
  trace.outputs.resize(layers.size());
  trace.dropout_scale.resize(layers.size());
  std::span<const float> input = x;
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const Layer& layer = layers[li];
    const Shape in_shape = model.input_shape(li);
    const Shape out_shape = model.output_shape(li);
    Series out(static_cast<std::size_t>(out_shape.size()));
    std::visit(
        overloaded{
            [&](const Conv1D& c) {
              for (int o = 0; o < c.out_channels; ++o) {
                for (int t = 0; t < out_shape.length; ++t) {
                  double acc = layer.bias[o];
                  for (int ci = 0; ci < c.in_channels; ++ci) {
                    const float* w =
                        &layer.weights[(static_cast<std::size_t>(o) * c.in_channels + ci) * c.kernel];
                    const float* in =
                        &input[static_cast<std::size_t>(ci) * in_shape.length + t * c.stride];
                    for (int k = 0; k < c.kernel; ++k) acc += static_cast<double>(w[k]) * in[k];
                  }
                  out[static_cast<std::size_t>(o) * out_shape.length + t] = static_cast<float>(acc);
                }
              }
            },
            [&](const ReLU&) {
              for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(input[i], 0.0f);
            },
            [&](const MaxPool1D& p) {
              for (int ch = 0; ch < out_shape.channels; ++ch) {
                for (int t = 0; t < out_shape.length; ++t) {
                  const float* in = &input[static_cast<std::size_t>(ch) * in_shape.length + t * p.size];
                  out[static_cast<std::size_t>(ch) * out_shape.length + t] =
                      *std::max_element(in, in + p.size);
                }
              }
            },
            [&](const Flatten&) { std::copy(input.begin(), input.end(), out.begin()); },
            [&](const Dense& d) {
              for (int o = 0; o < d.out; ++o) {
                double acc = layer.bias[o];
                const float* w = &layer.weights[static_cast<std::size_t>(o) * d.in];
                for (int i = 0; i < d.in; ++i) acc += static_cast<double>(w[i]) * input[i];
                out[o] = static_cast<float>(acc);
              }
            },
            [&](const Dropout& d) {
              if (!dropout_active || d.p == 0.0f) {
                std::copy(input.begin(), input.end(), out.begin());
                return;
              }
              auto& scale = trace.dropout_scale[li];
              scale.resize(out.size());
              const float keep_scale = 1.0f / (1.0f - d.p);
              for (std::size_t i = 0; i < out.size(); ++i) {
                scale[i] = unit_uniform(rng) < d.p ? 0.0f : keep_scale;
                out[i] = input[i] * scale[i];
              }
            },
        },
        layer.spec);
    trace.outputs[li] = std::move(out);
    input = trace.outputs[li];
  }
  trace.logits = trace.outputs.back();
  const std::size_t last = layers.size() - 1;
  trace.penultimate = last == 0 ? Series(x.begin(), x.end()) : trace.outputs[last - 1];
  trace.probabilities = softmax(trace.logits);
  return trace;
}

std::vector<float> softmax(std::span<const float> logits) {
  auto p = softmax_double(logits);
  return std::vector<float>(p.begin(), p.end());
}

int predict(const Model& model, std::span<const float> x) {
  return forward(model, x).predicted_class();
}

std::vector<int> predict_all(const Model& model, std::span<const Series> samples) {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(predict(model, s));
  return out;
}

std::vector<double> input_vjp(const Model& model, std::span<const float> x,
                              const ForwardTrace& trace, std::span<const double> dlogits) {
  if (static_cast<int>(dlogits.size()) != model.class_count()) {
    throw Error(ErrorCode::kShapeMismatch, "dlogits size != class count");
  }
  std::vector<double> dinput;
  backward_impl(model, x, trace, std::vector<double>(dlogits.begin(), dlogits.end()), nullptr,
                &dinput);
  return dinput;
}

Series backward_input(const Model& model, std::span<const float> x, int target_class) {
  if (target_class < 0 || target_class >= model.class_count()) {
    throw Error(ErrorCode::kInvalidArgument, "target class out of range");
  }
  const auto trace = forward(model, x);
  std::vector<double> onehot(model.class_count(), 0.0);
  onehot[target_class] = 1.0;
  const auto g = input_vjp(model, x, trace, onehot);
  return Series(g.begin(), g.end());
}

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorCode::kInvalidArgument, "epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::kInvalidArgument, "learning_rate must be finite and >= 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid Adam hyper-parameters");
  }
}

double accuracy(const Model& model, const TimeSeriesDataset& dataset, Split split) {
  std::size_t hits = 0, total = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset.split(i) != split) continue;
    ++total;
    if (predict(model, dataset.sample(i)) == dataset.label(i)) ++hits;
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

TrainResult train(Model model, const TimeSeriesDataset& dataset, const TrainConfig& config) {
  config.validate();
  if (static_cast<int>(dataset.length()) != model.input_length() ||
      dataset.class_count() != model.class_count()) {
    throw Error(ErrorCode::kShapeMismatch, "dataset shape does not match model");
  }
  auto order = dataset.indices(Split::kTrain);
  if (order.empty()) {
    order.resize(dataset.size());
    std::iota(order.begin(), order.end(), 0);
  }
  const bool has_test = !dataset.indices(Split::kTest).empty();

  ParamGrads grads(model);
  ParamGrads m(model), v(model);
  m.zero();
  v.zero();
  std::mt19937_64 rng(config.seed);
  std::vector<EpochStats> history;
  long step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      grads.zero();
      for (std::size_t k = start; k < end; ++k) {
        const auto& x = dataset.sample(order[k]);
        const int y = dataset.label(order[k]);
        const auto trace = forward(model, x, true, rng());
        const auto p = softmax_double(trace.logits);
        loss_sum += -std::log(std::max(p[y], 1e-300));
        if (trace.predicted_class() == y) ++hits;
        std::vector<double> dlogits(p);
        dlogits[y] -= 1.0;
        for (auto& g : dlogits) g *= inv;
        backward_impl(model, x, trace, std::move(dlogits), &grads, nullptr);
      }
      ++step;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      auto update = [&](std::span<float> param, std::vector<double>& g, std::vector<double>& mm,
                        std::vector<double>& vv) {
        for (std::size_t i = 0; i < param.size(); ++i) {
          mm[i] = config.beta1 * mm[i] + (1.0 - config.beta1) * g[i];
          vv[i] = config.beta2 * vv[i] + (1.0 - config.beta2) * g[i] * g[i];
          const double delta =
              config.learning_rate * (mm[i] / c1) / (std::sqrt(vv[i] / c2) + config.epsilon);
          param[i] = static_cast<float>(param[i] - delta);
        }
      };
      for (std::size_t li = 0; li < model.layers().size(); ++li) {
        update(model.mutable_weights(li), grads.weights[li], m.weights[li], v.weights[li]);
        update(model.mutable_bias(li), grads.bias[li], m.bias[li], v.bias[li]);
      }
    }
    EpochStats stats;
    stats.loss = loss_sum / static_cast<double>(order.size());
    if (!std::isfinite(stats.loss)) {
      throw Error(ErrorCode::kNonFiniteLoss, "loss diverged at epoch " + std::to_string(epoch));
    }
    stats.train_accuracy = static_cast<double>(hits) / static_cast<double>(order.size());
    if (has_test) stats.test_accuracy = accuracy(model, dataset, Split::kTest);
    history.push_back(stats);
  }
  return TrainResult{std::move(model), std::move(history)};
}

std::vector<float> activation_vector(const Model& model, std::span<const float> x) {
  return forward(model, x).penultimate;
}

Series activation_maximization(const Model& model, int target_class, std::span<const float> init,
                               const ActivationMaxConfig& config) {
  if (target_class < 0 || target_class >= model.class_count()) {
    throw Error(ErrorCode::kInvalidArgument, "target class out of range");
  }
  if (static_cast<int>(init.size()) != model.input_length()) {
    throw Error(ErrorCode::kShapeMismatch, "init length != model input length");
  }
  std::vector<double> onehot(model.class_count(), 0.0);
  onehot[target_class] = 1.0;
  std::vector<double> x(init.begin(), init.end());
  Series xf(init.begin(), init.end());
  const double shrink = 1.0 + 2.0 * config.learning_rate * config.l2;
  for (int step = 0; step < config.steps; ++step) {
    const auto trace = forward(model, xf);
    const auto g = input_vjp(model, xf, trace, onehot);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = (x[i] + config.learning_rate * g[i]) / shrink;
      if (!std::isfinite(x[i]) || std::abs(x[i]) > 3.0e38) {
        throw Error(ErrorCode::kNonFinite, "activation maximization diverged");
      }
      xf[i] = static_cast<float>(x[i]);
    }
  }
  return xf;
}

Series activation_maximization(const Model& model, int target_class,
                               const TimeSeriesDataset& dataset, const ActivationMaxConfig& config) {
  std::vector<double> mean(static_cast<std::size_t>(model.input_length()), 0.0);
  std::size_t count = 0;
  if (static_cast<int>(dataset.length()) == model.input_length()) {
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (dataset.split(i) != Split::kTrain || dataset.label(i) != target_class) continue;
      const auto& s = dataset.sample(i);
      for (std::size_t t = 0; t < s.size(); ++t) mean[t] += s[t];
      ++count;
    }
  }
  Series init(mean.size(), 0.0f);
  if (count > 0) {
    for (std::size_t t = 0; t < mean.size(); ++t) {
      init[t] = static_cast<float>(mean[t] / static_cast<double>(count));
    }
  }
  return activation_maximization(model, target_class, init, config);
}

Uncertainty mc_dropout_predict(const Model& model, std::span<const float> x, int passes,
                               std::uint64_t seed) {
  if (passes < 1) throw Error(ErrorCode::kInvalidArgument, "passes must be >= 1");
  const std::size_t k = static_cast<std::size_t>(model.class_count());
  std::vector<double> mean(k, 0.0), m2(k, 0.0);
  for (int pass = 0; pass < passes; ++pass) {
    const auto trace = forward(model, x, true, derive_seed(seed, static_cast<std::uint64_t>(pass)));
    const auto p = softmax_double(trace.logits);
    for (std::size_t c = 0; c < k; ++c) {
      const double delta = p[c] - mean[c];
      mean[c] += delta / static_cast<double>(pass + 1);
      m2[c] += delta * (p[c] - mean[c]);
    }
  }
  Uncertainty out;
  for (std::size_t c = 0; c < k; ++c) {
    out.mean.push_back(static_cast<float>(mean[c]));
    out.std.push_back(static_cast<float>(std::sqrt(m2[c] / static_cast<double>(passes))));
  }
  return out;
}

}  // namespace tsexplain::nn
