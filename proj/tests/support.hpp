#pragma once

// Shared fixtures for the unit and acceptance suites: hand-built models with
// known closed forms, seeded synthetic datasets, and an f64 reference forward
// pass that shares no code with the engine.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "tsexplain/attributions.hpp"
#include "tsexplain/data.hpp"
#include "tsexplain/nn.hpp"

namespace tsexplain::testing {

// logits = W x + b with a single Dense layer.
inline nn::Model dense_model(int input_length, const std::vector<std::vector<float>>& rows,
                             std::vector<float> bias = {}) {
  const int classes = static_cast<int>(rows.size());
  nn::Layer layer{nn::Dense{input_length, classes}, {}, {}};
  for (const auto& r : rows) layer.weights.insert(layer.weights.end(), r.begin(), r.end());
  layer.bias = bias.empty() ? std::vector<float>(classes, 0.0f) : bias;
  return nn::Model(input_length, classes, {layer});
}

// Two-class linear model whose class-1 logit is w.x and class-0 logit is 0.
inline nn::Model linear_model(const std::vector<float>& w) {
  return dense_model(static_cast<int>(w.size()), {std::vector<float>(w.size(), 0.0f), w});
}

// Class 1 iff x[index] > 0: logit1 = x[index], logit0 = -x[index].
inline nn::Model selector_model(int input_length, int index) {
  std::vector<float> pos(input_length, 0.0f), neg(input_length, 0.0f);
  pos[index] = 1.0f;
  neg[index] = -1.0f;
  return dense_model(input_length, {neg, pos});
}

inline nn::Model constant_model(int input_length) {
  return dense_model(input_length,
                     {std::vector<float>(input_length, 0.0f), std::vector<float>(input_length, 0.0f)},
                     {0.25f, -0.25f});
}

// Random conv net: Conv -> ReLU -> MaxPool -> Conv -> ReLU -> Flatten -> Dense.
inline nn::Model random_conv_net(int input_length, int classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int c1 = 2 + static_cast<int>(rng() % 3);
  const int k1 = 2 + static_cast<int>(rng() % 4);
  const int pool = 2 + static_cast<int>(rng() % 2);
  const int c2 = 2 + static_cast<int>(rng() % 3);
  const int k2 = 2 + static_cast<int>(rng() % 3);
  int length = input_length - k1 + 1;
  length /= pool;
  length = length - k2 + 1;
  std::vector<nn::LayerSpec> specs{nn::Conv1D{1, c1, k1, 1}, nn::ReLU{},
                                   nn::MaxPool1D{pool},      nn::Conv1D{c1, c2, k2, 1},
                                   nn::ReLU{},               nn::Flatten{},
                                   nn::Dense{c2 * length, classes}};
  auto model = nn::Model::initialize(input_length, classes, specs, seed);
  // Non-zero biases so ReLU gates are mixed.
  std::normal_distribution<double> bias(0.0, 0.1);
  for (std::size_t i = 0; i < model.layers().size(); ++i) {
    for (auto& b : model.mutable_bias(i)) b = static_cast<float>(bias(rng));
  }
  return model;
}

inline Series random_series(int length, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, sd);
  Series s(length);
  for (auto& v : s) v = static_cast<float>(dist(rng));
  return s;
}

// Class 0: Gaussian noise sd 0.2. Class 1: same noise plus a half-sine bump
// over t in [100, 150] (scaled to the series length). Balanced, 80/20 split.
inline TimeSeriesDataset sine_bump_dataset(int n, int length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.2);
  const int lo = length * 100 / 200;
  const int hi = length * 150 / 200;
  std::vector<Series> samples;
  std::vector<int> labels;
  std::vector<Split> splits;
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    Series s(length);
    for (int t = 0; t < length; ++t) {
      double v = noise(rng);
      if (label == 1 && t >= lo && t <= hi) {
        v += std::sin(M_PI * static_cast<double>(t - lo) / static_cast<double>(hi - lo));
      }
      s[t] = static_cast<float>(v);
    }
    samples.push_back(std::move(s));
    labels.push_back(label);
    splits.push_back(i < n * 4 / 5 ? Split::kTrain : Split::kTest);
  }
  return TimeSeriesDataset(std::move(samples), std::move(labels), std::move(splits), 2);
}

// Balanced data for the selector model: x[index] = +-|N(1, 0.2)|, rest N(0,1).
inline TimeSeriesDataset selector_dataset(int n, int length, int index, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::normal_distribution<double> mag(1.0, 0.2);
  std::vector<Series> samples;
  std::vector<int> labels;
  std::vector<Split> splits;
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    Series s(length);
    for (auto& v : s) v = static_cast<float>(noise(rng));
    const double m = std::abs(mag(rng)) + 0.05;
    s[index] = static_cast<float>(label == 1 ? m : -m);
    samples.push_back(std::move(s));
    labels.push_back(label);
    splits.push_back(i % 4 >= 2 ? Split::kTrain : Split::kTest);
  }
  return TimeSeriesDataset(std::move(samples), std::move(labels), std::move(splits), 2);
}

// Gaussian blobs in `dims` dimensions, centres `separation` apart along
// distinct axes.
inline std::vector<Series> gaussian_clusters(int clusters, int per_cluster, int dims,
                                             double separation, std::uint64_t seed,
                                             std::vector<int>* labels) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<Series> rows;
  for (int c = 0; c < clusters; ++c) {
    for (int i = 0; i < per_cluster; ++i) {
      Series r(dims);
      for (int d = 0; d < dims; ++d) {
        r[d] = static_cast<float>(noise(rng) + (d == c % dims ? separation : 0.0));
      }
      rows.push_back(std::move(r));
      if (labels) labels->push_back(c);
    }
  }
  return rows;
}

// Fraction of k-nearest embedded neighbours (self excluded) sharing the label.
inline double knn_purity(std::span<const std::array<float, 2>> coords, const std::vector<int>& labels, int k) {
  std::size_t agree = 0, total = 0;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t j = 0; j < coords.size(); ++j) {
      if (j == i) continue;
      d.emplace_back(std::hypot(coords[i][0] - coords[j][0], coords[i][1] - coords[j][1]), j);
    }
    std::partial_sort(d.begin(), d.begin() + k, d.end());
    for (int m = 0; m < k; ++m) agree += labels[d[m].second] == labels[i];
    total += static_cast<std::size_t>(k);
  }
  return static_cast<double>(agree) / static_cast<double>(total);
}

// Independent f64 forward pass over the engine's layer descriptions.
inline std::vector<double> reference_logits(const nn::Model& model, const std::vector<double>& x) {
  std::vector<double> cur = x;
  int channels = 1;
  int length = static_cast<int>(x.size());
  for (const auto& layer : model.layers()) {
    std::vector<double> next;
    if (const auto* c = std::get_if<nn::Conv1D>(&layer.spec)) {
      const int lout = (length - c->kernel) / c->stride + 1;
      next.assign(static_cast<std::size_t>(c->out_channels) * lout, 0.0);
      for (int o = 0; o < c->out_channels; ++o)
        for (int t = 0; t < lout; ++t) {
          double acc = layer.bias[o];
          for (int i = 0; i < c->in_channels; ++i)
            for (int k = 0; k < c->kernel; ++k)
              acc += static_cast<double>(layer.weights[(o * c->in_channels + i) * c->kernel + k]) *
                     cur[i * length + t * c->stride + k];
          next[o * lout + t] = acc;
        }
      channels = c->out_channels;
      length = lout;
    } else if (std::holds_alternative<nn::ReLU>(layer.spec)) {
      next = cur;
      for (auto& v : next) v = v > 0 ? v : 0;
    } else if (const auto* p = std::get_if<nn::MaxPool1D>(&layer.spec)) {
      const int lout = length / p->size;
      next.assign(static_cast<std::size_t>(channels) * lout, 0.0);
      for (int ch = 0; ch < channels; ++ch)
        for (int t = 0; t < lout; ++t) {
          double best = cur[ch * length + t * p->size];
          for (int j = 1; j < p->size; ++j) best = std::max(best, cur[ch * length + t * p->size + j]);
          next[ch * lout + t] = best;
        }
      length = lout;
    } else if (std::holds_alternative<nn::Flatten>(layer.spec)) {
      next = cur;
      length = channels * length;
      channels = 1;
    } else if (const auto* d = std::get_if<nn::Dense>(&layer.spec)) {
      next.assign(d->out, 0.0);
      for (int o = 0; o < d->out; ++o) {
        double acc = layer.bias[o];
        for (int i = 0; i < d->in; ++i) acc += static_cast<double>(layer.weights[o * d->in + i]) * cur[i];
        next[o] = acc;
      }
      length = d->out;
    } else {
      next = cur;  // dropout inactive
    }
    cur = std::move(next);
  }
  return cur;
}

// Central differences of logit[target] with h = 1e-3 on the f64 reference.
inline std::vector<double> finite_difference_gradient(const nn::Model& model, const Series& x,
                                                      int target, double h = 1e-3) {
  std::vector<double> base(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto up = base, down = base;
    up[i] += h;
    down[i] -= h;
    grad[i] = (reference_logits(model, up)[target] - reference_logits(model, down)[target]) / (2 * h);
  }
  return grad;
}

// True when every coordinate's +-h stencil stays inside one linear piece of
// the (piecewise-linear) network, i.e. forward and backward one-sided slopes
// agree. Central differences are only a valid oracle at such points.
inline bool stencil_is_smooth(const nn::Model& model, const Series& x, int target, double h = 1e-3) {
  std::vector<double> base(x.begin(), x.end());
  const double f0 = reference_logits(model, base)[target];
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto up = base, down = base;
    up[i] += h;
    down[i] -= h;
    const double fwd = (reference_logits(model, up)[target] - f0) / h;
    const double bwd = (f0 - reference_logits(model, down)[target]) / h;
    if (std::abs(fwd - bwd) > 1e-8 * std::max({1.0, std::abs(fwd), std::abs(bwd)})) return false;
  }
  return true;
}

// First seeded draw (seed, seed + 7919, ...) whose stencil is kink-free.
inline Series smooth_point(const nn::Model& model, int length, int target, std::uint64_t seed) {
  for (int attempt = 0;; ++attempt) {
    auto x = random_series(length, seed + 7919ull * attempt);
    if (stencil_is_smooth(model, x, target) || attempt == 50) return x;
  }
}

inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Class-1 logit = sum_i w_i * mean(segment i), class 0 = 0.
inline nn::Model segment_mean_model(int length, int segments, const std::vector<float>& w) {
  std::vector<float> row(length, 0.0f);
  const auto bounds = attr::segment_bounds(length, segments);
  for (std::size_t s = 0; s < bounds.size(); ++s) {
    const auto n = static_cast<float>(bounds[s].second - bounds[s].first);
    for (auto t = bounds[s].first; t < bounds[s].second; ++t) row[t] = w[s] / n;
  }
  return dense_model(length, {std::vector<float>(length, 0.0f), row});
}

// Exact Shapley by enumerating all coalitions of the segment players.
inline std::vector<double> exact_shapley(const nn::Model& model, const Series& x, int segments, int c) {
  const auto bounds = attr::segment_bounds(x.size(), segments);
  const double fill = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  auto value = [&](unsigned mask) {
    std::vector<double> z(x.begin(), x.end());
    for (int s = 0; s < segments; ++s) {
      if (!(mask >> s & 1u)) {
        for (auto t = bounds[s].first; t < bounds[s].second; ++t) z[t] = static_cast<float>(fill);
      }
    }
    return testing::reference_logits(model, z)[c];
  };
  std::vector<double> phi(segments, 0.0);
  const unsigned full = (1u << segments) - 1;
  std::vector<double> fact(segments + 1, 1.0);
  for (int i = 1; i <= segments; ++i) fact[i] = fact[i - 1] * i;
  for (int i = 0; i < segments; ++i) {
    for (unsigned mask = 0; mask <= full; ++mask) {
      if (mask >> i & 1u) continue;
      const int size = __builtin_popcount(mask);
      const double weight = fact[size] * fact[segments - size - 1] / fact[segments];
      phi[i] += weight * (value(mask | 1u << i) - value(mask));
    }
  }
  return phi;
}

}  // namespace tsexplain::testing
