#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "support.hpp"
#include "tsexplain/error.hpp"
#include "tsexplain/nn.hpp"

namespace tsexplain {
namespace {

using testing::dense_model;
using testing::linear_model;
using testing::random_conv_net;
using testing::random_series;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kNotFound;
}

TEST(Forward, IdentityDense) {
  auto model = dense_model(2, {{1, 0}, {0, 1}});
  auto trace = nn::forward(model, Series{0.2f, -0.1f});
  EXPECT_EQ(trace.logits, (std::vector<float>{0.2f, -0.1f}));
  EXPECT_EQ(trace.predicted_class(), 0);
}

TEST(Forward, ValidConvLength) {
  auto model = nn::Model::initialize(
      500, 2, {nn::Conv1D{1, 2, 3, 1}, nn::Flatten{}, nn::Dense{2 * 498, 2}}, 1);
  EXPECT_EQ(model.output_shape(0), (nn::Shape{2, 498}));
  auto trace = nn::forward(model, random_series(500, 1));
  EXPECT_EQ(trace.outputs[0].size(), 2u * 498u);
}

TEST(Forward, ShapeMismatch) {
  auto model = linear_model({1, 2, 3});
  EXPECT_EQ(code_of([&] { nn::forward(model, Series{1, 2}); }), ErrorCode::kShapeMismatch);
  EXPECT_EQ(code_of([&] {
              nn::Model::initialize(10, 2, {nn::Dense{9, 2}}, 0);
            }),
            ErrorCode::kShapeMismatch);
  EXPECT_EQ(code_of([&] {
              nn::Model::initialize(10, 3, {nn::Dense{10, 2}}, 0);
            }),
            ErrorCode::kShapeMismatch);
}

TEST(Softmax, NormalizedAndShiftInvariant) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto model = random_conv_net(48, 2 + seed % 3, seed);
    auto trace = nn::forward(model, random_series(48, seed + 100, 2.0));
    double sum = 0;
    for (float p : trace.probabilities) {
      EXPECT_GT(p, 0.0f);
      EXPECT_LT(p, 1.0f);
      sum += p;
    }
    EXPECT_NEAR(sum, 1.0, 1e-5);
    auto shifted = trace.logits;
    for (auto& v : shifted) v += 3.5f;
    auto p2 = nn::softmax(shifted);
    for (std::size_t c = 0; c < p2.size(); ++c) EXPECT_NEAR(p2[c], trace.probabilities[c], 1e-6);
  }
}

TEST(Backward, LinearGradientIsWeights) {
  std::vector<float> w{0.5f, -2.0f, 3.25f, 0.0f};
  auto g = nn::backward_input(linear_model(w), Series{1, 2, 3, 4}, 1);
  EXPECT_EQ(g, Series(w.begin(), w.end()));
}

TEST(Backward, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int t = 24 + static_cast<int>(seed % 5) * 8;
    auto model = random_conv_net(t, 2 + seed % 2, seed);
    const int target = static_cast<int>(seed % model.class_count());
    auto x = testing::smooth_point(model, t, target, 1000 + seed);
    auto g = nn::backward_input(model, x, target);
    auto fd = testing::finite_difference_gradient(model, x, target);
    double worst = 0;
    for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, testing::relative_error(g[i], fd[i]));
    EXPECT_LE(worst, 1e-3) << "seed " << seed;
  }
}

TEST(Backward, DeadReluBlocksGradient) {
  const int t = 4;
  const int dead = 2;
  nn::Layer hidden{nn::Dense{t, t}, std::vector<float>(t * t, 0.0f), std::vector<float>(t, 0.0f)};
  for (int i = 0; i < t; ++i) hidden.weights[i * t + i] = 1.0f;
  hidden.bias[dead] = -10.0f;
  nn::Layer out{nn::Dense{t, 2}, std::vector<float>(2 * t, 1.0f), std::vector<float>(2, 0.0f)};
  nn::Model model(t, 2, {hidden, nn::Layer{nn::ReLU{}, {}, {}}, out});
  auto g = nn::backward_input(model, Series{1, 1, 1, 1}, 0);
  EXPECT_EQ(g[dead], 0.0f);
  EXPECT_EQ(g[0], 1.0f);
}

TEST(Backward, MaxPoolTieGoesToFirstIndex) {
  nn::Model model(4, 2,
                  {nn::Layer{nn::MaxPool1D{2}, {}, {}},
                   nn::Layer{nn::Dense{2, 2}, {1, 1, 1, 1}, {0, 0}}});
  auto g = nn::backward_input(model, Series{3, 3, 1, 1}, 0);
  EXPECT_EQ(g, (Series{1, 0, 1, 0}));
}

TEST(ActivationVector, FlattenDensePassthrough) {
  nn::Model model(3, 2,
                  {nn::Layer{nn::Flatten{}, {}, {}},
                   nn::Layer{nn::Dense{3, 2}, std::vector<float>(6, 0.1f), {0, 0}}});
  Series x{0.5f, -1.0f, 2.0f};
  EXPECT_EQ(nn::activation_vector(model, x), x);
}

TEST(ActivationVector, ModelAHasFiftyUnits) {
  auto specs = nn::conv_classifier_layers(500, 2, nn::model_a_spec());
  auto model = nn::Model::initialize(500, 2, specs, 3);
  auto x = random_series(500, 4);
  auto a = nn::activation_vector(model, x);
  EXPECT_EQ(a.size(), 50u);
  EXPECT_EQ(nn::activation_vector(model, x), a);
}

TEST(Manifest, ModelALayout) {
  auto model = nn::Model::initialize(500, 2, nn::conv_classifier_layers(500, 2, nn::model_a_spec()), 3);
  std::vector<std::string> kinds;
  for (const auto& l : model.layers()) kinds.emplace_back(nn::layer_kind(l.spec));
  const std::vector<std::string> expected{"conv1d", "relu", "maxpool1d", "conv1d", "relu", "maxpool1d",
                                          "conv1d", "relu", "maxpool1d", "flatten", "dense", "relu",
                                          "dropout", "dense"};
  EXPECT_EQ(kinds, expected);
  const auto& dense = std::get<nn::Dense>(model.layers()[10].spec);
  EXPECT_EQ(dense.in, 27);  // 9 channels x 3 steps at T=500
  EXPECT_EQ(dense.out, 50);
}

TEST(Manifest, ModelBDropsFinalPool) {
  auto specs = nn::conv_classifier_layers(500, 2, nn::model_b_spec());
  auto model = nn::Model::initialize(500, 2, specs, 1);
  int convs = 0, pools = 0;
  for (const auto& l : model.layers()) {
    convs += std::holds_alternative<nn::Conv1D>(l.spec);
    pools += std::holds_alternative<nn::MaxPool1D>(l.spec);
  }
  EXPECT_EQ(convs, 4);
  EXPECT_EQ(pools, 3);
}

TEST(Manifest, RoundTripIsBitwise) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto model = nn::Model::initialize(64, 3, nn::conv_classifier_layers(64, 3, nn::ConvClassifierSpec{{4, 5}, 3, 2, 7, 0.3f}), seed);
    auto copy = nn::from_manifest(nn::to_manifest(model));
    for (std::size_t li = 0; li < model.layers().size(); ++li) {
      EXPECT_EQ(model.layers()[li].weights, copy.layers()[li].weights);
      EXPECT_EQ(model.layers()[li].bias, copy.layers()[li].bias);
    }
    for (int k = 0; k < 10; ++k) {
      auto x = random_series(64, seed * 100 + k);
      EXPECT_EQ(nn::forward(model, x).logits, nn::forward(copy, x).logits);
    }
  }
}

TEST(Manifest, Errors) {
  EXPECT_EQ(code_of([] { nn::from_manifest("{not json"); }), ErrorCode::kManifestParse);
  EXPECT_EQ(code_of([] {
              nn::from_manifest(R"({"input_length":2,"classes":2,"layers":[{"kind":"dense","in":2,"out":2,"weights":[[1,0],[0]],"bias":[0,0]}]})");
            }),
            ErrorCode::kShapeMismatch);
  EXPECT_EQ(code_of([] {
              nn::from_manifest(R"({"input_length":3,"classes":2,"layers":[{"kind":"dense","in":2,"out":2,"weights":[[1,0],[0,1]],"bias":[0,0]}]})");
            }),
            ErrorCode::kShapeMismatch);
  EXPECT_EQ(code_of([] {
              nn::from_manifest(R"({"input_length":2,"classes":2,"layers":[{"kind":"lstm"}]})");
            }),
            ErrorCode::kUnknownLayerKind);
}

TEST(Train, RejectsZeroEpochs) {
  nn::TrainConfig cfg;
  cfg.epochs = 0;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), ErrorCode::kInvalidArgument);
}

TEST(Train, SameSeedIsBitwiseIdentical) {
  auto ds = testing::sine_bump_dataset(40, 64, 5);
  auto specs = nn::conv_classifier_layers(64, 2, nn::ConvClassifierSpec{{3, 4}, 3, 2, 8, 0.5f});
  nn::TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.seed = 9;
  auto a = nn::train(nn::Model::initialize(64, 2, specs, 1), ds, cfg);
  auto b = nn::train(nn::Model::initialize(64, 2, specs, 1), ds, cfg);
  for (std::size_t li = 0; li < a.model.layers().size(); ++li) {
    EXPECT_EQ(a.model.layers()[li].weights, b.model.layers()[li].weights);
  }
  EXPECT_EQ(a.history.size(), 3u);
}

TEST(Train, ZeroLearningRateKeepsParameters) {
  auto ds = testing::sine_bump_dataset(20, 32, 2);
  auto specs = nn::conv_classifier_layers(32, 2, nn::ConvClassifierSpec{{2}, 3, 2, 4, 0.5f});
  auto initial = nn::Model::initialize(32, 2, specs, 4);
  nn::TrainConfig cfg;
  cfg.epochs = 2;
  cfg.learning_rate = 0.0;
  auto result = nn::train(initial, ds, cfg);
  for (std::size_t li = 0; li < initial.layers().size(); ++li) {
    EXPECT_EQ(initial.layers()[li].weights, result.model.layers()[li].weights);
    EXPECT_EQ(initial.layers()[li].bias, result.model.layers()[li].bias);
  }
}

TEST(Train, LearnsSeparableData) {
  auto ds = testing::sine_bump_dataset(80, 64, 8);
  auto specs = nn::conv_classifier_layers(64, 2, nn::ConvClassifierSpec{{4}, 5, 4, 8, 0.0f});
  nn::TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 16;
  cfg.learning_rate = 5e-3;
  auto result = nn::train(nn::Model::initialize(64, 2, specs, 2), ds, cfg);
  EXPECT_LT(result.history.back().loss, result.history.front().loss);
  EXPECT_GE(nn::accuracy(result.model, ds, Split::kTest), 0.9);
}

TEST(ActivationMax, LinearStationaryPoint) {
  std::vector<float> w{0.3f, -0.7f, 1.2f, 0.05f};
  nn::ActivationMaxConfig cfg;
  cfg.l2 = 0.5;
  auto x = nn::activation_maximization(linear_model(w), 1, Series(4, 0.0f), cfg);
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_NEAR(x[i], w[i] / (2 * cfg.l2), 0.01 * std::abs(w[i] / (2 * cfg.l2)));
  }
}

TEST(ActivationMax, LargePenaltyGivesZero) {
  nn::ActivationMaxConfig cfg;
  cfg.l2 = 1e3;
  auto x = nn::activation_maximization(linear_model({1, -2, 3}), 1, Series{5, 5, 5}, cfg);
  for (float v : x) EXPECT_NEAR(v, 0.0f, 2e-3);
}

TEST(ActivationMax, AscendsTargetLogit) {
  auto ds = testing::sine_bump_dataset(40, 48, 3);
  auto model = random_conv_net(48, 2, 17);
  for (int target = 0; target < 2; ++target) {
    auto x = nn::activation_maximization(model, target, ds);
    Series init(48, 0.0f);
    int count = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.split(i) != Split::kTrain || ds.label(i) != target) continue;
      for (int t = 0; t < 48; ++t) init[t] += ds.sample(i)[t];
      ++count;
    }
    for (auto& v : init) v /= static_cast<float>(count);
    EXPECT_GE(nn::forward(model, x).logits[target], nn::forward(model, init).logits[target]);
  }
}

TEST(McDropout, NoDropoutMeansZeroStd) {
  auto model = random_conv_net(32, 2, 1);
  auto u = nn::mc_dropout_predict(model, random_series(32, 2), 25, 3);
  for (float s : u.std) EXPECT_EQ(s, 0.0f);
  double sum = 0;
  for (float m : u.mean) sum += m;
  EXPECT_NEAR(sum, 1.0, 1e-5);
}

TEST(McDropout, SinglePassHasZeroStd) {
  auto model = nn::Model::initialize(100, 2, nn::conv_classifier_layers(100, 2, nn::model_a_spec()), 1);
  auto u = nn::mc_dropout_predict(model, random_series(100, 2), 1, 3);
  for (float s : u.std) EXPECT_EQ(s, 0.0f);
}

TEST(McDropout, ModelAIsStochastic) {
  auto model = nn::Model::initialize(500, 2, nn::conv_classifier_layers(500, 2, nn::model_a_spec()), 1);
  auto u = nn::mc_dropout_predict(model, random_series(500, 2), 25, 3);
  EXPECT_GT(*std::max_element(u.std.begin(), u.std.end()), 1e-6f);
  EXPECT_NEAR(u.mean[0] + u.mean[1], 1.0, 1e-5);
  EXPECT_EQ(nn::mc_dropout_predict(model, random_series(500, 2), 25, 3).mean, u.mean);
  EXPECT_EQ(code_of([&] { nn::mc_dropout_predict(model, random_series(500, 2), 0, 3); }),
            ErrorCode::kInvalidArgument);
}

TEST(Dropout, InvertedScalingPreservesExpectation) {
  const int t = 8;
  nn::Layer identity{nn::Dense{t, t}, std::vector<float>(t * t, 0.0f), std::vector<float>(t, 0.0f)};
  for (int i = 0; i < t; ++i) identity.weights[i * t + i] = 1.0f;
  nn::Model model(t, t, {nn::Layer{nn::Dropout{0.5f}, {}, {}}, identity});
  const int passes = 40000;
  std::vector<double> sum(t, 0.0);
  for (int k = 0; k < passes; ++k) {
    auto trace = nn::forward(model, Series(t, 1.0f), true, static_cast<std::uint64_t>(k));
    for (int i = 0; i < t; ++i) sum[i] += trace.logits[i];
  }
  for (int i = 0; i < t; ++i) EXPECT_NEAR(sum[i] / passes, 1.0, 0.02);
  EXPECT_EQ(nn::forward(model, Series(t, 1.0f), false).logits, Series(t, 1.0f));
}

}  // namespace
}  // namespace tsexplain
