#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "support.hpp"
#include "tsexplain/error.hpp"
#include "tsexplain/evaluation.hpp"
#include "tsexplain/seed.hpp"

namespace tsexplain {
namespace {

using attr::Method;
using eval::PerturbationConfig;
using eval::Regime;
using eval::Strategy;
using eval::Threshold;

PerturbationConfig config(Regime r, Strategy s, Threshold t = Threshold::top_percent(10), int span = 5) {
  PerturbationConfig c;
  c.regime = r;
  c.strategy = s;
  c.threshold = t;
  c.span = span;
  return c;
}

// Attribution mass only at `index` for every sample of the dataset.
attr::MethodAttributions spike_attributions(const TimeSeriesDataset& ds, std::size_t index) {
  attr::MethodAttributions m;
  m.method = Method::kSaliency;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    Series v(ds.length(), 0.0f);
    v[index] = 1.0f;
    m.samples.push_back(i);
    m.values.push_back(v);
    m.targets.push_back(0);
    m.std.push_back(attr::population_std(v));
  }
  return m;
}

TEST(SelectRelevant, TopPercentAbsAndTies) {
  const Series v{0.9f, 0.1f, 0.5f, 0.7f};
  EXPECT_EQ(eval::select_relevant(v, Threshold::top_percent(50)), (std::vector<std::size_t>{0, 3}));
  EXPECT_TRUE(eval::select_relevant(v, Threshold::abs_value(2.0)).empty());
  EXPECT_EQ(eval::select_relevant(Series(4, 0.3f), Threshold::top_percent(25)),
            (std::vector<std::size_t>{0}));
  EXPECT_EQ(eval::select_relevant(Series{-0.8f, 0.1f, 0.5f}, Threshold::abs_value(0.5)),
            (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(eval::select_relevant(Series(100, 1.0f), Threshold::top_percent(1)).size(), 1u);
  EXPECT_EQ(eval::select_relevant(Series(7, 1.0f), Threshold::top_percent(10)).size(), 1u);
}

TEST(Perturb, PointStrategies) {
  const Series x{1, 2, 3};
  const std::vector<std::size_t> one{1};
  const DatasetStats stats{0.5, -4.0, 9.0};
  EXPECT_EQ(eval::perturb(x, one, config(Regime::kPoint, Strategy::kZero), stats), (Series{1, 0, 3}));
  EXPECT_EQ(eval::perturb(x, one, config(Regime::kPoint, Strategy::kInverse), stats), (Series{1, -2, 3}));
  EXPECT_EQ(eval::perturb(x, one, config(Regime::kPoint, Strategy::kMean), stats), (Series{1, 0.5f, 3}));
  EXPECT_EQ(eval::perturb(x, one, config(Regime::kPoint, Strategy::kMin), stats), (Series{1, -4, 3}));
  EXPECT_EQ(eval::perturb(x, one, config(Regime::kPoint, Strategy::kMax), stats), (Series{1, 9, 3}));
}

TEST(Perturb, TimeSwapAndClamping) {
  const DatasetStats stats{};
  const std::vector<std::size_t> mid{2};
  EXPECT_EQ(eval::perturb(Series{1, 2, 3, 4, 5}, mid, config(Regime::kTime, Strategy::kSwap, {}, 3), stats),
            (Series{1, 4, 3, 2, 5}));
  const std::vector<std::size_t> edge{0};
  EXPECT_EQ(eval::perturb(Series{1, 2, 3, 4, 5}, edge, config(Regime::kTime, Strategy::kZero, {}, 3), stats),
            (Series{0, 0, 3, 4, 5}));
  // Windows [0,2] and [2,4] share index 2 and are reversed as one block.
  const std::vector<std::size_t> two{1, 3};
  EXPECT_EQ(eval::perturb(Series{1, 2, 3, 4, 5, 6}, two, config(Regime::kTime, Strategy::kSwap, {}, 3), stats),
            (Series{5, 4, 3, 2, 1, 6}));
}

TEST(Perturb, Errors) {
  const DatasetStats stats{};
  const std::vector<std::size_t> bad{3};
  for (Regime r : {Regime::kPoint, Regime::kTime}) {
    try {
      eval::perturb(Series{1, 2, 3}, bad, config(r, Strategy::kZero), stats);
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kIndexOutOfRange);
    }
  }
  try {
    eval::perturb(Series{1, 2, 3}, std::vector<std::size_t>{0}, config(Regime::kPoint, Strategy::kSwap), stats);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidConfig);
  }
}

TEST(PerturbProperty, OutsideWindowsUntouchedAndSwapPreservesMultiset) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t length = 5 + rng() % 40;
    const int span = 1 + static_cast<int>(rng() % 7);
    auto x = testing::random_series(static_cast<int>(length), trial);
    std::vector<std::size_t> idx;
    for (std::size_t k = 0, n = 1 + rng() % 4; k < n; ++k) idx.push_back(rng() % length);
    const auto windows = eval::merged_windows(idx, length, span);
    for (Strategy s : {Strategy::kZero, Strategy::kSwap}) {
      auto y = eval::perturb(x, idx, config(Regime::kTime, s, {}, span), DatasetStats{});
      std::vector<bool> inside(length, false);
      for (auto [a, b] : windows) {
        for (auto t = a; t <= b; ++t) inside[t] = true;
        if (s == Strategy::kSwap) {
          Series before(x.begin() + a, x.begin() + b + 1), after(y.begin() + a, y.begin() + b + 1);
          std::sort(before.begin(), before.end());
          std::sort(after.begin(), after.end());
          EXPECT_EQ(before, after);
        }
      }
      for (std::size_t t = 0; t < length; ++t) {
        if (!inside[t]) EXPECT_EQ(x[t], y[t]);
      }
    }
    for (std::size_t k = 1; k < windows.size(); ++k) EXPECT_GT(windows[k].first, windows[k - 1].second);
  }
}

TEST(Evaluate, SelectorOracleDropsToChance) {
  auto ds = testing::selector_dataset(200, 100, 5, 1);
  auto model = testing::selector_model(100, 5);
  auto spike = spike_attributions(ds, 5);
  auto cfg = config(Regime::kPoint, Strategy::kZero, Threshold::top_percent(1));
  cfg.seed = 11;
  auto r = eval::evaluate_method(model, ds, spike, cfg);
  EXPECT_DOUBLE_EQ(r.acc_before, 1.0);
  EXPECT_NEAR(r.acc_after, 0.5, 0.1);
  EXPECT_NEAR(r.drop, 0.5, 0.1);
  ASSERT_TRUE(r.random_drop.has_value());
  EXPECT_TRUE(r.beats_random);
}

TEST(Evaluate, RandomAttributionRarelyHitsDecisivePoint) {
  auto ds = testing::selector_dataset(200, 100, 5, 2);
  auto model = testing::selector_model(100, 5);
  int small = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    attr::MethodAttributions m;
    m.method = Method::kRandom;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      m.samples.push_back(i);
      m.values.push_back(attr::random_values(ds.length(), derive_seed(seed, i)));
    }
    auto cfg = config(Regime::kPoint, Strategy::kZero, Threshold::top_percent(1));
    cfg.compare_random = false;
    auto r = eval::evaluate_method(model, ds, m, cfg);
    EXPECT_FALSE(r.random_drop.has_value());
    EXPECT_FALSE(r.beats_random);
    small += r.drop <= 0.1;
  }
  EXPECT_GE(small, 95);
}

TEST(Evaluate, EmptySelectionAndMissingAttributions) {
  auto ds = testing::selector_dataset(40, 20, 5, 3);
  auto model = testing::selector_model(20, 5);
  auto spike = spike_attributions(ds, 5);
  auto r = eval::evaluate_method(model, ds, spike,
                                 config(Regime::kPoint, Strategy::kZero, Threshold::abs_value(5.0)));
  EXPECT_DOUBLE_EQ(r.drop, 0.0);
  EXPECT_DOUBLE_EQ(*r.random_drop, 0.0);
  EXPECT_FALSE(r.beats_random);

  spike.samples.resize(3);
  spike.values.resize(3);
  try {
    eval::evaluate_method(model, ds, spike, config(Regime::kPoint, Strategy::kZero));
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingAttributions);
  }
}

eval::EvalResult result(Method m, double drop, std::optional<double> random, Strategy s = Strategy::kZero) {
  eval::EvalResult r;
  r.method = m;
  r.config = config(Regime::kPoint, s);
  r.drop = drop;
  r.random_drop = random;
  r.beats_random = random && drop > *random;
  return r;
}

TEST(Rank, OrdersAndFlagsBaseline) {
  std::vector<eval::EvalResult> rs{result(Method::kOcclusion, 0.10, 0.05),
                                   result(Method::kSaliency, 0.30, 0.05)};
  auto ranking = eval::rank_methods(rs);
  ASSERT_EQ(ranking.entries.size(), 2u);
  EXPECT_EQ(ranking.entries[0].method, Method::kSaliency);
  EXPECT_EQ(ranking.entries[1].method, Method::kOcclusion);
  EXPECT_TRUE(ranking.entries[0].beats_random);
  EXPECT_TRUE(ranking.entries[1].beats_random);

  std::vector<eval::EvalResult> weak{result(Method::kLime, 0.02, 0.05)};
  auto single = eval::rank_methods(weak);
  ASSERT_EQ(single.entries.size(), 1u);
  EXPECT_FALSE(single.entries[0].beats_random);
}

TEST(Rank, MeanAcrossConfigsTieBreakAndDeterminism) {
  std::vector<eval::EvalResult> rs{
      result(Method::kSaliency, 0.25, 0.0, Strategy::kZero), result(Method::kSaliency, 0.75, 0.0, Strategy::kInverse),
      result(Method::kGradInput, 0.5, 0.0, Strategy::kZero), result(Method::kGradInput, 0.5, 0.0, Strategy::kInverse),
      result(Method::kRandom, 0.9, std::nullopt)};
  auto ranking = eval::rank_methods(rs);
  ASSERT_EQ(ranking.entries.size(), 2u);
  EXPECT_EQ(ranking.entries[0].method, Method::kGradInput);  // "grad_input" < "saliency"
  EXPECT_DOUBLE_EQ(ranking.entries[1].mean_drop, 0.5);
  EXPECT_EQ(ranking.configs.size(), 2u);
  std::reverse(rs.begin(), rs.end());
  auto again = eval::rank_methods(rs);
  EXPECT_EQ(again.entries[0].method, Method::kGradInput);
  EXPECT_EQ(again.entries[1].method, Method::kSaliency);
}

TEST(Grid, DefaultShapeAndJson) {
  auto grid = eval::default_grid(4);
  EXPECT_EQ(grid.size(), 7u);
  for (const auto& c : grid) {
    EXPECT_NO_THROW(c.validate());
    EXPECT_DOUBLE_EQ(c.threshold.value, 10.0);
    EXPECT_EQ(c.span, 5);
  }
  auto ds = testing::selector_dataset(40, 20, 5, 3);
  auto model = testing::selector_model(20, 5);
  attr::AttributionMatrix matrix;
  matrix.insert(spike_attributions(ds, 5));
  auto results = eval::evaluate_grid(model, ds, matrix, grid);
  EXPECT_EQ(results.size(), 7u);
  auto text = eval::to_json(eval::rank_methods(results));
  EXPECT_EQ(text, eval::to_json(eval::rank_methods(eval::evaluate_grid(model, ds, matrix, grid))));
  EXPECT_NE(text.find("\"method\":\"saliency\""), std::string::npos);

  const auto table = eval::to_json(std::span<const eval::EvalResult>(results));
  const auto reloaded = eval::results_from_json(table);
  EXPECT_EQ(eval::to_json(std::span<const eval::EvalResult>(reloaded)), table);
  EXPECT_EQ(eval::to_json(eval::rank_methods(reloaded)), text);
}

TEST(EvalJson, ConfigRoundTripAndValidation) {
  eval::PerturbationConfig c;
  c.regime = eval::Regime::kTime;
  c.strategy = eval::Strategy::kSwap;
  c.threshold = eval::Threshold::abs_value(0.25);
  c.span = 7;
  c.seed = 12;
  const auto back = eval::config_from_json(eval::to_json(c));
  EXPECT_EQ(back.label(), c.label());
  EXPECT_EQ(back.seed, 12u);
  EXPECT_EQ(eval::to_json(back), eval::to_json(c));
  EXPECT_THROW(eval::config_from_json(R"({"regime":"point","strategy":"swap"})"), Error);
  EXPECT_THROW(eval::config_from_json(R"({"threshold":{"kind":"top_percent","value":0}})"), Error);
  EXPECT_THROW(eval::config_from_json("[1"), Error);
}

}  // namespace
}  // namespace tsexplain
