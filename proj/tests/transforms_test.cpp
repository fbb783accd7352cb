#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "support.hpp"
#include "tsexplain/error.hpp"
#include "tsexplain/transforms.hpp"

namespace tsexplain {
namespace {

namespace tf = transforms;

// Bisection on the normal CDF written with erfc.
double quantile_by_bisection(double p) {
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t t = 0; t < n; ++t) {
      out[k] += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t) / n);
    }
  }
  return out;
}

TEST(Fft, CosineBin) {
  Series x(8);
  for (int t = 0; t < 8; ++t) x[t] = static_cast<float>(std::cos(2 * std::numbers::pi * 2 * t / 8));
  auto mag = tf::fft_magnitude(x);
  ASSERT_EQ(mag.size(), 5u);
  for (std::size_t k = 0; k < mag.size(); ++k) EXPECT_NEAR(mag[k], k == 2 ? 4.0 : 0.0, 1e-6);
}

TEST(Fft, ConstantIsDcOnly) {
  auto mag = tf::fft_magnitude(Series(8, -1.5f));
  EXPECT_NEAR(mag[0], 12.0, 1e-6);
  for (std::size_t k = 1; k < mag.size(); ++k) EXPECT_LE(mag[k], 1e-6);
}

TEST(Fft, MatchesNaiveDftAndParseval) {
  for (int length : {2, 5, 13, 64, 100}) {
    auto x = testing::random_series(length, length);
    const std::size_t padded = std::bit_ceil(static_cast<std::size_t>(length));
    std::vector<double> xp(padded, 0.0);
    std::copy(x.begin(), x.end(), xp.begin());
    auto ref = naive_dft(xp);
    auto got = tf::fft_padded(x);
    ASSERT_EQ(got.size(), padded);
    double energy_freq = 0.0, energy_time = 0.0;
    for (std::size_t k = 0; k < padded; ++k) {
      EXPECT_NEAR(std::abs(got[k] - ref[k]), 0.0, 1e-9);
      energy_freq += std::norm(got[k]);
      energy_time += xp[k] * xp[k];
    }
    EXPECT_LE(std::abs(energy_freq - padded * energy_time), 1e-6 * padded * energy_time);
    auto mag = tf::fft_magnitude(x);
    EXPECT_EQ(mag.size(), static_cast<std::size_t>(length / 2 + 1));
    EXPECT_NEAR(mag[0], std::abs(std::accumulate(x.begin(), x.end(), 0.0)), 1e-5);
  }
}

TEST(Fft, ShiftOnlyMovesDc) {
  // T = 64 needs no padding, so a constant shift is a pure DC term.
  auto x = testing::random_series(64, 5);
  Series y = x;
  for (auto& v : y) v += 3.0f;
  auto a = tf::fft_magnitude(x), b = tf::fft_magnitude(y);
  const double sum = std::accumulate(x.begin(), x.end(), 0.0);
  EXPECT_NEAR(b[0], std::abs(sum + 3.0 * 64), 1e-3);
  for (std::size_t k = 1; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-4);
}

TEST(Dct, ConstantAndOrthonormality) {
  auto c = tf::dct2(Series(9, 2.0f));
  EXPECT_NEAR(c[0], 2.0 * 3.0, 1e-5);
  for (std::size_t k = 1; k < c.size(); ++k) EXPECT_LE(std::abs(c[k]), 1e-6);
  for (int length : {2, 7, 32, 101}) {
    auto x = testing::random_series(length, 10 + length);
    auto y = tf::dct2(x);
    double nx = 0, ny = 0;
    for (float v : x) nx += v * v;
    for (float v : y) ny += v * v;
    EXPECT_LE(std::abs(std::sqrt(ny) - std::sqrt(nx)), 1e-5 * std::sqrt(nx));
    Series e(length, 0.0f);
    e[length / 3] = 1.0f;
    double ne = 0;
    for (float v : tf::dct2(e)) ne += v * v;
    EXPECT_NEAR(std::sqrt(ne), 1.0, 1e-6);
  }
}

TEST(Sax, BreakpointsMatchQuantileOracle) {
  auto bp = tf::sax_breakpoints(4);
  ASSERT_EQ(bp.size(), 3u);
  EXPECT_NEAR(bp[0], -0.6745, 1e-4);
  EXPECT_EQ(bp[1], 0.0);
  EXPECT_NEAR(bp[2], 0.6745, 1e-4);
  for (int a = 2; a <= 10; ++a) {
    auto b = tf::sax_breakpoints(a);
    ASSERT_EQ(b.size(), static_cast<std::size_t>(a - 1));
    for (int i = 1; i < a; ++i) EXPECT_NEAR(b[i - 1], quantile_by_bisection(static_cast<double>(i) / a), 1e-12);
  }
  for (double p : {1e-6, 0.01, 0.3, 0.97, 1 - 1e-6}) {
    EXPECT_NEAR(tf::inverse_normal_cdf(p), quantile_by_bisection(p), 1e-10);
  }
}

TEST(Sax, RampConstantAndErrors) {
  Series ramp(8);
  for (int t = 0; t < 8; ++t) ramp[t] = static_cast<float>(t);
  EXPECT_EQ(tf::sax(ramp, 4, 4), (std::vector<int>{0, 1, 2, 3}));
  for (int a = 2; a <= 10; ++a) {
    for (int s : tf::sax(Series(12, 7.0f), 4, a)) EXPECT_EQ(s, a / 2);
  }
  for (auto [w, a] : {std::pair{9, 4}, std::pair{4, 1}, std::pair{4, 11}, std::pair{0, 4}}) {
    try {
      tf::sax(ramp, w, a);
      ADD_FAILURE() << w << " " << a;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidParams);
    }
  }
}

TEST(Sax, RangeProperty) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const int length = 4 + static_cast<int>(rng() % 60);
    const int words = 1 + static_cast<int>(rng() % length);
    const int alphabet = 2 + static_cast<int>(rng() % 9);
    auto x = testing::random_series(length, trial);
    auto s = tf::sax(x, words, alphabet);
    EXPECT_EQ(s, tf::sax(x, words, alphabet));
    ASSERT_EQ(s.size(), static_cast<std::size_t>(words));
    for (int v : s) {
      EXPECT_GE(v, 0);
      EXPECT_LT(v, alphabet);
    }
  }
}

TEST(Derivative, Examples) {
  EXPECT_EQ(tf::derivative(Series{1, 3, 6}, 1), (Series{2, 3, 3}));
  Series ramp(10);
  for (int t = 0; t < 10; ++t) ramp[t] = 0.5f * t - 1.0f;
  for (float v : tf::derivative(ramp, 1)) EXPECT_FLOAT_EQ(v, 0.5f);
  for (float v : tf::derivative(ramp, 2)) EXPECT_FLOAT_EQ(v, 0.0f);
  EXPECT_EQ(tf::derivative(Series{1, 3, 6}, 2), (Series{1, 0, 0}));
}

TEST(Apply, LengthsPerKind) {
  auto x = testing::random_series(30, 1);
  EXPECT_EQ(tf::apply(tf::Kind::kFft, x).size(), 16u);
  EXPECT_EQ(tf::apply(tf::Kind::kDct, x).size(), 30u);
  EXPECT_EQ(tf::apply(tf::Kind::kSax, x).size(), 20u);
  EXPECT_EQ(tf::apply(tf::Kind::kDeriv1, x).size(), 30u);
  EXPECT_EQ(tf::apply(tf::Kind::kDeriv2, x).size(), 30u);
  EXPECT_EQ(tf::parse_kind("deriv2"), tf::Kind::kDeriv2);
}

}  // namespace
}  // namespace tsexplain
