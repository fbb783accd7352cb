#include "tsexplain/transforms.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <string>

#include "tsexplain/error.hpp"

namespace tsexplain::transforms {
namespace {

void fft_in_place(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> w = std::polar(1.0, angle * static_cast<double>(k));
        const auto u = a[start + k];
        const auto v = a[start + k + len / 2] * w;
        a[start + k] = u + v;
        a[start + k + len / 2] = u - v;
      }
    }
  }
}

}  // namespace

std::string_view kind_name(Kind kind) {
  switch (kind) {
    case Kind::kFft: return "fft";
    case Kind::kDct: return "dct";
    case Kind::kSax: return "sax";
    case Kind::kDeriv1: return "deriv1";
    case Kind::kDeriv2: return "deriv2";
  }
  return "fft";
}

const std::vector<Kind>& all_kinds() {
  static const std::vector<Kind> kinds{Kind::kFft, Kind::kDct, Kind::kSax, Kind::kDeriv1, Kind::kDeriv2};
  return kinds;
}

Kind parse_kind(std::string_view name) {
  for (Kind k : all_kinds()) {
    if (kind_name(k) == name) return k;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown transform '" + std::string(name) + "'");
}

std::vector<std::complex<double>> fft_padded(std::span<const float> series) {
  const std::size_t n = std::bit_ceil(std::max<std::size_t>(series.size(), 1));
  std::vector<std::complex<double>> a(n);
  for (std::size_t i = 0; i < series.size(); ++i) a[i] = series[i];
  fft_in_place(a);
  return a;
}

Series fft_magnitude(std::span<const float> series) {
  const auto spectrum = fft_padded(series);
  Series out(series.size() / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = static_cast<float>(std::abs(spectrum[k]));
  return out;
}

Series dct2(std::span<const float> series) {
  const std::size_t n = series.size();
  Series out(n);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      acc += series[t] * std::cos(std::numbers::pi * (static_cast<double>(t) + 0.5) * static_cast<double>(k) /
                                  static_cast<double>(n));
    }
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
    out[k] = static_cast<float>(acc * scale);
  }
  return out;
}

std::vector<double> paa(std::span<const float> series, int words) {
  const std::size_t n = series.size();
  if (words < 1 || static_cast<std::size_t>(words) > n) {
    throw Error(ErrorCode::kInvalidParams, "word count must be in [1, T]");
  }
  std::vector<double> out(words);
  for (int i = 0; i < words; ++i) {
    const std::size_t a = static_cast<std::size_t>(i) * n / words;
    const std::size_t b = static_cast<std::size_t>(i + 1) * n / words;
    double sum = 0.0;
    for (std::size_t t = a; t < b; ++t) sum += series[t];
    out[i] = sum / static_cast<double>(b - a);
  }
  return out;
}

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -INFINITY;
    if (p == 1.0) return INFINITY;
    throw Error(ErrorCode::kInvalidArgument, "probability must be in [0, 1]");
  }
  // Acklam's rational approximation.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double low = 0.02425;
  double x;
  if (p < low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley step against erfc brings it to full double precision.
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

std::vector<double> sax_breakpoints(int alphabet) {
  if (alphabet < 2 || alphabet > 10) throw Error(ErrorCode::kInvalidParams, "alphabet must be in [2, 10]");
  std::vector<double> out;
  for (int i = 1; i < alphabet; ++i) {
    out.push_back(2 * i == alphabet ? 0.0 : inverse_normal_cdf(static_cast<double>(i) / alphabet));
  }
  return out;
}

std::vector<int> sax(std::span<const float> series, int words, int alphabet) {
  const auto breakpoints = sax_breakpoints(alphabet);
  if (words < 1 || static_cast<std::size_t>(words) > series.size()) {
    throw Error(ErrorCode::kInvalidParams, "word count must be in [1, T]");
  }
  const auto normalized = z_normalize(series);
  std::vector<int> out;
  for (double m : paa(normalized, words)) {
    int symbol = 0;
    for (double bp : breakpoints) symbol += bp <= m;
    out.push_back(symbol);
  }
  return out;
}

Series derivative(std::span<const float> series, int order) {
  if (order < 1 || order > 2) throw Error(ErrorCode::kInvalidParams, "derivative order must be 1 or 2");
  Series cur(series.begin(), series.end());
  for (int o = 0; o < order; ++o) {
    if (cur.size() < 2) break;
    Series next(cur.size());
    for (std::size_t t = 0; t + 1 < cur.size(); ++t) next[t] = cur[t + 1] - cur[t];
    next.back() = next[next.size() - 2];
    cur = std::move(next);
  }
  return cur;
}

Series apply(Kind kind, std::span<const float> series, const TransformParams& params) {
  switch (kind) {
    case Kind::kFft: return fft_magnitude(series);
    case Kind::kDct: return dct2(series);
    case Kind::kSax: {
      const auto symbols = sax(series, params.sax_words, params.sax_alphabet);
      return Series(symbols.begin(), symbols.end());
    }
    case Kind::kDeriv1: return derivative(series, 1);
    case Kind::kDeriv2: return derivative(series, 2);
  }
  return {};
}

}  // namespace tsexplain::transforms
