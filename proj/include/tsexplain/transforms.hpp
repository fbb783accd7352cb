#pragma once

#include <complex>
#include <span>
#include <string_view>
#include <vector>

#include "tsexplain/data.hpp"

namespace tsexplain::transforms {

enum class Kind { kFft, kDct, kSax, kDeriv1, kDeriv2 };

std::string_view kind_name(Kind kind);
Kind parse_kind(std::string_view name);  // throws InvalidConfig
const std::vector<Kind>& all_kinds();

struct TransformParams {
  int sax_words = 20;
  int sax_alphabet = 4;
};

/// Full radix-2 spectrum of the series zero-padded to the next power of two.
std::vector<std::complex<double>> fft_padded(std::span<const float> series);

/// |X_k| for k = 0..floor(T/2) of the padded spectrum.
Series fft_magnitude(std::span<const float> series);

/// Orthonormal DCT-II, direct evaluation.
Series dct2(std::span<const float> series);

/// Frame means over W frames with bounds floor(i*T/W).
std::vector<double> paa(std::span<const float> series, int words);

/// Standard normal quantile.
double inverse_normal_cdf(double p);

/// The A-1 breakpoints Phi^-1(i/A), ascending.
std::vector<double> sax_breakpoints(int alphabet);

/// Symbol = number of breakpoints <= frame mean, so a value on a breakpoint
/// takes the upper symbol. Throws InvalidParams unless W <= T and 2 <= A <= 10.
std::vector<int> sax(std::span<const float> series, int words = 20, int alphabet = 4);

/// Forward difference with the last value repeated, applied `order` times.
Series derivative(std::span<const float> series, int order);

/// Feature vector for projection; SAX symbols are cast to float.
Series apply(Kind kind, std::span<const float> series, const TransformParams& params = {});

}  // namespace tsexplain::transforms
