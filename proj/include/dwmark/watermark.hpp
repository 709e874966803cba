// Copyright (c) 2026 dwmark contributors
// SPDX-License-Identifier: Apache-2.0
//
// Keyed green/red vocabulary partition and the one-proportion z-test that
// detects it. The decision procedure is an interop contract:
//
//   words  = [ secret.lo, secret.hi,
//              context[n-k], ..., context[n-1],   (the last k token ids,
//                                                  oldest first, zero-extended
//                                                  to 64 bits)
//              candidate ]
//   value  = mix_words(words)                      (see mix.hpp)
//   green  iff  value < floor(gamma * 2^64)
//
// A value exactly equal to the floored threshold is red. gamma * 2^64 is
// exactly representable in an IEEE double (the mantissa just shifts), so the
// threshold — and therefore every green/red verdict — is bit-exact across
// implementations. gamma >= 1 makes the whole vocabulary green; gamma <= 0
// makes none of it green.

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dwmark/common.hpp"
#include "dwmark/core.hpp"
#include "dwmark/mix.hpp"
#include "dwmark/stats.hpp"

namespace dwmark {

// Raw 64-bit mix for one (key, context tail, candidate) decision. Exposed so
// tests and alternative implementations can check against it directly.
inline std::uint64_t green_mix_value(const WatermarkKey& key,
                                     std::span<const token_id> context,
                                     token_id candidate, int context_width) {
  std::uint64_t h = kMixSeed;
  h = fmix64(h ^ key.secret.lo);
  h = fmix64(h ^ key.secret.hi);
  const std::size_t n = context.size();
  for (std::size_t i = n - static_cast<std::size_t>(context_width); i < n; ++i)
    h = fmix64(h ^ static_cast<std::uint64_t>(context[i]));
  h = fmix64(h ^ static_cast<std::uint64_t>(candidate));
  return h;
}

inline bool is_green(const WatermarkKey& key, std::span<const token_id> context,
                     token_id candidate, const WatermarkParams& params) {
  if (params.context_width < 1)
    throw invalid_argument("is_green: context_width must be >= 1");
  if (context.size() < static_cast<std::size_t>(params.context_width))
    throw invalid_argument("is_green: context shorter than context_width");
  if (params.gamma >= 1.0) return true;
  if (params.gamma <= 0.0) return false;
  // Exact: the product has the same mantissa as gamma, so no rounding occurs,
  // and the floor of an exact double is exact.
  const double scaled = std::floor(params.gamma * 0x1.0p64);
  if (scaled < 1.0) return false;
  const std::uint64_t threshold = static_cast<std::uint64_t>(scaled);
  return green_mix_value(key, context, candidate, params.context_width) < threshold;
}

// Returns a copy of `logits` with +delta applied to every green candidate id.
// Interpreting index as token id requires logits to cover the vocabulary.
inline std::vector<double> bias_logits(std::span<const double> logits,
                                       const WatermarkKey& key,
                                       std::span<const token_id> context,
                                       const WatermarkParams& params) {
  if (logits.empty()) throw invalid_argument("bias_logits: empty logits");
  std::vector<double> out(logits.begin(), logits.end());
  for (std::size_t v = 0; v < out.size(); ++v)
    if (is_green(key, context, static_cast<token_id>(v), params)) out[v] += params.delta;
  return out;
}

// ---------------------------------------------------------------------------
// Detection side
// ---------------------------------------------------------------------------

struct GreenStats {
  std::size_t green_count = 0;
  std::size_t total = 0;  // scored positions: |tokens| - context_width
  double fraction = 0.0;
};

// Counts green tokens over every position that has a full context window
// inside `tokens`. The first context_width tokens are never scored.
inline GreenStats green_fraction(const WatermarkKey& key, std::span<const token_id> tokens,
                                 const WatermarkParams& params) {
  const auto k = static_cast<std::size_t>(params.context_width);
  if (params.context_width < 1 || tokens.size() <= k)
    throw invalid_argument("green_fraction: need more tokens than context_width");
  GreenStats s;
  s.total = tokens.size() - k;
  for (std::size_t i = k; i < tokens.size(); ++i)
    if (is_green(key, tokens.subspan(0, i), tokens[i], params)) ++s.green_count;
  s.fraction = static_cast<double>(s.green_count) / static_cast<double>(s.total);
  return s;
}

struct WatermarkTest {
  GreenStats stats;
  double z = 0.0;  // (fraction - gamma) / sqrt(gamma (1-gamma) / total)
  double p = 1.0;  // upper-tail normal probability
};

inline WatermarkTest watermark_z_test(const GreenStats& stats, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw invalid_argument("watermark_z_test: gamma must lie in (0, 1)");
  if (stats.total == 0) throw invalid_argument("watermark_z_test: no scored positions");
  WatermarkTest t;
  t.stats = stats;
  const double se = std::sqrt(gamma * (1.0 - gamma) / static_cast<double>(stats.total));
  t.z = (stats.fraction - gamma) / se;
  t.p = stats::normal_sf(t.z);
  return t;
}

inline WatermarkTest watermark_z_test(const WatermarkKey& key,
                                      std::span<const token_id> tokens,
                                      const WatermarkParams& params) {
  return watermark_z_test(green_fraction(key, tokens, params), params.gamma);
}

}  // namespace dwmark
