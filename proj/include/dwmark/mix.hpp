// Copyright (c) 2026 dwmark contributors
// SPDX-License-Identifier: Apache-2.0
//
// The keyed 64-bit mixer behind every green/red decision. This is an interop
// contract: an independent implementation that follows the recipe below must
// produce identical bits, otherwise its detector and ours will disagree about
// which tokens are green.
//
//   fmix64(x):   x ^= x >> 33
//                x *= 0xff51afd7ed558ccd
//                x ^= x >> 33
//                x *= 0xc4ceb9fe1a85ec53
//                x ^= x >> 33
//   (the published MurmurHash3 64-bit finalizer; full avalanche)
//
//   mix_words(w_1 .. w_n):
//                h = 0x9e3779b97f4a7c15        (2^64 / golden ratio)
//                for i in 1..n:  h = fmix64(h xor w_i)
//                return h
//
// Messages are sequences of unsigned 64-bit words. Wider values are split
// little-endian (low word first); narrower values are zero-extended. The
// watermark module documents the exact word layout it feeds through here.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>

namespace dwmark {

inline constexpr std::uint64_t kMixSeed = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t fmix64(std::uint64_t x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ULL;
  x ^= x >> 33;
  return x;
}

constexpr std::uint64_t mix_words(std::span<const std::uint64_t> words) {
  std::uint64_t h = kMixSeed;
  for (std::uint64_t w : words) h = fmix64(h ^ w);
  return h;
}

constexpr std::uint64_t mix_words(std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = kMixSeed;
  for (std::uint64_t w : words) h = fmix64(h ^ w);
  return h;
}

}  // namespace dwmark
