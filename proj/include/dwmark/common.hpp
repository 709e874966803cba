// Copyright (c) 2026 dwmark contributors
// SPDX-License-Identifier: Apache-2.0
//
// Shared basics: error types, deterministic RNG helpers, small numeric
// utilities. Everything downstream includes this header.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dwmark {

// Dense token id in [0, vocab_size). The toy model uses byte values.
using token_id = std::uint32_t;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

// Base class for everything this library throws on purpose.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller handed us something that violates a precondition.
class invalid_argument : public error {
 public:
  using error::error;
};

// A manifest failed an integrity check (parse error, duplicate ids, ...).
class manifest_error : public error {
 public:
  using error::error;
};

// A backend call failed (transport error, protocol violation, bad reply).
class backend_error : public error {
 public:
  using error::error;
};

// The selected backend cannot do what was asked (e.g. no full distributions).
class unsupported_backend : public error {
 public:
  using error::error;
};

// ---------------------------------------------------------------------------
// Deterministic randomness
//
// All sampling goes through these helpers on top of std::mt19937_64 so that
// results are reproducible across standard libraries; the distributions in
// <random> are implementation-defined and must not leak into anything that
// ends up in a report.
// ---------------------------------------------------------------------------

// Uniform double in [0, 1) with 53 random bits.
inline double rand_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n). Rejection sampling, no modulo bias.
inline std::uint64_t rand_below(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) throw invalid_argument("rand_below: n must be positive");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

// ---------------------------------------------------------------------------
// Numerics
// ---------------------------------------------------------------------------

// log(sum(exp(v))) with the usual max shift for stability.
inline double logsumexp(std::span<const double> v) {
  if (v.empty()) throw invalid_argument("logsumexp: empty input");
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;  // all -inf (or a +inf dominates)
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// Sample mean.
inline double mean_of(std::span<const double> v) {
  if (v.empty()) throw invalid_argument("mean_of: empty input");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Unbiased sample variance (n-1 denominator); 0 for n == 1.
inline double sample_variance(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n == 0) throw invalid_argument("sample_variance: empty input");
  if (n == 1) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(n - 1);
}

// Median (copies; fine for the sizes we deal with).
inline double median_of(std::vector<double> v) {
  if (v.empty()) throw invalid_argument("median_of: empty input");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------
// Text helpers
// ---------------------------------------------------------------------------

// Strict UTF-8 validity check (rejects overlongs, surrogates, > U+10FFFF).
// Document text must pass this so manifests stay plain JSON.
inline bool utf8_valid(std::string_view s) {
  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    std::size_t len;
    std::uint32_t cp;
    if (c < 0x80) { i += 1; continue; }
    else if ((c & 0xE0) == 0xC0) { len = 2; cp = c & 0x1F; }
    else if ((c & 0xF0) == 0xE0) { len = 3; cp = c & 0x0F; }
    else if ((c & 0xF8) == 0xF0) { len = 4; cp = c & 0x07; }
    else return false;
    if (i + len > n) return false;
    for (std::size_t j = 1; j < len; ++j) {
      const unsigned char cc = static_cast<unsigned char>(s[i + j]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (len == 2 && cp < 0x80) return false;
    if (len == 3 && cp < 0x800) return false;
    if (len == 4 && cp < 0x10000) return false;
    if (cp > 0x10FFFF) return false;
    if (cp >= 0xD800 && cp <= 0xDFFF) return false;
    i += len;
  }
  return true;
}

inline std::string slurp_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw error("cannot open file for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw error("read failed: " + path);
  return std::move(ss).str();
}

inline void spew_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw error("cannot open file for writing: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw error("write failed: " + path);
}

inline std::string hex_encode(std::span<const std::uint8_t> bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0x0F]);
  }
  return out;
}

inline std::vector<std::uint8_t> hex_decode(std::string_view hex) {
  if (hex.size() % 2 != 0) throw invalid_argument("hex_decode: odd length");
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw invalid_argument("hex_decode: bad hex digit");
  };
  std::vector<std::uint8_t> out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>(nib(hex[2 * i]) << 4 | nib(hex[2 * i + 1]));
  return out;
}

}  // namespace dwmark
