// Copyright (c) 2026 dwmark contributors
// SPDX-License-Identifier: Apache-2.0
//
// Byte-level additive-smoothed n-gram language model implementing the
// ModelBackend contract. It is the desk-scale stand-in for continual
// pretraining: training is counting, memorization is literal, and inserting a
// document into the training stream measurably lowers that document's
// perplexity.
//
// Counts are hierarchical: every position of every training document is
// counted once per context length 0..order-1 (levels), so prediction can back
// off to the longest context suffix that has data. Next-token probabilities
// at a level are (count + alpha) / (total + alpha * V); a context nobody has
// seen falls through to level 0, and an untrained model is exactly uniform.
//
// Contexts pack into a 64-bit key (one byte per token, most-recent last), so
// order is capped at 8 (7 context bytes + 1 candidate byte).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "dwmark/backend.hpp"
#include "dwmark/common.hpp"

namespace dwmark {

inline std::vector<token_id> bytes_to_tokens(std::string_view bytes) {
  std::vector<token_id> out;
  out.reserve(bytes.size());
  for (char c : bytes) out.push_back(static_cast<token_id>(static_cast<unsigned char>(c)));
  return out;
}

inline std::string tokens_to_bytes(std::span<const token_id> tokens) {
  std::string out;
  out.reserve(tokens.size());
  for (token_id t : tokens) {
    if (t > 0xff) throw invalid_argument("tokens_to_bytes: token id exceeds byte range");
    out.push_back(static_cast<char>(static_cast<unsigned char>(t)));
  }
  return out;
}

class NGramModel final : public ModelBackend {
 public:
  static constexpr int kMaxOrder = 8;

  explicit NGramModel(int order = 5, double alpha = 0.1, std::size_t vocab_size = 256)
      : order_(order), alpha_(alpha), vocab_size_(vocab_size) {
    if (order < 1 || order > kMaxOrder) throw invalid_argument("ngram: order must be in [1, 8]");
    if (!(alpha > 0.0) || !std::isfinite(alpha))
      throw invalid_argument("ngram: alpha must be finite and > 0");
    if (vocab_size < 2 || vocab_size > 256)
      throw invalid_argument("ngram: vocab_size must be in [2, 256]");
    counts_.resize(static_cast<std::size_t>(order));
    totals_.resize(static_cast<std::size_t>(order));
  }

  int order() const { return order_; }
  double alpha() const { return alpha_; }

  // ---- training ----------------------------------------------------------

  // Counts every window of one document. Windows never span documents: train
  // each document separately.
  void train_document(std::span<const token_id> doc) {
    for (token_id t : doc)
      if (t >= vocab_size_) throw invalid_argument("ngram: training token outside vocabulary");
    for (std::size_t i = 0; i < doc.size(); ++i) {
      const int max_level = static_cast<int>(std::min<std::size_t>(i, static_cast<std::size_t>(order_ - 1)));
      std::uint64_t ctx_key = 0;
      for (int level = 0; level <= max_level; ++level) {
        if (level > 0) ctx_key |= static_cast<std::uint64_t>(doc[i - static_cast<std::size_t>(level)])
                                  << (8 * (level - 1));
        ++counts_[static_cast<std::size_t>(level)][(ctx_key << 8) | doc[i]];
        ++totals_[static_cast<std::size_t>(level)][ctx_key];
      }
    }
  }

  void train_document(std::string_view bytes) { train_document(bytes_to_tokens(bytes)); }

  void train_corpus(std::span<const std::string> docs) {
    for (const auto& d : docs) train_document(std::string_view(d));
  }

  // Additional training on top of existing counts; equivalent count-for-count
  // to having trained on the concatenated corpus list.
  void continual_train(std::span<const std::string> docs) { train_corpus(docs); }

  // ---- backend contract ---------------------------------------------------

  VocabInfo vocab() const override { return {vocab_size_, true}; }

  std::vector<double> next_token_logits(std::span<const token_id> context) const override {
    for (token_id t : context)
      if (t >= vocab_size_) throw invalid_argument("ngram: context token outside vocabulary");
    const auto [level, ctx_key, total] = backoff(context);
    std::vector<double> logits(vocab_size_);
    const double denom = static_cast<double>(total) + alpha_ * static_cast<double>(vocab_size_);
    const auto& level_counts = counts_[level];
    for (std::size_t v = 0; v < vocab_size_; ++v) {
      const auto it = level_counts.find((ctx_key << 8) | static_cast<std::uint64_t>(v));
      const double c = it == level_counts.end() ? 0.0 : static_cast<double>(it->second);
      logits[v] = std::log((c + alpha_) / denom);
    }
    return logits;
  }

  // Native scoring path: evaluates the smoothed probability of each observed
  // token directly instead of materializing full logit vectors. Agrees with
  // the generic implementation up to its softmax normalization residue
  // (|difference| < 1e-12 per token; the smoothed probabilities already sum
  // to one in exact arithmetic).
  ScoredDocument score_sequence(std::span<const token_id> tokens) const override {
    if (tokens.size() < 2) throw invalid_argument("score_sequence needs >= 2 tokens");
    for (token_id t : tokens)
      if (t >= vocab_size_) throw invalid_argument("score_sequence: token id outside vocabulary");
    std::vector<double> lps(tokens.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 1; i < tokens.size(); ++i) {
      const auto [level, ctx_key, total] = backoff(tokens.subspan(0, i));
      const auto it = counts_[level].find((ctx_key << 8) | static_cast<std::uint64_t>(tokens[i]));
      const double c = it == counts_[level].end() ? 0.0 : static_cast<double>(it->second);
      const double denom = static_cast<double>(total) + alpha_ * static_cast<double>(vocab_size_);
      lps[i] = std::log((c + alpha_) / denom);
    }
    return make_scored_document(std::vector<token_id>(tokens.begin(), tokens.end()),
                                std::move(lps));
  }

  std::string token_repr(token_id id) const override {
    if (id >= vocab_size_) return "<invalid>";
    if (id >= 0x20 && id < 0x7f) return std::string("'") + static_cast<char>(id) + "'";
    char buf[8];
    std::snprintf(buf, sizeof buf, "0x%02x", id);
    return buf;
  }

  // ---- inspection (tests, invariant checks) -------------------------------

  std::uint64_t window_count(std::span<const token_id> context, token_id tok) const {
    require_level(context.size());
    const auto& m = counts_[context.size()];
    const auto it = m.find((pack(context) << 8) | static_cast<std::uint64_t>(tok));
    return it == m.end() ? 0 : it->second;
  }

  std::uint64_t context_total(std::span<const token_id> context) const {
    require_level(context.size());
    const auto& m = totals_[context.size()];
    const auto it = m.find(pack(context));
    return it == m.end() ? 0 : it->second;
  }

  // ---- checkpoint ----------------------------------------------------------
  //
  // Flat little-endian binary: magic "DWNGRM01", u32 order, u32 vocab_size,
  // f64 alpha, then per level a u64 entry count followed by (u64 packed key,
  // u64 count) pairs sorted by key. Totals are rebuilt on load. Sorted entries
  // make save deterministic: load(save(m)) re-saves to identical bytes.

  void save(std::ostream& os) const {
    os.write(kMagic, 8);
    write_u32(os, static_cast<std::uint32_t>(order_));
    write_u32(os, static_cast<std::uint32_t>(vocab_size_));
    write_f64(os, alpha_);
    for (const auto& level : counts_) {
      std::vector<std::pair<std::uint64_t, std::uint64_t>> entries(level.begin(), level.end());
      std::sort(entries.begin(), entries.end());
      write_u64(os, entries.size());
      for (const auto& [k, v] : entries) {
        write_u64(os, k);
        write_u64(os, v);
      }
    }
    if (!os) throw error("ngram: checkpoint write failed");
  }

  void save_file(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw error("ngram: cannot open checkpoint for writing: " + path.string());
    save(os);
  }

  static NGramModel load(std::istream& is) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string_view(magic, 8) != kMagic)
      throw error("ngram: not a model checkpoint (bad magic)");
    const auto order = static_cast<int>(read_u32(is));
    const auto vocab = static_cast<std::size_t>(read_u32(is));
    const double alpha = read_f64(is);
    if (order < 1 || order > kMaxOrder || vocab < 2 || vocab > 256 || !(alpha > 0.0))
      throw error("ngram: checkpoint header out of range");
    NGramModel m(order, alpha, vocab);
    for (int level = 0; level < order; ++level) {
      const std::uint64_t n = read_u64(is);
      auto& cmap = m.counts_[static_cast<std::size_t>(level)];
      auto& tmap = m.totals_[static_cast<std::size_t>(level)];
      cmap.reserve(n);
      for (std::uint64_t i = 0; i < n; ++i) {
        const std::uint64_t key = read_u64(is);
        const std::uint64_t cnt = read_u64(is);
        if (!is) throw error("ngram: truncated checkpoint");
        cmap[key] = cnt;
        tmap[key >> 8] += cnt;
      }
    }
    if (!is) throw error("ngram: truncated checkpoint");
    return m;
  }

  static NGramModel load_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw error("ngram: cannot open checkpoint: " + path.string());
    return load(is);
  }

 private:
  static constexpr const char* kMagic = "DWNGRM01";

  static std::uint64_t pack(std::span<const token_id> context) {
    std::uint64_t key = 0;
    for (std::size_t i = 0; i < context.size(); ++i)
      key |= static_cast<std::uint64_t>(context[context.size() - 1 - i] & 0xff) << (8 * i);
    return key;
  }

  void require_level(std::size_t context_len) const {
    if (context_len >= static_cast<std::size_t>(order_))
      throw invalid_argument("ngram: context longer than order - 1");
  }

  // Longest context suffix (level) with observed data; level 0 otherwise.
  struct Backoff {
    std::size_t level;
    std::uint64_t ctx_key;
    std::uint64_t total;
  };
  Backoff backoff(std::span<const token_id> context) const {
    const auto start = std::min(context.size(), static_cast<std::size_t>(order_ - 1));
    for (std::size_t level = start; level > 0; --level) {
      const std::uint64_t key = pack(context.subspan(context.size() - level));
      const auto it = totals_[level].find(key);
      if (it != totals_[level].end() && it->second > 0) return {level, key, it->second};
    }
    const auto it = totals_[0].find(0);
    return {0, 0, it == totals_[0].end() ? 0 : it->second};
  }

  static void write_u32(std::ostream& os, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
  }
  static void write_u64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 8);
  }
  static void write_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(os, bits);
  }
  static std::uint32_t read_u32(std::istream& is) {
    char b[4] = {};
    is.read(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
  }
  static std::uint64_t read_u64(std::istream& is) {
    char b[8] = {};
    is.read(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
  }
  static double read_f64(std::istream& is) {
    const std::uint64_t bits = read_u64(is);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  int order_;
  double alpha_;
  std::size_t vocab_size_;
  // counts_[L]: packed (L context bytes, 1 token byte) -> count.
  // totals_[L]: packed L context bytes -> sum of counts over tokens.
  std::vector<absl::flat_hash_map<std::uint64_t, std::uint64_t>> counts_;
  std::vector<absl::flat_hash_map<std::uint64_t, std::uint64_t>> totals_;
};

}  // namespace dwmark
