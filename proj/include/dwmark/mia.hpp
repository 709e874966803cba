// Copyright (c) 2026 dwmark contributors
// SPDX-License-Identifier: Apache-2.0
//
// Membership-inference score functions and their AUROC evaluation. Every
// score follows one sign convention: higher score = more member-like.
//
//   ppl               -nll_mean
//   zlib              -(nll_mean * conditioned_count) / compressed_size(text)
//   mink              mean of the ceil(k% * N) smallest conditioned logprobs
//   minkpp            like mink but over per-position standardized scores
//                     z_i = (logprob_i - mu_i) / sigma_i, with mu_i/sigma_i the
//                     probability-weighted moments of log-probabilities under
//                     the full next-token distribution (needs full logits;
//                     sigma_i = 0 contributes z_i = 0)
//   dcpdd-simplified  mean of (logprob_i - log f(token_i)) against a reference
//                     token-frequency table — a frequency-calibrated logprob
//                     (PMI-style), not the original calibrated divergence;
//                     hence the "-simplified" suffix in every report.
//
// Zlib uses DEFLATE at fixed level 6 so scores are reproducible.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <zlib.h>

#include "dwmark/backend.hpp"
#include "dwmark/common.hpp"
#include "dwmark/core.hpp"
#include "dwmark/parallel.hpp"
#include "dwmark/stats.hpp"
#include "dwmark/toylm.hpp"

namespace dwmark {

enum class MiaMethod { ppl, zlib, mink, minkpp, dcpdd_simplified };

inline const char* to_string(MiaMethod m) {
  switch (m) {
    case MiaMethod::ppl: return "ppl";
    case MiaMethod::zlib: return "zlib";
    case MiaMethod::mink: return "mink";
    case MiaMethod::minkpp: return "minkpp";
    case MiaMethod::dcpdd_simplified: return "dcpdd-simplified";
  }
  return "?";
}

inline MiaMethod mia_method_from_string(std::string_view s) {
  if (s == "ppl") return MiaMethod::ppl;
  if (s == "zlib") return MiaMethod::zlib;
  if (s == "mink") return MiaMethod::mink;
  if (s == "minkpp") return MiaMethod::minkpp;
  if (s == "dcpdd-simplified" || s == "dcpdd") return MiaMethod::dcpdd_simplified;
  throw invalid_argument("unknown membership-inference method: " + std::string(s));
}

struct MiaScore {
  MiaMethod method;
  std::string doc_id;
  double score = 0.0;
};

// ---------------------------------------------------------------------------
// Reference token frequencies (for dcpdd-simplified)
// ---------------------------------------------------------------------------

struct FrequencyTable {
  std::uint64_t total = 0;
  std::vector<std::uint64_t> counts;  // dense, size = vocab size

  static FrequencyTable from_corpus(std::span<const std::string> docs,
                                    std::size_t vocab_size = 256) {
    if (vocab_size < 2 || vocab_size > 256)
      throw invalid_argument("frequency table: vocab_size must be in [2, 256]");
    FrequencyTable t;
    t.counts.assign(vocab_size, 0);
    for (const auto& d : docs)
      for (unsigned char c : d) {
        if (c >= vocab_size)
          throw invalid_argument("frequency table: byte outside vocabulary");
        ++t.counts[c];
        ++t.total;
      }
    return t;
  }

  // Relative frequency with the floor f_min = 1 / (total + |V|) for unseen
  // tokens.
  double frequency(token_id id) const {
    if (counts.empty() || total == 0) throw invalid_argument("frequency table is empty");
    if (id >= counts.size()) throw invalid_argument("frequency lookup outside vocabulary");
    if (counts[id] == 0)
      return 1.0 / (static_cast<double>(total) + static_cast<double>(counts.size()));
    return static_cast<double>(counts[id]) / static_cast<double>(total);
  }

  nlohmann::json to_json() const {
    nlohmann::json sparse = nlohmann::json::object();
    for (std::size_t i = 0; i < counts.size(); ++i)
      if (counts[i] > 0) sparse[std::to_string(i)] = counts[i];
    return {{"total", total}, {"vocab_size", counts.size()}, {"counts", sparse}};
  }

  static FrequencyTable from_json(const nlohmann::json& j) {
    FrequencyTable t;
    try {
      const auto vocab = j.at("vocab_size").get<std::size_t>();
      if (vocab < 2 || vocab > 256) throw invalid_argument("frequency table: bad vocab_size");
      t.counts.assign(vocab, 0);
      t.total = j.at("total").get<std::uint64_t>();
      std::uint64_t sum = 0;
      for (const auto& [key, value] : j.at("counts").items()) {
        const auto id = static_cast<std::size_t>(std::stoul(key));
        if (id >= vocab) throw invalid_argument("frequency table: count id outside vocabulary");
        t.counts[id] = value.get<std::uint64_t>();
        sum += t.counts[id];
      }
      if (sum != t.total) throw invalid_argument("frequency table: total does not match counts");
    } catch (const nlohmann::json::exception& e) {
      throw invalid_argument(std::string("frequency table: malformed JSON: ") + e.what());
    }
    return t;
  }
};

// ---------------------------------------------------------------------------
// Score functions
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<double> conditioned(const ScoredDocument& d) {
  if (d.logprobs.size() < 2) throw invalid_argument("scored document has no conditioned positions");
  return std::vector<double>(d.logprobs.begin() + 1, d.logprobs.end());
}

// ceil(k% of n) with a guard against FP noise in the product (0.4 * 5 must
// select 2 values, not 3).
inline std::size_t bottom_k(double k_pct, std::size_t n) {
  if (!(k_pct > 0.0 && k_pct <= 100.0))
    throw invalid_argument("k_pct must lie in (0, 100]");
  auto k = static_cast<std::size_t>(std::ceil(k_pct / 100.0 * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(k, 1, n);
}

inline double mean_of_smallest(std::vector<double> values, std::size_t k) {
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k - 1),
                   values.end());
  // Sort the selected prefix so the sum is order-deterministic.
  std::sort(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k));
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += values[i];
  return sum / static_cast<double>(k);
}

inline std::size_t compressed_size(std::string_view text) {
  uLongf dest_len = compressBound(static_cast<uLong>(text.size()));
  std::vector<Bytef> buf(dest_len);
  const int rc = compress2(buf.data(), &dest_len, reinterpret_cast<const Bytef*>(text.data()),
                           static_cast<uLong>(text.size()), /*level=*/6);
  if (rc != Z_OK) throw error("zlib compression failed (rc=" + std::to_string(rc) + ")");
  return static_cast<std::size_t>(dest_len);
}

}  // namespace detail

inline double mia_ppl(const ScoredDocument& scored) { return -scored.nll_mean; }

inline double mia_zlib(std::string_view text, const ScoredDocument& scored) {
  if (text.empty()) throw invalid_argument("zlib score: empty text");
  const auto c = detail::compressed_size(text);
  const auto n = static_cast<double>(scored.tokens.size() - 1);
  return -(scored.nll_mean * n) / static_cast<double>(c);
}

inline double mia_mink(const ScoredDocument& scored, double k_pct = 20.0) {
  auto lps = detail::conditioned(scored);
  return detail::mean_of_smallest(std::move(lps), detail::bottom_k(k_pct, scored.tokens.size() - 1));
}

inline double mia_minkpp(const ModelBackend& backend, std::span<const token_id> tokens,
                         double k_pct = 20.0) {
  if (!backend.vocab().full_logits)
    throw unsupported_backend("minkpp needs full next-token distributions");
  if (tokens.size() < 2) throw invalid_argument("minkpp needs >= 2 tokens");
  std::vector<double> zs;
  zs.reserve(tokens.size() - 1);
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    const auto logits = backend.next_token_logits(tokens.subspan(0, i));
    if (tokens[i] >= logits.size()) throw invalid_argument("minkpp: token id outside vocabulary");
    const double lse = logsumexp(logits);
    double mu = 0.0, second = 0.0;
    for (double l : logits) {
      const double lp = l - lse;
      const double p = std::exp(lp);
      if (p > 0.0) {  // p * lp -> 0 as p -> 0; avoids 0 * -inf = NaN
        mu += p * lp;
        second += p * lp * lp;
      }
    }
    const double var = second - mu * mu;
    const double sigma = var > 0.0 ? std::sqrt(var) : 0.0;
    const double lp_tok = logits[tokens[i]] - lse;
    zs.push_back(sigma > 0.0 ? (lp_tok - mu) / sigma : 0.0);
  }
  const auto k = detail::bottom_k(k_pct, zs.size());
  return detail::mean_of_smallest(std::move(zs), k);
}

// Frequency-calibrated logprob with an injectable log-frequency function
// (the seam used by tests and by callers with a precomputed table).
inline double mia_dcpdd_with_logf(const ScoredDocument& scored,
                                  const std::function<double(token_id)>& log_freq) {
  const auto lps = detail::conditioned(scored);
  double sum = 0.0;
  for (std::size_t i = 0; i < lps.size(); ++i)
    sum += lps[i] - log_freq(scored.tokens[i + 1]);
  return sum / static_cast<double>(lps.size());
}

inline double mia_dcpdd(const ScoredDocument& scored, const FrequencyTable& freqs) {
  return mia_dcpdd_with_logf(scored,
                             [&](token_id id) { return std::log(freqs.frequency(id)); });
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct MiaParams {
  double k_pct = 20.0;  // Min-K variants; no canonical value exists, so reports record it
  std::optional<FrequencyTable> freqs;  // required for dcpdd-simplified
};

// Scores one document set under one method. Documents too short to score are
// skipped (same policy as the detector).
inline std::vector<MiaScore> score_documents(const ModelBackend& backend,
                                             std::span<const Document> docs, MiaMethod method,
                                             const MiaParams& params, int threads = 1) {
  if (method == MiaMethod::dcpdd_simplified && !params.freqs)
    throw invalid_argument("dcpdd-simplified needs a frequency table");
  std::vector<std::optional<MiaScore>> out(docs.size());
  parallel_for(docs.size(), threads, [&](std::size_t i) {
    const auto& doc = docs[i];
    const auto tokens = bytes_to_tokens(doc.text);
    if (tokens.size() < 2) return;  // skip
    double score = 0.0;
    if (method == MiaMethod::minkpp) {
      score = mia_minkpp(backend, tokens, params.k_pct);
    } else {
      const auto scored = backend.score_sequence(tokens);
      switch (method) {
        case MiaMethod::ppl: score = mia_ppl(scored); break;
        case MiaMethod::zlib: score = mia_zlib(doc.text, scored); break;
        case MiaMethod::mink: score = mia_mink(scored, params.k_pct); break;
        case MiaMethod::dcpdd_simplified: score = mia_dcpdd(scored, *params.freqs); break;
        case MiaMethod::minkpp: break;  // handled above
      }
    }
    out[i] = MiaScore{method, doc.doc_id, score};
  });
  std::vector<MiaScore> scores;
  for (auto& s : out)
    if (s) scores.push_back(std::move(*s));
  return scores;
}

// AUROC of member vs nonmember documents for each requested method.
inline std::map<std::string, double> evaluate_mias(const ModelBackend& backend,
                                                   std::span<const Document> members,
                                                   std::span<const Document> nonmembers,
                                                   std::span<const MiaMethod> methods,
                                                   const MiaParams& params, int threads = 1) {
  if (members.empty() || nonmembers.empty())
    throw invalid_argument("evaluate_mias: both document sets must be non-empty");
  std::map<std::string, double> table;
  for (const auto method : methods) {
    const auto ms = score_documents(backend, members, method, params, threads);
    const auto ns = score_documents(backend, nonmembers, method, params, threads);
    if (ms.empty() || ns.empty())
      throw invalid_argument("evaluate_mias: a document set had no scorable documents");
    std::vector<double> a, b;
    a.reserve(ms.size());
    b.reserve(ns.size());
    for (const auto& s : ms) a.push_back(s.score);
    for (const auto& s : ns) b.push_back(s.score);
    table[to_string(method)] = stats::auroc(a, b);
  }
  return table;
}

inline constexpr MiaMethod kAllMiaMethods[] = {MiaMethod::ppl, MiaMethod::zlib, MiaMethod::mink,
                                               MiaMethod::minkpp, MiaMethod::dcpdd_simplified};

}  // namespace dwmark
