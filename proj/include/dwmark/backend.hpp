// Copyright (c) 2026 dwmark contributors
// SPDX-License-Identifier: Apache-2.0
//
// Gray-box model access: any language model usable here must expose full
// next-token logits (for generation and for distribution-moment scores) and
// per-token log-probabilities (for perplexity). Watermark biasing happens on
// the client side, from raw logits — model hosts never see key material.
//
// All log-probabilities are natural log. A scored document's first position
// is an unconditioned sentinel (NaN); statistics cover positions 1..N-1.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dwmark/common.hpp"
#include "dwmark/core.hpp"
#include "dwmark/watermark.hpp"

namespace dwmark {

struct VocabInfo {
  std::size_t size = 0;         // ids are dense in [0, size)
  bool full_logits = false;     // whether next_token_logits is available
};

struct ScoredDocument {
  std::vector<token_id> tokens;
  std::vector<double> logprobs;  // logprobs[0] is NaN (unconditioned sentinel)
  double nll_mean = 0.0;         // -mean(logprobs[1..N-1])
  double ppl = 1.0;              // exp(nll_mean)
};

inline bool is_unconditioned(double logprob) { return std::isnan(logprob); }

// Assembles a ScoredDocument from raw per-token log-probabilities. Every
// scoring path (in-process or remote) funnels through this one function so
// that identical logprobs always produce bit-identical nll_mean and ppl.
inline ScoredDocument make_scored_document(std::vector<token_id> tokens,
                                           std::vector<double> logprobs) {
  if (tokens.size() < 2) throw invalid_argument("scored document needs >= 2 tokens");
  if (logprobs.size() != tokens.size())
    throw invalid_argument("scored document: logprobs/tokens length mismatch");
  logprobs[0] = std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (std::size_t i = 1; i < logprobs.size(); ++i) {
    if (!(logprobs[i] <= 0.0))
      throw invalid_argument("scored document: conditioned logprob must be <= 0 and finite-or--inf");
    sum += logprobs[i];
  }
  ScoredDocument d;
  d.tokens = std::move(tokens);
  d.logprobs = std::move(logprobs);
  d.nll_mean = -sum / static_cast<double>(d.tokens.size() - 1);
  d.ppl = std::exp(d.nll_mean);
  return d;
}

inline double log_softmax_at(std::span<const double> logits, token_id id) {
  if (id >= logits.size()) throw invalid_argument("token id outside vocabulary");
  return logits[id] - logsumexp(logits);
}

// ---------------------------------------------------------------------------
// Backend interface
// ---------------------------------------------------------------------------

class ModelBackend {
 public:
  virtual ~ModelBackend() = default;

  virtual VocabInfo vocab() const = 0;

  // Full next-token logit vector for `context` (any length, including empty).
  // Must be deterministic: identical context, identical vector. Backends
  // without this capability (vocab().full_logits == false) throw
  // unsupported_backend.
  virtual std::vector<double> next_token_logits(std::span<const token_id> context) const = 0;

  // Per-token log-probabilities under the model. The default routes through
  // next_token_logits position by position; backends with a cheaper native
  // path (or a remote scoring endpoint) override it. Implementations must
  // produce logprobs identical to the default to stay interchangeable.
  virtual ScoredDocument score_sequence(std::span<const token_id> tokens) const {
    const std::size_t v = vocab().size;
    if (tokens.size() < 2) throw invalid_argument("score_sequence needs >= 2 tokens");
    for (token_id t : tokens)
      if (t >= v) throw invalid_argument("score_sequence: token id outside vocabulary");
    std::vector<double> lps(tokens.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 1; i < tokens.size(); ++i) {
      const auto logits = next_token_logits(tokens.subspan(0, i));
      lps[i] = log_softmax_at(logits, tokens[i]);
    }
    return make_scored_document(std::vector<token_id>(tokens.begin(), tokens.end()),
                                std::move(lps));
  }

  // Display form of a token, for reports and debugging.
  virtual std::string token_repr(token_id id) const { return "#" + std::to_string(id); }
};

// ---------------------------------------------------------------------------
// Sampling and generation
// ---------------------------------------------------------------------------

enum class SamplerKind { greedy, temperature };

struct SamplerConfig {
  SamplerKind kind = SamplerKind::greedy;
  double temperature = 1.0;   // used by SamplerKind::temperature; must be > 0
  std::uint64_t seed = 0;     // rng seed for temperature sampling
};

struct GenerateOptions {
  std::size_t max_new_tokens = 256;
  std::optional<token_id> stop_token;  // sampled stop ends generation, is not emitted
  std::vector<std::uint8_t> allowed;   // empty = all; else size |V|, nonzero = allowed
};

struct GenerationResult {
  std::vector<token_id> tokens;  // prompt followed by emitted tokens
  bool truncated = false;        // hit max_new_tokens without a stop token
};

namespace detail {

// Greedy pick: maximal logit, ties to the lowest id.
inline token_id argmax_token(std::span<const double> logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return static_cast<token_id>(best);
}

// Temperature sampling via an explicit CDF scan over softmax(logits / tau);
// avoids std::discrete_distribution so that draws are reproducible across
// standard libraries. -inf logits carry zero weight.
inline token_id sample_token(std::span<const double> logits, double tau, std::mt19937_64& rng) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double l : logits) hi = std::max(hi, l);
  if (!std::isfinite(hi)) throw invalid_argument("sampling: no token has finite logit");
  std::vector<double> w(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    w[i] = std::exp((logits[i] - hi) / tau);
    total += w[i];
  }
  const double u = rand_unit(rng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (u < acc) return static_cast<token_id>(i);
  }
  // Floating-point slack: fall back to the last positive-weight token.
  for (std::size_t i = w.size(); i-- > 0;)
    if (w[i] > 0.0) return static_cast<token_id>(i);
  throw error("sampling: unreachable");
}

inline GenerationResult generate_impl(const ModelBackend& backend,
                                      std::span<const token_id> prompt,
                                      const WatermarkKey* key, const WatermarkParams* params,
                                      const SamplerConfig& sampler, const GenerateOptions& opt) {
  const auto info = backend.vocab();
  if (!info.full_logits)
    throw unsupported_backend("generation requires full next-token logits");
  for (token_id t : prompt)
    if (t >= info.size) throw invalid_argument("generate: prompt token outside vocabulary");
  if (params != nullptr) {
    if (prompt.size() < static_cast<std::size_t>(params->context_width))
      throw invalid_argument("generate: prompt shorter than watermark context width");
  } else if (prompt.empty()) {
    throw invalid_argument("generate: empty prompt");
  }
  if (sampler.kind == SamplerKind::temperature && !(sampler.temperature > 0.0))
    throw invalid_argument("generate: temperature must be > 0");
  if (!opt.allowed.empty()) {
    if (opt.allowed.size() != info.size)
      throw invalid_argument("generate: allowed mask size must equal vocabulary size");
    bool any = false;
    for (auto a : opt.allowed) any = any || a != 0;
    if (!any) throw invalid_argument("generate: allowed mask excludes every token");
  }

  GenerationResult out;
  out.tokens.assign(prompt.begin(), prompt.end());
  std::mt19937_64 rng(sampler.seed);
  for (std::size_t step = 0; step < opt.max_new_tokens; ++step) {
    auto logits = backend.next_token_logits(out.tokens);
    if (logits.size() != info.size) throw backend_error("generate: logits size mismatch");
    if (!opt.allowed.empty())
      for (std::size_t i = 0; i < logits.size(); ++i)
        if (!opt.allowed[i]) logits[i] = -std::numeric_limits<double>::infinity();
    if (key != nullptr && params != nullptr && params->delta != 0.0) {
      for (std::size_t v = 0; v < logits.size(); ++v)
        if (std::isfinite(logits[v]) &&
            is_green(*key, out.tokens, static_cast<token_id>(v), *params))
          logits[v] += params->delta;
    }
    const token_id next = sampler.kind == SamplerKind::greedy
                              ? argmax_token(logits)
                              : sample_token(logits, sampler.temperature, rng);
    if (opt.stop_token && next == *opt.stop_token) return out;
    out.tokens.push_back(next);
  }
  out.truncated = true;
  return out;
}

}  // namespace detail

inline GenerationResult generate(const ModelBackend& backend, std::span<const token_id> prompt,
                                 const SamplerConfig& sampler, const GenerateOptions& opt = {}) {
  return detail::generate_impl(backend, prompt, nullptr, nullptr, sampler, opt);
}

// Watermarked decoding: +delta on green logits at every step, then sample.
// With delta == 0 this is bit-identical to plain generate under the same
// sampler seed.
inline GenerationResult generate_watermarked(const ModelBackend& backend,
                                             std::span<const token_id> prompt,
                                             const WatermarkKey& key,
                                             const WatermarkParams& params,
                                             const SamplerConfig& sampler,
                                             const GenerateOptions& opt = {}) {
  validate_params_or_throw(params);
  return detail::generate_impl(backend, prompt, &key, &params, sampler, opt);
}

}  // namespace dwmark
