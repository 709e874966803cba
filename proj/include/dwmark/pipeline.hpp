// Copyright (c) 2026 dwmark contributors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment orchestration: synthesize multi-key rephrase manifests, build
// intentionally contaminated training corpora, and run the end-to-end
// membership experiment (contaminate -> train byte model -> detect), with a
// clean control, a held-out same-key false-positive protocol, the MIA
// baseline table, a public/private distinguishability audit, and ablation
// sweeps over n / m / alpha / corpus size / duplication.
//
// Everything is derived from ExperimentConfig::seed through tagged hashes, so
// identical configs reproduce byte-identical reports (timing excluded; use
// experiment_report_to_json(report, /*include_timing=*/false) to compare).
//
// "Rephrases" at this scale are sibling generations: every version of a
// document is sampled from the same prompt by the same generator, differing
// only in its watermark key. That preserves the property the detector needs
// (public and private versions are exchangeable draws from one process) on a
// desk-size budget. Real text rephrasing plugs in through the same backend
// interface via the wire protocol.

#pragma once

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dwmark/audit.hpp"
#include "dwmark/backend.hpp"
#include "dwmark/common.hpp"
#include "dwmark/core.hpp"
#include "dwmark/detect.hpp"
#include "dwmark/markov.hpp"
#include "dwmark/mia.hpp"
#include "dwmark/mix.hpp"
#include "dwmark/parallel.hpp"
#include "dwmark/toylm.hpp"

namespace dwmark {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct StageToggles {
  bool clean_control = true;    // train an uncontaminated model and test against it
  bool fpr = true;              // held-out same-public-key false-positive protocol
  bool mia = true;              // membership-inference baseline table
  bool audit = true;            // public vs private bag-of-words audit
  bool isolation_check = true;  // substring scan: no private text in the corpus
  friend bool operator==(const StageToggles&, const StageToggles&) = default;
};

struct AblationSpec {
  int seeds_per_point = 10;
  std::vector<std::size_t> n_values;           // document count sweep
  std::vector<int> m_values;                   // private-version count sweep
  std::vector<double> alpha_values;            // contaminated-fraction sweep
  std::vector<std::size_t> background_values;  // corpus-size sweep (bytes)
  std::vector<int> duplication_values;         // insertion-count sweep
  bool empty() const {
    return n_values.empty() && m_values.empty() && alpha_values.empty() &&
           background_values.empty() && duplication_values.empty();
  }
  friend bool operator==(const AblationSpec&, const AblationSpec&) = default;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::size_t n_documents = 200;
  std::size_t doc_length = 200;   // bytes per generated version, prompt included
  std::size_t prompt_bytes = 16;  // shared prefix all versions of a document start from
  int m_private = 3;
  WatermarkParams watermark{0.5, 2.0, 1};
  int duplication = 1;  // times each contaminated public doc enters the corpus
  double alpha = 1.0;   // fraction of documents contaminated (first floor(alpha*n))
  std::size_t background_bytes = 5'000'000;
  std::size_t background_doc_bytes = 2048;
  int generator_order = 3;      // model that writes the documents
  double generator_alpha = 0.5;
  int detector_order = 5;       // model trained on the (possibly contaminated) corpus
  double detector_alpha = 0.1;
  double sampling_temperature = 1.0;
  double clip_fraction = 0.05;
  stats::ClipRule clip_rule = stats::ClipRule::abs_winsorize;
  std::size_t held_out_documents = 0;  // 0 = same as n_documents; capped at n_documents
  int fpr_subsets = 1;                 // independent held-out sets per run
  double mia_k_pct = 20.0;
  int audit_iterations = 150;  // logreg budget for the in-pipeline audit
  int threads = 1;
  StageToggles stages;
  AblationSpec ablation;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

inline void validate_experiment_config(const ExperimentConfig& c) {
  validate_params_or_throw(c.watermark);
  if (c.n_documents < 2) throw invalid_argument("config: n_documents must be >= 2");
  if (c.m_private < 1) throw invalid_argument("config: m_private must be >= 1");
  if (c.prompt_bytes < static_cast<std::size_t>(c.watermark.context_width))
    throw invalid_argument("config: prompt_bytes must cover the watermark context width");
  if (c.doc_length < c.prompt_bytes + 8)
    throw invalid_argument("config: doc_length must exceed prompt_bytes by at least 8");
  if (c.duplication < 1) throw invalid_argument("config: duplication must be >= 1");
  if (!(c.alpha >= 0.0 && c.alpha <= 1.0))
    throw invalid_argument("config: alpha must lie in [0, 1]");
  if (c.background_doc_bytes < 64)
    throw invalid_argument("config: background_doc_bytes must be >= 64");
  if (c.background_bytes < c.background_doc_bytes)
    throw invalid_argument("config: background_bytes must cover at least one document");
  for (const auto& [order, alpha] :
       {std::pair{c.generator_order, c.generator_alpha}, {c.detector_order, c.detector_alpha}})
    if (order < 1 || order > 8 || !(alpha > 0.0) || !std::isfinite(alpha))
      throw invalid_argument("config: model orders must lie in [1,8] with positive alpha");
  if (!(c.sampling_temperature > 0.0) || !std::isfinite(c.sampling_temperature))
    throw invalid_argument("config: sampling_temperature must be positive");
  if (!(c.clip_fraction >= 0.0 && c.clip_fraction < 1.0))
    throw invalid_argument("config: clip_fraction must lie in [0, 1)");
  if (c.held_out_documents > c.n_documents)
    throw invalid_argument("config: held_out_documents cannot exceed n_documents "
                           "(held-out publics reuse the released keys index-aligned)");
  if (c.fpr_subsets < 1) throw invalid_argument("config: fpr_subsets must be >= 1");
  if (!(c.mia_k_pct > 0.0 && c.mia_k_pct <= 100.0))
    throw invalid_argument("config: mia_k_pct must lie in (0, 100]");
  if (c.audit_iterations < 1) throw invalid_argument("config: audit_iterations must be >= 1");
  if (c.threads < 1) throw invalid_argument("config: threads must be >= 1");
  if (c.ablation.seeds_per_point < 1)
    throw invalid_argument("config: ablation.seeds_per_point must be >= 1");
}

// --- JSON round trip -------------------------------------------------------

inline stats::ClipRule clip_rule_from_string(std::string_view s) {
  if (s == "abs_winsorize") return stats::ClipRule::abs_winsorize;
  if (s == "signed_upper_winsorize") return stats::ClipRule::signed_upper_winsorize;
  throw invalid_argument("unknown clip_rule: " + std::string(s));
}

inline nlohmann::json experiment_config_to_json(const ExperimentConfig& c) {
  nlohmann::json j{
      {"seed", c.seed},
      {"n_documents", c.n_documents},
      {"doc_length", c.doc_length},
      {"prompt_bytes", c.prompt_bytes},
      {"m_private", c.m_private},
      {"watermark", {{"gamma", c.watermark.gamma},
                     {"delta", c.watermark.delta},
                     {"context_width", c.watermark.context_width}}},
      {"duplication", c.duplication},
      {"alpha", c.alpha},
      {"background_bytes", c.background_bytes},
      {"background_doc_bytes", c.background_doc_bytes},
      {"generator_order", c.generator_order},
      {"generator_alpha", c.generator_alpha},
      {"detector_order", c.detector_order},
      {"detector_alpha", c.detector_alpha},
      {"sampling_temperature", c.sampling_temperature},
      {"clip_fraction", c.clip_fraction},
      {"clip_rule", to_string(c.clip_rule)},
      {"held_out_documents", c.held_out_documents},
      {"fpr_subsets", c.fpr_subsets},
      {"mia_k_pct", c.mia_k_pct},
      {"audit_iterations", c.audit_iterations},
      {"threads", c.threads},
      {"stages", {{"clean_control", c.stages.clean_control},
                  {"fpr", c.stages.fpr},
                  {"mia", c.stages.mia},
                  {"audit", c.stages.audit},
                  {"isolation_check", c.stages.isolation_check}}}};
  if (!c.ablation.empty()) {
    j["ablation"] = {{"seeds_per_point", c.ablation.seeds_per_point},
                     {"n_values", c.ablation.n_values},
                     {"m_values", c.ablation.m_values},
                     {"alpha_values", c.ablation.alpha_values},
                     {"background_values", c.ablation.background_values},
                     {"duplication_values", c.ablation.duplication_values}};
  }
  return j;
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    auto grab = [&](const char* key, auto& out) {
      if (j.contains(key)) out = j.at(key).get<std::decay_t<decltype(out)>>();
    };
    grab("seed", c.seed);
    grab("n_documents", c.n_documents);
    grab("doc_length", c.doc_length);
    grab("prompt_bytes", c.prompt_bytes);
    grab("m_private", c.m_private);
    if (j.contains("watermark")) {
      const auto& w = j.at("watermark");
      c.watermark.gamma = w.at("gamma").get<double>();
      c.watermark.delta = w.at("delta").get<double>();
      c.watermark.context_width = w.at("context_width").get<int>();
    }
    grab("duplication", c.duplication);
    grab("alpha", c.alpha);
    grab("background_bytes", c.background_bytes);
    grab("background_doc_bytes", c.background_doc_bytes);
    grab("generator_order", c.generator_order);
    grab("generator_alpha", c.generator_alpha);
    grab("detector_order", c.detector_order);
    grab("detector_alpha", c.detector_alpha);
    grab("sampling_temperature", c.sampling_temperature);
    grab("clip_fraction", c.clip_fraction);
    if (j.contains("clip_rule"))
      c.clip_rule = clip_rule_from_string(j.at("clip_rule").get<std::string>());
    grab("held_out_documents", c.held_out_documents);
    grab("fpr_subsets", c.fpr_subsets);
    grab("mia_k_pct", c.mia_k_pct);
    grab("audit_iterations", c.audit_iterations);
    grab("threads", c.threads);
    if (j.contains("stages")) {
      const auto& s = j.at("stages");
      c.stages.clean_control = s.value("clean_control", true);
      c.stages.fpr = s.value("fpr", true);
      c.stages.mia = s.value("mia", true);
      c.stages.audit = s.value("audit", true);
      c.stages.isolation_check = s.value("isolation_check", true);
    }
    if (j.contains("ablation")) {
      const auto& a = j.at("ablation");
      c.ablation.seeds_per_point = a.value("seeds_per_point", 10);
      auto grab_vec = [&](const char* key, auto& out) {
        if (a.contains(key)) out = a.at(key).get<std::decay_t<decltype(out)>>();
      };
      grab_vec("n_values", c.ablation.n_values);
      grab_vec("m_values", c.ablation.m_values);
      grab_vec("alpha_values", c.ablation.alpha_values);
      grab_vec("background_values", c.ablation.background_values);
      grab_vec("duplication_values", c.ablation.duplication_values);
    }
  } catch (const nlohmann::json::exception& e) {
    throw invalid_argument(std::string("bad experiment config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Manifest synthesis
// ---------------------------------------------------------------------------

namespace detail {
inline constexpr std::uint64_t kKeyTableTag = 0x6b65797461626c65ULL;      // "keytable"
inline constexpr std::uint64_t kPublicPickTag = 0x7075626c6963ULL;        // "public"
inline constexpr std::uint64_t kVersionSeedTag = 0x76657273696f6eULL;     // "version"
inline constexpr std::uint64_t kRetryTag = 0x7265747279ULL;               // "retry"
inline constexpr std::uint64_t kInsertTag = 0x696e73657274ULL;            // "insert"
inline constexpr std::uint64_t kBackgroundTag = 0x6261636b6764ULL;        // "backgd"
inline constexpr std::uint64_t kBackgroundStream = 0x62677374726dULL;     // "bgstrm"
inline constexpr std::uint64_t kPromptStream = 0x70726f6d7074ULL;         // "prompt"
inline constexpr std::uint64_t kHeldOutPromptStream = 0x686f70726f6dULL;  // "hoprom"
inline constexpr std::uint64_t kManifestTag = 0x6d616e6966ULL;            // "manif"
inline constexpr std::uint64_t kHeldOutTag = 0x68656c646f7574ULL;         // "heldout"
inline constexpr std::uint64_t kRelabelTag = 0x72656c6162656cULL;         // "relabel"
inline constexpr std::uint64_t kAuditSeedTag = 0x6175646974ULL;           // "audit"
inline constexpr std::uint64_t kSweepTag = 0x7377656570ULL;               // "sweep"

// Generation is restricted to printable ASCII so corpora are valid UTF-8 and
// the NUL corpus separator can never be emitted.
inline std::vector<std::uint8_t> printable_mask(std::size_t vocab_size) {
  std::vector<std::uint8_t> mask(vocab_size, 0);
  for (std::size_t c = 0x20; c <= 0x7E && c < vocab_size; ++c) mask[c] = 1;
  return mask;
}
}  // namespace detail

struct SynthesisResult {
  DatasetManifest manifest;
  std::vector<std::string> warnings;  // "doc_id: reason" for skipped documents
};

namespace detail {

// Shared engine for both synthesis entry points. Every document gets
// `versions` generations from its prompt, each under its own fresh key; the
// public slot is either chosen uniformly per document (public_overrides ==
// nullptr) or forced to slot 0 under the caller-supplied key.
inline SynthesisResult synthesize_impl(const ModelBackend& backend,
                                       const std::vector<std::string>& prompts,
                                       int versions, const WatermarkParams& params,
                                       const SamplerConfig& sampler, std::size_t doc_length,
                                       std::uint64_t seed, std::string name,
                                       const std::vector<Key128>* public_overrides,
                                       int threads) {
  validate_params_or_throw(params);
  if (prompts.empty()) throw invalid_argument("synthesize: need at least one base document");
  if (versions < 2)
    throw invalid_argument("synthesize: need at least 2 versions (one public, one private)");
  if (public_overrides && public_overrides->size() != prompts.size())
    throw invalid_argument("synthesize: one public key override per document required");
  const auto n = prompts.size();
  const auto v = static_cast<std::size_t>(versions);
  for (const auto& p : prompts) {
    if (p.size() < static_cast<std::size_t>(params.context_width))
      throw invalid_argument("synthesize: prompt shorter than the watermark context width");
    if (doc_length <= p.size())
      throw invalid_argument("synthesize: doc_length must exceed the prompt length");
  }

  auto keys = keygen(n * v, mix_words({kKeyTableTag, seed}));
  if (public_overrides)
    for (std::size_t i = 0; i < n; ++i) keys[i * v].secret = (*public_overrides)[i];

  const auto mask = printable_mask(backend.vocab().size);

  struct PerDoc {
    std::vector<std::string> texts;  // one per version; empty vector = skipped
    std::string warning;
  };
  std::vector<PerDoc> generated(n);
  parallel_for(n, static_cast<std::size_t>(threads), [&](std::size_t i) {
    const auto prompt = bytes_to_tokens(prompts[i]);
    GenerateOptions opt;
    opt.max_new_tokens = doc_length - prompts[i].size();
    opt.allowed = mask;
    std::vector<std::string> texts;
    texts.reserve(v);
    for (std::size_t ver = 0; ver < v; ++ver) {
      SamplerConfig sc = sampler;
      sc.seed = mix_words({kVersionSeedTag, seed, i, ver});
      const auto& key = keys[i * v + ver];
      std::string text;
      for (int attempt = 0; attempt < 2; ++attempt) {
        try {
          const auto out = generate_watermarked(backend, prompt, key, params, sc, opt);
          text = tokens_to_bytes(out.tokens);
          break;
        } catch (const error& e) {
          if (attempt == 1) {
            generated[i].warning = prompts[i].substr(0, 8) + "...: " + e.what();
            return;  // skip the whole document
          }
          sc.seed = mix_words({kRetryTag, sc.seed});
        }
      }
      texts.push_back(std::move(text));
    }
    generated[i].texts = std::move(texts);
  });

  SynthesisResult result;
  result.manifest.name = std::move(name);
  result.manifest.params = params;
  for (std::size_t i = 0; i < n; ++i) {
    char base[32];
    std::snprintf(base, sizeof base, "d%04zu", i);
    if (generated[i].texts.empty()) {
      result.warnings.push_back(std::string(base) + ": " + generated[i].warning);
      continue;
    }
    std::size_t pub = 0;
    if (!public_overrides) {
      std::mt19937_64 pick(mix_words({kPublicPickTag, seed, i}));
      pub = rand_below(pick, v);
    }
    RephraseSet entry;
    entry.doc_id = base;
    int priv_index = 0;
    for (std::size_t ver = 0; ver < v; ++ver) {
      const auto& key = keys[i * v + ver];
      Document doc{std::string(base) +
                       (ver == pub ? "#public" : "#private" + std::to_string(priv_index)),
                   generated[i].texts[ver], key.id};
      if (ver == pub) {
        entry.public_version = std::move(doc);
      } else {
        entry.private_versions.push_back(std::move(doc));
        ++priv_index;
      }
      result.manifest.keys.push_back(key);
    }
    result.manifest.entries.push_back(std::move(entry));
  }
  if (result.manifest.entries.empty())
    throw error("synthesize: every document failed to generate");
  return result;
}

}  // namespace detail

// Rephrase-set synthesis: for each base document, `keys_per_doc` sibling
// generations from the same prompt under distinct fresh keys, one designated
// public uniformly at random per the seed.
inline SynthesisResult synthesize_rephrase_manifest(
    const ModelBackend& backend, const std::vector<std::string>& base_docs, int keys_per_doc,
    const WatermarkParams& params, const SamplerConfig& sampler, std::size_t doc_length,
    std::uint64_t seed, std::string name = "rephrase-set", int threads = 1) {
  return detail::synthesize_impl(backend, base_docs, keys_per_doc, params, sampler, doc_length,
                                 seed, std::move(name), nullptr, threads);
}

// Held-out set for the false-positive protocol: fresh documents whose PUBLIC
// versions reuse the reference manifest's public key secrets (index-aligned),
// while private slots get fresh keys. These documents share keys with the
// released set but never enter any training corpus, so a detector that fires
// on them is keying on the watermark itself rather than on memorization.
inline SynthesisResult synthesize_held_out_manifest(
    const ModelBackend& backend, const std::vector<std::string>& prompts,
    const DatasetManifest& reference, const SamplerConfig& sampler, std::size_t doc_length,
    std::uint64_t seed, std::string name = "held-out-set", int threads = 1) {
  if (prompts.size() > reference.entries.size())
    throw invalid_argument("held-out synthesis: more prompts than reference documents "
                           "(each held-out public reuses one distinct released key)");
  std::vector<Key128> overrides;
  overrides.reserve(prompts.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const auto& pub = reference.entries[i].public_version;
    const WatermarkKey* k = reference.find_key(pub.key_id);
    if (!k)
      throw invalid_argument("held-out synthesis: reference manifest lacks the secret for key '" +
                             pub.key_id + "' (need the private vault, not the public release)");
    overrides.push_back(k->secret);
  }
  return detail::synthesize_impl(backend, prompts, static_cast<int>(reference.m_private()) + 1,
                                 reference.params, sampler, doc_length, seed, std::move(name),
                                 &overrides, threads);
}

// ---------------------------------------------------------------------------
// Contaminated corpus
// ---------------------------------------------------------------------------

struct InsertionRecord {
  std::string doc_id;        // public version inserted
  int copy = 0;              // 0 .. duplication-1
  std::size_t slot = 0;      // inter-document gap chosen (0 .. background count)
  std::size_t corpus_index = 0;  // final position in the corpus document sequence
};

struct ContaminatedCorpus {
  std::vector<Document> documents;
  std::vector<InsertionRecord> insertions;
  std::size_t inserted_documents = 0;  // distinct public docs inserted, floor(alpha*n)
  std::size_t inserted_bytes = 0;
  std::size_t total_bytes = 0;

  double contamination_fraction() const {
    return total_bytes == 0 ? 0.0
                            : static_cast<double>(inserted_bytes) / static_cast<double>(total_bytes);
  }
  std::vector<std::string> texts() const {
    std::vector<std::string> t;
    t.reserve(documents.size());
    for (const auto& d : documents) t.push_back(d.text);
    return t;
  }
  // NUL-joined single image, for leak scanning and file export. Documents
  // never contain NUL (enforced at synthesis: generation is printable-only).
  std::string blob() const {
    std::string b;
    b.reserve(total_bytes + documents.size());
    for (const auto& d : documents) {
      b += d.text;
      b.push_back('\0');
    }
    return b;
  }
};

// The first floor(alpha*n) public versions, each inserted `duplication` times
// at uniformly random inter-document gaps of the background sequence.
// Private versions never appear.
inline ContaminatedCorpus build_contaminated_corpus(const std::vector<Document>& background,
                                                    const DatasetManifest& manifest,
                                                    int duplication, double alpha,
                                                    std::uint64_t seed) {
  if (background.empty())
    throw invalid_argument("build_contaminated_corpus: background corpus is empty");
  if (duplication < 1) throw invalid_argument("build_contaminated_corpus: duplication must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw invalid_argument("build_contaminated_corpus: alpha must lie in [0, 1]");

  const auto n = manifest.entries.size();
  // 1e-9 guard: alpha values like 0.3 are not exact in binary and alpha*n can
  // land one ulp under the intended integer.
  const auto n_inserted = static_cast<std::size_t>(
      std::floor(alpha * static_cast<double>(n) + 1e-9));

  ContaminatedCorpus corpus;
  corpus.inserted_documents = n_inserted;

  const auto slots = background.size() + 1;
  std::vector<std::vector<std::pair<std::size_t, int>>> by_slot(slots);  // (entry, copy)
  std::mt19937_64 rng(mix_words({detail::kInsertTag, seed}));
  for (std::size_t i = 0; i < n_inserted; ++i)
    for (int copy = 0; copy < duplication; ++copy)
      by_slot[rand_below(rng, slots)].push_back({i, copy});

  auto emit_inserted = [&](std::size_t slot) {
    for (const auto& [entry, copy] : by_slot[slot]) {
      const Document& pub = manifest.entries[entry].public_version;
      corpus.insertions.push_back({pub.doc_id, copy, slot, corpus.documents.size()});
      corpus.documents.push_back(pub);
      corpus.inserted_bytes += pub.text.size();
    }
  };
  for (std::size_t b = 0; b < background.size(); ++b) {
    emit_inserted(b);
    corpus.documents.push_back(background[b]);
  }
  emit_inserted(background.size());

  for (const auto& d : corpus.documents) corpus.total_bytes += d.text.size();
  return corpus;
}

// Isolation scan: doc_ids of entries whose private versions appear verbatim
// anywhere in the corpus image. Must be empty for a valid experiment.
inline std::vector<std::string> find_private_leaks(const DatasetManifest& manifest,
                                                   std::string_view corpus_blob) {
  std::vector<std::string> leaked;
  for (const auto& e : manifest.entries)
    for (const auto& p : e.private_versions)
      if (corpus_blob.find(p.text) != std::string_view::npos) {
        leaked.push_back(p.doc_id);
        break;
      }
  return leaked;
}

// ---------------------------------------------------------------------------
// Null-calibration helpers
// ---------------------------------------------------------------------------

// n x (m+1) perplexity matrix over all versions of every document; column 0
// is the public version. Scoring errors propagate (calibration fixtures are
// expected to score cleanly).
inline std::vector<std::vector<double>> version_ppl_matrix(const ModelBackend& backend,
                                                           const DatasetManifest& manifest,
                                                           int threads = 1) {
  std::vector<std::vector<double>> ppls(manifest.entries.size());
  parallel_for(manifest.entries.size(), static_cast<std::size_t>(threads), [&](std::size_t i) {
    const auto& e = manifest.entries[i];
    std::vector<double> row;
    row.reserve(e.private_versions.size() + 1);
    row.push_back(doc_perplexity(backend, e.public_version));
    for (const auto& p : e.private_versions) row.push_back(doc_perplexity(backend, p));
    ppls[i] = std::move(row);
  });
  return ppls;
}

// One label-randomization trial: per document a uniformly chosen version
// plays the public role against the mean of the rest; returns the paired
// test's p-value. Under a model that never trained on any version, all
// versions are exchangeable, so these p-values are calibrated.
inline double relabeled_pvalue(const std::vector<std::vector<double>>& ppls,
                               std::mt19937_64& rng, const DetectorConfig& config) {
  std::vector<double> d;
  d.reserve(ppls.size());
  for (const auto& row : ppls) {
    if (row.size() < 2)
      throw invalid_argument("relabeled_pvalue: each document needs >= 2 scored versions");
    const auto pick = rand_below(rng, row.size());
    double rest = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j)
      if (j != pick) rest += row[j];
    d.push_back(row[pick] - rest / static_cast<double>(row.size() - 1));
  }
  return detection_from_differences(d, config).test.p_one_sided;
}

inline std::vector<double> null_calibration_pvalues(const std::vector<std::vector<double>>& ppls,
                                                    std::size_t trials, std::uint64_t seed,
                                                    const DetectorConfig& config) {
  std::mt19937_64 rng(mix_words({detail::kRelabelTag, seed}));
  std::vector<double> p;
  p.reserve(trials);
  for (std::size_t t = 0; t < trials; ++t) p.push_back(relabeled_pvalue(ppls, rng, config));
  return p;
}

// ---------------------------------------------------------------------------
// End-to-end experiment
// ---------------------------------------------------------------------------

struct ExperimentReport {
  ExperimentConfig config;
  std::string manifest_hash;
  std::vector<std::string> warnings;
  std::size_t corpus_bytes = 0;
  std::size_t inserted_bytes = 0;
  std::size_t inserted_documents = 0;
  double contamination_fraction = 0.0;
  DetectionReport detection;                    // against the contaminated model
  std::optional<DetectionReport> clean_control; // against the uncontaminated model
  std::vector<double> fpr_pvalues;              // held-out same-key sets, one per subset
  std::map<std::string, double> mia_table;      // method -> AUROC
  std::optional<AuditResult> audit;             // public vs private distinguishability
  std::map<std::string, double> timing_ms;      // wall-clock per stage; not reproducible
};

// `background_override`, when non-null, replaces the built-in Markov
// background with caller-supplied plain texts (documents must be non-empty
// and NUL-free). Prompts for synthesis still come from the seeded source, so
// the released set stays disjoint from the background either way.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                       const std::vector<std::string>* background_override =
                                           nullptr) {
  validate_experiment_config(cfg);
  ExperimentReport rep;
  rep.config = cfg;

  auto stage = [&](const char* name, auto&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      body();
    } catch (const std::exception& e) {
      throw error(std::string("stage ") + name + ": " + e.what());
    }
    rep.timing_ms[name] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  };

  // Background corpus and the generator that writes all documents.
  const MarkovSource source(mix_words({detail::kBackgroundTag, cfg.seed}));
  std::vector<Document> background;
  stage("background", [&] {
    if (background_override) {
      for (std::size_t i = 0; i < background_override->size(); ++i) {
        const auto& text = (*background_override)[i];
        if (text.empty() || text.find('\0') != std::string::npos)
          throw invalid_argument("background documents must be non-empty and NUL-free");
        char id[32];
        std::snprintf(id, sizeof id, "user%05zu", i);
        background.push_back(Document{id, text, ""});
      }
      if (background.empty()) throw invalid_argument("background override holds no documents");
      return;
    }
    const auto count = std::max<std::size_t>(1, cfg.background_bytes / cfg.background_doc_bytes);
    background = source.documents(count, cfg.background_doc_bytes, "bg", detail::kBackgroundStream);
  });
  NGramModel generator(cfg.generator_order, cfg.generator_alpha);
  stage("generator", [&] {
    for (const auto& d : background) generator.train_document(d.text);
  });

  const SamplerConfig sampler{SamplerKind::temperature, cfg.sampling_temperature, 0};
  DatasetManifest manifest;
  stage("synthesize", [&] {
    std::vector<std::string> prompts;
    prompts.reserve(cfg.n_documents);
    for (std::size_t i = 0; i < cfg.n_documents; ++i)
      prompts.push_back(source.generate(cfg.prompt_bytes, mix_words({detail::kPromptStream, i})));
    auto synth = synthesize_rephrase_manifest(generator, prompts, cfg.m_private + 1,
                                              cfg.watermark, sampler, cfg.doc_length,
                                              mix_words({detail::kManifestTag, cfg.seed}),
                                              "experiment-set", cfg.threads);
    manifest = std::move(synth.manifest);
    rep.warnings = std::move(synth.warnings);
    rep.manifest_hash = manifest_content_hash(manifest);
  });

  ContaminatedCorpus corpus;
  stage("contaminate", [&] {
    corpus = build_contaminated_corpus(background, manifest, cfg.duplication, cfg.alpha, cfg.seed);
    rep.corpus_bytes = corpus.total_bytes;
    rep.inserted_bytes = corpus.inserted_bytes;
    rep.inserted_documents = corpus.inserted_documents;
    rep.contamination_fraction = corpus.contamination_fraction();
  });
  if (cfg.stages.isolation_check) {
    stage("isolation", [&] {
      const auto leaked = find_private_leaks(manifest, corpus.blob());
      if (!leaked.empty()) {
        std::string msg = "private versions leaked into the training corpus:";
        for (const auto& id : leaked) msg += " " + id;
        throw error(msg);
      }
    });
  }

  DetectorConfig det;
  det.m_private = cfg.m_private;
  det.clip_fraction = cfg.clip_fraction;
  det.clip_rule = cfg.clip_rule;

  {  // Contaminated model: detection, then everything else that needs it.
    NGramModel contaminated(cfg.detector_order, cfg.detector_alpha);
    stage("train-contaminated", [&] { contaminated.train_corpus(corpus.texts()); });
    stage("detect", [&] { rep.detection = stamp_test(contaminated, manifest, det, cfg.threads); });

    if (cfg.stages.fpr || cfg.stages.mia) {
      const auto held_n = cfg.held_out_documents ? cfg.held_out_documents : cfg.n_documents;
      std::vector<Document> mia_nonmembers;
      stage("fpr", [&] {
        for (int s = 0; s < cfg.fpr_subsets; ++s) {
          std::vector<std::string> prompts;
          prompts.reserve(held_n);
          for (std::size_t i = 0; i < held_n; ++i)
            prompts.push_back(source.generate(
                cfg.prompt_bytes,
                mix_words({detail::kHeldOutPromptStream, static_cast<std::uint64_t>(s), i})));
          auto held = synthesize_held_out_manifest(
              generator, prompts, manifest, sampler, cfg.doc_length,
              mix_words({detail::kHeldOutTag, cfg.seed, static_cast<std::uint64_t>(s)}),
              "held-out-set", cfg.threads);
          if (cfg.stages.fpr)
            rep.fpr_pvalues.push_back(
                stamp_test(contaminated, held.manifest, det, cfg.threads).test.p_one_sided);
          if (s == 0 && cfg.stages.mia)
            for (const auto& e : held.manifest.entries)
              mia_nonmembers.push_back(e.public_version);
        }
      });
      if (cfg.stages.mia && corpus.inserted_documents > 0) {
        stage("mia", [&] {
          std::vector<Document> members;
          for (std::size_t i = 0; i < corpus.inserted_documents; ++i)
            members.push_back(manifest.entries[i].public_version);
          MiaParams params;
          params.k_pct = cfg.mia_k_pct;
          params.freqs = FrequencyTable::from_corpus(corpus.texts());
          rep.mia_table = evaluate_mias(contaminated, members, mia_nonmembers,
                                        kAllMiaMethods, params, cfg.threads);
        });
      }
    }
  }

  if (cfg.stages.clean_control) {
    stage("clean-control", [&] {
      NGramModel clean(cfg.detector_order, cfg.detector_alpha);
      std::vector<std::string> texts;
      texts.reserve(background.size());
      for (const auto& d : background) texts.push_back(d.text);
      clean.train_corpus(texts);
      rep.clean_control = stamp_test(clean, manifest, det, cfg.threads);
    });
  }

  if (cfg.stages.audit) {
    stage("audit", [&] {
      std::vector<std::string> pub, priv;
      for (const auto& e : manifest.entries) {
        pub.push_back(e.public_version.text);
        priv.push_back(e.private_versions.front().text);
      }
      AuditConfig ac;
      ac.seed = mix_words({detail::kAuditSeedTag, cfg.seed});
      ac.threads = cfg.threads;
      ac.logreg.iterations = cfg.audit_iterations;
      rep.audit = distinguishability_auroc(pub, priv, ac);
    });
  }
  return rep;
}

inline nlohmann::json experiment_report_to_json(const ExperimentReport& r,
                                                bool include_timing = true) {
  nlohmann::json j{{"config", experiment_config_to_json(r.config)},
                   {"manifest_hash", r.manifest_hash},
                   {"warnings", r.warnings},
                   {"corpus", {{"total_bytes", r.corpus_bytes},
                               {"inserted_bytes", r.inserted_bytes},
                               {"inserted_documents", r.inserted_documents},
                               {"contamination_fraction", r.contamination_fraction}}},
                   {"detection", detection_report_to_json(r.detection)},
                   {"fpr_pvalues", r.fpr_pvalues},
                   {"mia_table", r.mia_table}};
  if (r.clean_control) j["clean_control"] = detection_report_to_json(*r.clean_control);
  if (r.audit) j["audit"] = audit_result_to_json(*r.audit);
  if (include_timing) j["timing_ms"] = r.timing_ms;
  return j;
}

// ---------------------------------------------------------------------------
// Ablation sweeps
// ---------------------------------------------------------------------------

struct SweepRow {
  std::string axis;  // "n" | "m" | "alpha" | "background_bytes" | "duplication"
  double value = 0.0;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  int m = 0;
  double alpha = 0.0;
  int duplication = 0;
  std::size_t corpus_bytes = 0;
  double t = 0.0;
  double log10_p = 0.0;
};

// Runs every configured sweep axis point `seeds_per_point` times with derived
// seeds. Sweep runs skip the optional stages (clean control, FPR, MIA, audit)
// and keep the isolation check; trends are read from t and log10_p, which
// stay informative far below where linear-space p-values underflow.
inline std::vector<SweepRow> run_ablation(const ExperimentConfig& base) {
  validate_experiment_config(base);
  if (base.ablation.empty())
    throw invalid_argument("run_ablation: config declares no sweep axes");

  struct Point {
    const char* axis;
    std::uint64_t axis_tag;
    double value;
    std::function<void(ExperimentConfig&)> apply;
  };
  std::vector<Point> points;
  const auto& ab = base.ablation;
  for (const auto v : ab.n_values)
    points.push_back({"n", 1, static_cast<double>(v),
                      [v](ExperimentConfig& c) { c.n_documents = v; }});
  for (const auto v : ab.m_values)
    points.push_back({"m", 2, static_cast<double>(v),
                      [v](ExperimentConfig& c) { c.m_private = v; }});
  for (const auto v : ab.alpha_values)
    points.push_back({"alpha", 3, v, [v](ExperimentConfig& c) { c.alpha = v; }});
  for (const auto v : ab.background_values)
    points.push_back({"background_bytes", 4, static_cast<double>(v),
                      [v](ExperimentConfig& c) { c.background_bytes = v; }});
  for (const auto v : ab.duplication_values)
    points.push_back({"duplication", 5, static_cast<double>(v),
                      [v](ExperimentConfig& c) { c.duplication = v; }});

  const auto reps = static_cast<std::size_t>(ab.seeds_per_point);
  std::vector<SweepRow> rows(points.size() * reps);
  parallel_for(rows.size(), static_cast<std::size_t>(base.threads), [&](std::size_t idx) {
    const auto& point = points[idx / reps];
    const auto rep = idx % reps;
    ExperimentConfig cfg = base;
    cfg.ablation = {};
    cfg.threads = 1;
    cfg.stages = StageToggles{false, false, false, false, base.stages.isolation_check};
    point.apply(cfg);
    cfg.seed = mix_words({detail::kSweepTag, base.seed, point.axis_tag,
                          std::bit_cast<std::uint64_t>(point.value), rep});
    const auto report = run_experiment(cfg);
    SweepRow& row = rows[idx];
    row.axis = point.axis;
    row.value = point.value;
    row.seed = cfg.seed;
    row.n = cfg.n_documents;
    row.m = cfg.m_private;
    row.alpha = cfg.alpha;
    row.duplication = cfg.duplication;
    row.corpus_bytes = report.corpus_bytes;
    row.t = report.detection.test.statistic;
    row.log10_p = report.detection.test.ln_p / std::log(10.0);
  });
  return rows;
}

inline std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "axis,value,seed,n,m,alpha,duplication,corpus_bytes,t,log10_p\n";
  for (const auto& r : rows)
    out << r.axis << ',' << r.value << ',' << r.seed << ',' << r.n << ',' << r.m << ','
        << r.alpha << ',' << r.duplication << ',' << r.corpus_bytes << ',' << r.t << ','
        << r.log10_p << '\n';
  return out.str();
}

// Median log10 p over the rows of one sweep point.
inline double sweep_median_log10_p(const std::vector<SweepRow>& rows, std::string_view axis,
                                   double value) {
  std::vector<double> v;
  for (const auto& r : rows)
    if (r.axis == axis && r.value == value) v.push_back(r.log10_p);
  if (v.empty()) throw invalid_argument("sweep_median_log10_p: no rows for that point");
  return median_of(std::move(v));
}

// Per-point aggregates. How to average p-values across runs is a judgment
// call (mean of p and mean of log p disagree badly once p gets small), so
// all three summaries are reported side by side, labeled.
struct SweepPointSummary {
  std::string axis;
  double value = 0.0;
  std::size_t runs = 0;
  double median_log10_p = 0.0;
  double mean_log10_p = 0.0;
  double mean_p = 0.0;  // arithmetic mean of linear-space p (0 once p underflows)
};

inline std::vector<SweepPointSummary> summarize_sweep(const std::vector<SweepRow>& rows) {
  std::vector<SweepPointSummary> out;
  for (const auto& row : rows) {
    const bool seen = std::any_of(out.begin(), out.end(), [&](const SweepPointSummary& s) {
      return s.axis == row.axis && s.value == row.value;
    });
    if (seen) continue;
    std::vector<double> logs, linear;
    for (const auto& r : rows)
      if (r.axis == row.axis && r.value == row.value) {
        logs.push_back(r.log10_p);
        linear.push_back(std::pow(10.0, r.log10_p));
      }
    SweepPointSummary s;
    s.axis = row.axis;
    s.value = row.value;
    s.runs = logs.size();
    s.mean_log10_p = mean_of(logs);
    s.mean_p = mean_of(linear);
    s.median_log10_p = median_of(std::move(logs));
    out.push_back(std::move(s));
  }
  return out;
}

inline std::string sweep_summary_to_csv(const std::vector<SweepPointSummary>& points) {
  std::ostringstream out;
  out.precision(17);
  out << "axis,value,runs,median_log10_p,mean_log10_p,mean_p\n";
  for (const auto& s : points)
    out << s.axis << ',' << s.value << ',' << s.runs << ',' << s.median_log10_p << ','
        << s.mean_log10_p << ',' << s.mean_p << '\n';
  return out.str();
}

}  // namespace dwmark
