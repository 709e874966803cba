// Copyright (c) 2026 dwmark contributors
// SPDX-License-Identifier: Apache-2.0
//
// Dataset-membership detector. For each released document we compare the
// model's perplexity on the public version against the average perplexity of
// its m private rephrasings:
//
//   d_i = ppl(public_i) - (1/m) * sum_j ppl(private_ij)     (first m versions)
//
// A model trained on the public release memorizes it, pushing d_i negative;
// a clean model sees exchangeable versions and d_i centers on zero. The
// dataset-level verdict is a one-sided paired t-test (H1: mean d < 0) after
// winsorizing the top clip_fraction of differences. An unpaired variant pools
// public vs private perplexities through a Welch test instead (ablation).
//
// Verdicts are dataset-level; per-document d_i values are diagnostics only.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dwmark/backend.hpp"
#include "dwmark/common.hpp"
#include "dwmark/core.hpp"
#include "dwmark/parallel.hpp"
#include "dwmark/stats.hpp"
#include "dwmark/toylm.hpp"

namespace dwmark {

struct DetectorConfig {
  enum class Variant { paired, unpaired };

  int m_private = 1;
  double clip_fraction = 0.05;
  stats::ClipRule clip_rule = stats::ClipRule::abs_winsorize;
  Variant variant = Variant::paired;
};

inline void validate_config_or_throw(const DetectorConfig& c) {
  if (c.m_private < 1) throw invalid_argument("detector: m_private must be >= 1");
  if (!(c.clip_fraction >= 0.0 && c.clip_fraction < 1.0))
    throw invalid_argument("detector: clip_fraction must lie in [0, 1)");
}

struct PerDocDiff {
  std::string doc_id;
  double ppl_public = 0.0;
  double ppl_private_mean = 0.0;
  double d = 0.0;  // raw (pre-clipping) difference
};

struct DetectionReport {
  std::string dataset;
  std::size_t n_documents = 0;          // documents that entered the test
  int m_private = 1;
  std::vector<double> differences;      // post-clipping, in manifest order
  std::size_t clipped_count = 0;        // differences actually changed by clipping
  stats::TestResult test;
  std::vector<PerDocDiff> per_doc;
  std::vector<std::string> skipped;     // "doc_id: reason" for excluded entries
  DetectorConfig config;
  std::string manifest_sha256;
};

// Perplexity of one document under a backend. Documents too short to score
// (fewer than 2 tokens) are an error here; dataset-level entry points skip
// them instead.
inline double doc_perplexity(const ModelBackend& backend, const Document& doc) {
  const auto tokens = bytes_to_tokens(doc.text);
  if (tokens.size() < 2) throw invalid_argument("document too short to score: " + doc.doc_id);
  return backend.score_sequence(tokens).ppl;
}

// One row of scored perplexities for a manifest entry.
struct PplRow {
  std::string doc_id;
  double ppl_public = 0.0;
  std::vector<double> ppl_private;  // scored private versions, manifest order
};

namespace detail {

// The t statistic is computed over a sorted copy so that document order can
// never perturb floating-point rounding: permuting the manifest leaves the
// p-value bit-identical.
inline stats::TestResult order_free_paired_t(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return stats::paired_t_test(values);
}

inline stats::TestResult order_free_welch(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return stats::welch_t_test(a, b);
}

}  // namespace detail

// Membership test over pre-computed perplexities. This is the reduction seam:
// everything after scoring is deterministic arithmetic, so experiments that
// cache per-version perplexities (e.g. relabeling trials) reuse it directly.
inline DetectionReport detection_from_ppl_table(const std::vector<PplRow>& rows,
                                                const DetectorConfig& config,
                                                std::string dataset = "",
                                                std::string manifest_sha256 = "") {
  validate_config_or_throw(config);
  const auto m = static_cast<std::size_t>(config.m_private);
  for (const auto& r : rows)
    if (r.ppl_private.size() < m)
      throw invalid_argument("entry " + r.doc_id + " has " +
                             std::to_string(r.ppl_private.size()) +
                             " private versions, need " + std::to_string(m));
  if (rows.size() < 2) throw invalid_argument("membership test needs >= 2 scored documents");

  DetectionReport rep;
  rep.dataset = std::move(dataset);
  rep.manifest_sha256 = std::move(manifest_sha256);
  rep.config = config;
  rep.m_private = config.m_private;
  rep.n_documents = rows.size();

  std::vector<double> d;
  d.reserve(rows.size());
  for (const auto& r : rows) {
    double priv = 0.0;
    for (std::size_t j = 0; j < m; ++j) priv += r.ppl_private[j];
    priv /= static_cast<double>(m);
    d.push_back(r.ppl_public - priv);
    rep.per_doc.push_back({r.doc_id, r.ppl_public, priv, d.back()});
  }

  if (config.variant == DetectorConfig::Variant::paired) {
    rep.differences = stats::winsorize_top(d, config.clip_fraction, config.clip_rule);
    for (std::size_t i = 0; i < d.size(); ++i)
      if (rep.differences[i] != d[i]) ++rep.clipped_count;
    rep.test = detail::order_free_paired_t(rep.differences);
  } else {
    // Unpaired ablation: pool public vs all scored private perplexities; no
    // clipping is applied.
    std::vector<double> pub, priv;
    for (const auto& r : rows) {
      pub.push_back(r.ppl_public);
      priv.insert(priv.end(), r.ppl_private.begin(), r.ppl_private.end());
    }
    rep.differences = d;
    rep.clipped_count = 0;
    rep.test = detail::order_free_welch(pub, priv);
  }
  return rep;
}

// Differences-only seam (paired variant): used by tests and by relabeling
// experiments that construct d_i directly.
inline DetectionReport detection_from_differences(const std::vector<double>& differences,
                                                  const DetectorConfig& config,
                                                  std::string dataset = "") {
  validate_config_or_throw(config);
  if (config.variant != DetectorConfig::Variant::paired)
    throw invalid_argument("differences-only input requires the paired variant");
  if (differences.size() < 2)
    throw invalid_argument("membership test needs >= 2 differences");
  DetectionReport rep;
  rep.dataset = std::move(dataset);
  rep.config = config;
  rep.m_private = config.m_private;
  rep.n_documents = differences.size();
  rep.differences = stats::winsorize_top(differences, config.clip_fraction, config.clip_rule);
  for (std::size_t i = 0; i < differences.size(); ++i)
    if (rep.differences[i] != differences[i]) ++rep.clipped_count;
  rep.test = detail::order_free_paired_t(rep.differences);
  return rep;
}

// Scores every needed version of every manifest entry (in parallel when
// threads > 1). Entries that cannot be scored — too short, or a backend
// failure for any of their versions — are excluded pairwise and recorded.
// Returns rows in manifest order plus the skip log.
inline std::pair<std::vector<PplRow>, std::vector<std::string>> score_manifest(
    const ModelBackend& backend, const DatasetManifest& manifest, const DetectorConfig& config,
    int threads = 1) {
  validate_config_or_throw(config);
  const auto m = static_cast<std::size_t>(config.m_private);
  for (const auto& e : manifest.entries)
    if (e.private_versions.size() < m)
      throw invalid_argument("entry " + e.doc_id + " has " +
                             std::to_string(e.private_versions.size()) +
                             " private versions, need " + std::to_string(m));
  // The unpaired variant pools every private version; paired needs only the
  // first m.
  const bool all_privates = config.variant == DetectorConfig::Variant::unpaired;

  std::vector<std::optional<PplRow>> rows(manifest.entries.size());
  std::vector<std::string> skip_reason(manifest.entries.size());
  parallel_for(manifest.entries.size(), threads, [&](std::size_t i) {
    const auto& e = manifest.entries[i];
    try {
      PplRow row;
      row.doc_id = e.doc_id;
      row.ppl_public = doc_perplexity(backend, e.public_version);
      const std::size_t count = all_privates ? e.private_versions.size() : m;
      for (std::size_t j = 0; j < count; ++j)
        row.ppl_private.push_back(doc_perplexity(backend, e.private_versions[j]));
      rows[i] = std::move(row);
    } catch (const error& ex) {
      skip_reason[i] = ex.what();
    }
  });

  std::vector<PplRow> scored;
  std::vector<std::string> skipped;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i])
      scored.push_back(std::move(*rows[i]));
    else
      skipped.push_back(manifest.entries[i].doc_id + ": " + skip_reason[i]);
  }
  return {std::move(scored), std::move(skipped)};
}

// Raw paired differences for a manifest (pre-clipping), in manifest order.
inline std::vector<double> paired_differences(const ModelBackend& backend,
                                              const DatasetManifest& manifest,
                                              const DetectorConfig& config, int threads = 1) {
  const auto [rows, skipped] = score_manifest(backend, manifest, config, threads);
  (void)skipped;
  std::vector<double> d;
  d.reserve(rows.size());
  for (const auto& r : rows) {
    double priv = 0.0;
    for (std::size_t j = 0; j < static_cast<std::size_t>(config.m_private); ++j)
      priv += r.ppl_private[j];
    d.push_back(r.ppl_public - priv / static_cast<double>(config.m_private));
  }
  return d;
}

// Full scoring + test pipeline for one manifest. Runs the test only if at
// least 90% of entries were scorable; otherwise throws, naming the skipped
// documents.
inline DetectionReport stamp_test(const ModelBackend& backend, const DatasetManifest& manifest,
                                  const DetectorConfig& config, int threads = 1) {
  auto [rows, skipped] = score_manifest(backend, manifest, config, threads);
  if (!manifest.entries.empty() &&
      static_cast<double>(rows.size()) <
          0.9 * static_cast<double>(manifest.entries.size())) {
    std::string msg = "fewer than 90% of documents could be scored; skipped:";
    for (const auto& s : skipped) msg += " [" + s + "]";
    throw error(msg);
  }
  auto rep = detection_from_ppl_table(rows, config, manifest.name,
                                      manifest_content_hash(manifest));
  rep.skipped = std::move(skipped);
  return rep;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline const char* to_string(DetectorConfig::Variant v) {
  return v == DetectorConfig::Variant::paired ? "paired" : "unpaired";
}
inline const char* to_string(stats::ClipRule r) {
  return r == stats::ClipRule::abs_winsorize ? "abs_winsorize" : "signed_upper_winsorize";
}

inline nlohmann::json test_result_to_json(const stats::TestResult& t) {
  return {{"statistic", t.statistic}, {"df", t.df},
          {"p_one_sided", t.p_one_sided}, {"ln_p", t.ln_p},
          {"log10_p", t.ln_p / std::log(10.0)}, {"n", t.n},
          {"mean_diff", t.mean_diff}, {"sd_diff", t.sd_diff},
          {"degenerate", t.degenerate}};
}

inline nlohmann::json detection_report_to_json(const DetectionReport& r) {
  nlohmann::json per_doc = nlohmann::json::array();
  for (const auto& pd : r.per_doc)
    per_doc.push_back({{"doc_id", pd.doc_id}, {"ppl_public", pd.ppl_public},
                       {"ppl_private_mean", pd.ppl_private_mean}, {"d", pd.d}});
  return {{"dataset", r.dataset},
          {"n_documents", r.n_documents},
          {"m_private", r.m_private},
          {"config", {{"m_private", r.config.m_private},
                      {"clip_fraction", r.config.clip_fraction},
                      {"clip_rule", to_string(r.config.clip_rule)},
                      {"variant", to_string(r.config.variant)}}},
          {"differences", r.differences},
          {"clipped_count", r.clipped_count},
          {"test", test_result_to_json(r.test)},
          {"per_doc", per_doc},
          {"skipped", r.skipped},
          {"manifest_sha256", r.manifest_sha256}};
}

}  // namespace dwmark
