// Copyright (c) 2026 dwmark contributors
// SPDX-License-Identifier: Apache-2.0
//
// Distinguishability audit: can a small bag-of-words linear classifier tell
// two text sets apart?  Reports held-out AUROC averaged over stratified
// cross-validation folds.  0.5 means indistinguishable at this feature
// resolution; 1.0 means trivially separable.
//
// Determinism and symmetry guarantees (relied on by tests):
//   * Everything is deterministic for a fixed seed, independent of the
//     thread count used for fold training.
//   * Fold assignment is stratified per class and seeded by (seed, class
//     size) only, never by which argument a class arrived in.  Together
//     with per-class gradient accumulation in the trainer (IEEE addition
//     is sign-symmetric and commutative, so training on label-flipped data
//     yields the exactly negated scorer), this makes the audit symmetric:
//     audit(a, b) and audit(b, a) return bit-identical AUROCs.
//   * Equal-size classes receive the same within-class fold pattern, so
//     index-aligned corpora (alternative versions of the same underlying
//     documents) keep aligned pairs inside one fold instead of leaking
//     shared vocabulary across the train/test split.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dwmark/common.hpp"
#include "dwmark/mix.hpp"
#include "dwmark/parallel.hpp"
#include "dwmark/stats.hpp"

namespace dwmark {

// ---------------------------------------------------------------------------
// Bag-of-words features
// ---------------------------------------------------------------------------

struct BowMatrix {
  std::vector<std::string> vocabulary;    // column order, lexicographic
  std::vector<std::vector<double>> rows;  // one term-count row per document
  std::vector<int> labels;                // 1 = first set, 0 = second set
};

// Lowercased alphanumeric runs.  ASCII letters are case-folded; bytes >= 0x80
// (UTF-8 continuation or lead bytes) are kept verbatim inside a token so
// non-ASCII words still tokenize deterministically.  Everything else splits.
inline std::vector<std::string> bow_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (const char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    const bool keep = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
                      (c >= 'A' && c <= 'Z') || c >= 0x80;
    if (keep) {
      cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a')
                                         : raw);
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// Count matrix over the union vocabulary of both sets.  Rows appear in input
// order, first set before second; columns are lexicographic so the layout is
// independent of document order.
inline BowMatrix bow_features(const std::vector<std::string>& set_a,
                              const std::vector<std::string>& set_b) {
  if (set_a.empty() || set_b.empty())
    throw invalid_argument("bow_features: both text sets must be non-empty");

  std::vector<std::vector<std::string>> docs;
  docs.reserve(set_a.size() + set_b.size());
  for (const auto& t : set_a) docs.push_back(bow_tokenize(t));
  for (const auto& t : set_b) docs.push_back(bow_tokenize(t));

  std::map<std::string, std::size_t> column;  // ordered map = lexicographic
  for (const auto& d : docs)
    for (const auto& w : d) column.emplace(w, 0);

  BowMatrix m;
  m.vocabulary.reserve(column.size());
  std::size_t next = 0;
  for (auto& [word, idx] : column) {
    idx = next++;
    m.vocabulary.push_back(word);
  }

  m.rows.assign(docs.size(), std::vector<double>(column.size(), 0.0));
  for (std::size_t i = 0; i < docs.size(); ++i)
    for (const auto& w : docs[i]) m.rows[i][column.at(w)] += 1.0;

  m.labels.assign(docs.size(), 0);
  std::fill(m.labels.begin(),
            m.labels.begin() + static_cast<std::ptrdiff_t>(set_a.size()), 1);
  return m;
}

// ---------------------------------------------------------------------------
// Default classifier: L2-regularized logistic regression
// ---------------------------------------------------------------------------

struct LogRegConfig {
  double l2 = 1e-2;      // ridge strength on the weights (bias unregularized)
  int iterations = 400;  // full-batch gradient steps
};

struct LinearScorer {
  std::vector<double> weights;
  double bias = 0.0;
  double operator()(const std::vector<double>& row) const {
    double z = bias;
    for (std::size_t k = 0; k < weights.size(); ++k) z += weights[k] * row[k];
    return z;
  }
};

namespace detail {
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}
}  // namespace detail

// Full-batch gradient descent from a zero start with a step size bounded by
// the loss curvature (1 / (l2 + max ||row||^2 / 4)), so training needs no
// tuning and is deterministic.  Labels are +1 / -1.
//
// Gradients are accumulated separately per class and combined with a single
// commutative addition.  That detail is what makes training on label-flipped
// data (same per-class document order, classes swapped) produce the exactly
// negated weight vector, which the audit's argument-order symmetry relies on.
inline LinearScorer train_logreg_l2(const std::vector<std::vector<double>>& rows,
                                    const std::vector<int>& labels,
                                    const LogRegConfig& cfg = {}) {
  if (rows.empty() || rows.size() != labels.size())
    throw invalid_argument("train_logreg_l2: need matching, non-empty rows and labels");
  if (cfg.l2 < 0.0 || !std::isfinite(cfg.l2) || cfg.iterations < 1)
    throw invalid_argument("train_logreg_l2: l2 must be >= 0 and iterations >= 1");
  const std::size_t d = rows[0].size();
  for (const auto& r : rows)
    if (r.size() != d) throw invalid_argument("train_logreg_l2: ragged feature rows");
  for (const int y : labels)
    if (y != 1 && y != -1) throw invalid_argument("train_logreg_l2: labels must be +1/-1");

  double max_sq = 1.0;  // the implicit bias feature contributes 1
  for (const auto& r : rows) {
    double s = 1.0;
    for (const double v : r) s += v * v;
    max_sq = std::max(max_sq, s);
  }
  const double step = 1.0 / (cfg.l2 + 0.25 * max_sq);
  const double inv_n = 1.0 / static_cast<double>(rows.size());

  std::vector<double> w(d, 0.0);
  double b = 0.0;
  std::vector<double> acc_pos(d + 1), acc_neg(d + 1);  // [d] holds the bias slot
  for (int it = 0; it < cfg.iterations; ++it) {
    std::fill(acc_pos.begin(), acc_pos.end(), 0.0);
    std::fill(acc_neg.begin(), acc_neg.end(), 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& x = rows[i];
      double z = b;
      for (std::size_t k = 0; k < d; ++k) z += w[k] * x[k];
      const double y = labels[i];
      const double g = -y * detail::sigmoid(-y * z);  // d/dz log(1 + e^{-yz})
      auto& acc = labels[i] == 1 ? acc_pos : acc_neg;
      for (std::size_t k = 0; k < d; ++k) acc[k] += g * x[k];
      acc[d] += g;
    }
    for (std::size_t k = 0; k < d; ++k)
      w[k] -= step * ((acc_pos[k] + acc_neg[k]) * inv_n + cfg.l2 * w[k]);
    b -= step * ((acc_pos[d] + acc_neg[d]) * inv_n);
  }
  return LinearScorer{std::move(w), b};
}

// ---------------------------------------------------------------------------
// Cross-validated audit
// ---------------------------------------------------------------------------

// Pluggable classifier seam: given training rows with +1/-1 labels, return a
// scoring function over feature rows (higher = more like the +1 class).
using ClassifierTrainer = std::function<std::function<double(const std::vector<double>&)>(
    const std::vector<std::vector<double>>&, const std::vector<int>&)>;

struct AuditConfig {
  int folds = 5;
  std::uint64_t seed = 0;
  int threads = 1;
  LogRegConfig logreg;  // parameters for the default classifier
  std::string classifier_name = "logreg-l2";
  ClassifierTrainer trainer;  // empty -> L2 logistic regression
};

struct AuditResult {
  double auroc_mean = 0.0;
  std::vector<double> auroc_per_fold;
  std::string classifier;
  std::uint64_t seed = 0;
};

namespace detail {
inline constexpr std::uint64_t kAuditFoldTag = 0xa4d17'f01d5eedULL;
}

// Stratified fold assignment: each class is shuffled with a generator seeded
// by (seed, class size) and dealt round-robin, so folds get near-equal class
// shares and the assignment is invariant to exchanging the two sets.
inline std::vector<int> stratified_folds(const std::vector<int>& labels, int folds,
                                         std::uint64_t seed) {
  if (folds < 2) throw invalid_argument("stratified_folds: folds must be >= 2");
  std::vector<int> fold(labels.size(), -1);
  for (const int cls : {1, 0}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) idx.push_back(i);
    std::mt19937_64 rng(mix_words(
        {detail::kAuditFoldTag, seed, static_cast<std::uint64_t>(idx.size())}));
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[rand_below(rng, i)]);
    for (std::size_t j = 0; j < idx.size(); ++j)
      fold[idx[j]] = static_cast<int>(j % static_cast<std::size_t>(folds));
  }
  return fold;
}

// Mean held-out AUROC of the configured classifier across stratified folds.
// Each set must contribute at least `folds` documents so every fold has test
// examples of both classes.
inline AuditResult distinguishability_auroc(const std::vector<std::string>& set_a,
                                            const std::vector<std::string>& set_b,
                                            const AuditConfig& cfg = {}) {
  if (cfg.folds < 2) throw invalid_argument("distinguishability_auroc: folds must be >= 2");
  if (cfg.threads < 1) throw invalid_argument("distinguishability_auroc: threads must be >= 1");
  if (set_a.size() < static_cast<std::size_t>(cfg.folds) ||
      set_b.size() < static_cast<std::size_t>(cfg.folds))
    throw invalid_argument("distinguishability_auroc: each set needs at least one document per fold (got " +
                           std::to_string(set_a.size()) + " and " + std::to_string(set_b.size()) +
                           " for " + std::to_string(cfg.folds) + " folds)");

  const BowMatrix m = bow_features(set_a, set_b);
  const std::vector<int> fold = stratified_folds(m.labels, cfg.folds, cfg.seed);

  std::vector<double> per_fold(static_cast<std::size_t>(cfg.folds), 0.0);
  parallel_for(static_cast<std::size_t>(cfg.folds), static_cast<std::size_t>(cfg.threads),
               [&](std::size_t f) {
    std::vector<std::vector<double>> train_rows;
    std::vector<int> train_labels;
    std::vector<const std::vector<double>*> test_pos, test_neg;
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
      if (fold[i] == static_cast<int>(f)) {
        (m.labels[i] == 1 ? test_pos : test_neg).push_back(&m.rows[i]);
      } else {
        train_rows.push_back(m.rows[i]);
        train_labels.push_back(m.labels[i] == 1 ? +1 : -1);
      }
    }
    std::function<double(const std::vector<double>&)> scorer =
        cfg.trainer ? cfg.trainer(train_rows, train_labels)
                    : std::function<double(const std::vector<double>&)>(
                          train_logreg_l2(train_rows, train_labels, cfg.logreg));
    std::vector<double> pos, neg;
    pos.reserve(test_pos.size());
    neg.reserve(test_neg.size());
    for (const auto* r : test_pos) pos.push_back(scorer(*r));
    for (const auto* r : test_neg) neg.push_back(scorer(*r));
    per_fold[f] = stats::auroc(pos, neg);
  });

  AuditResult r;
  r.auroc_per_fold = std::move(per_fold);
  r.auroc_mean = mean_of(r.auroc_per_fold);
  r.classifier = cfg.classifier_name;
  r.seed = cfg.seed;
  return r;
}

inline nlohmann::json audit_result_to_json(const AuditResult& r) {
  return nlohmann::json{{"auroc_mean", r.auroc_mean},
                        {"auroc_per_fold", r.auroc_per_fold},
                        {"classifier", r.classifier},
                        {"seed", r.seed}};
}

}  // namespace dwmark
