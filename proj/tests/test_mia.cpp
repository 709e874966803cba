// Copyright (c) 2026 dwmark contributors
// SPDX-License-Identifier: Apache-2.0

#include "dwmark/mia.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "dwmark/toylm.hpp"

namespace dwmark {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ScoredDocument doc_with_logprobs(std::vector<double> conditioned) {
  std::vector<token_id> tokens(conditioned.size() + 1, 1);
  std::vector<double> lps;
  lps.push_back(0.0);  // becomes the sentinel
  lps.insert(lps.end(), conditioned.begin(), conditioned.end());
  return make_scored_document(std::move(tokens), std::move(lps));
}

std::string random_text(std::mt19937_64& rng, std::size_t len) {
  std::string s;
  s.reserve(len);
  for (std::size_t i = 0; i < len; ++i)
    s.push_back(static_cast<char>('0' + static_cast<char>(rng() % 40)));
  return s;
}

class UniformBackend : public ModelBackend {
 public:
  explicit UniformBackend(std::size_t v) : v_(v) {}
  VocabInfo vocab() const override { return {v_, true}; }
  std::vector<double> next_token_logits(std::span<const token_id>) const override {
    return std::vector<double>(v_, 0.0);
  }

 private:
  std::size_t v_;
};

// Fixed three-token distribution (0.7, 0.2, 0.1) at every position.
class SkewBackend : public ModelBackend {
 public:
  VocabInfo vocab() const override { return {3, true}; }
  std::vector<double> next_token_logits(std::span<const token_id>) const override {
    return {std::log(0.7), std::log(0.2), std::log(0.1)};
  }
};

// Deterministic chain: probability 1 on (last + 1) % V.
class ChainBackend : public ModelBackend {
 public:
  VocabInfo vocab() const override { return {4, true}; }
  std::vector<double> next_token_logits(std::span<const token_id> ctx) const override {
    std::vector<double> l(4, -kInf);
    l[ctx.empty() ? 0 : (ctx.back() + 1) % 4] = 0.0;
    return l;
  }
};

TEST(MiaPpl, SignAndExtremes) {
  EXPECT_DOUBLE_EQ(mia_ppl(doc_with_logprobs({0.0, 0.0})), 0.0);  // memorized: maximum
  UniformBackend b(256);
  const auto scored = b.score_sequence(std::vector<token_id>{1, 2, 3});
  EXPECT_NEAR(mia_ppl(scored), -std::log(256.0), 1e-12);
  // Lower perplexity must outrank higher perplexity.
  EXPECT_GT(mia_ppl(doc_with_logprobs({-1.0, -1.0})), mia_ppl(doc_with_logprobs({-2.0, -2.0})));
}

TEST(MiaZlib, LinearInTotalLoss) {
  const std::string text = "some moderately long fixture text for compression";
  const auto once = doc_with_logprobs({-1.0, -2.0, -0.5});
  const auto twice = doc_with_logprobs({-2.0, -4.0, -1.0});
  const double s1 = mia_zlib(text, once);
  const double s2 = mia_zlib(text, twice);
  EXPECT_DOUBLE_EQ(s2, 2.0 * s1);
  EXPECT_LT(s1, 0.0);
  // Determinism at the fixed compression level.
  EXPECT_DOUBLE_EQ(mia_zlib(text, once), s1);
  EXPECT_THROW(mia_zlib("", once), invalid_argument);
}

TEST(MiaZlib, RepetitiveTextScoresLowerAtEqualModelLoss) {
  std::string repetitive, random;
  std::mt19937_64 rng(13);
  for (int i = 0; i < 50; ++i) repetitive += "ab";
  random = random_text(rng, 100);
  const auto scored = doc_with_logprobs(std::vector<double>(99, -1.0));
  EXPECT_LT(mia_zlib(repetitive, scored), mia_zlib(random, scored));
}

TEST(MiaMink, BottomKByHand) {
  // Shuffled on purpose: selection must not depend on input order.
  const auto scored = doc_with_logprobs({-3.0, -1.0, -5.0, -2.0, -4.0});
  EXPECT_DOUBLE_EQ(mia_mink(scored, 40.0), -4.5);  // mean(-5, -4)
  EXPECT_DOUBLE_EQ(mia_mink(scored, 100.0), -3.0);  // mean of all
  // ceil(0.2 * 5) = 1: just the minimum.
  EXPECT_DOUBLE_EQ(mia_mink(scored, 20.0), -5.0);
  EXPECT_THROW(mia_mink(scored, 0.0), invalid_argument);
  EXPECT_THROW(mia_mink(scored, 100.5), invalid_argument);
}

// A very likely extra token never joins the bottom set; the score moves only
// because the ceil-rounded set size grows with N (2 of 5 -> 3 of 6).
TEST(MiaMink, LikelyTokenStaysOutOfBottomSet) {
  const auto six = doc_with_logprobs({-1.0, -2.0, -3.0, -4.0, -5.0, -0.01});
  EXPECT_DOUBLE_EQ(mia_mink(six, 40.0), -4.0);  // mean(-5, -4, -3)
  // Replacing the likely token by another above-threshold value changes nothing.
  const auto alt = doc_with_logprobs({-1.0, -2.0, -3.0, -4.0, -5.0, -0.5});
  EXPECT_DOUBLE_EQ(mia_mink(alt, 40.0), -4.0);
}

TEST(MiaMink, RaisingABottomValueNeverLowersTheScore) {
  const auto base = doc_with_logprobs({-1.0, -2.0, -3.0, -4.0, -5.0});
  const auto raised = doc_with_logprobs({-1.0, -2.0, -3.0, -4.0, -4.2});
  EXPECT_GE(mia_mink(raised, 40.0), mia_mink(base, 40.0));
}

TEST(MiaMinkpp, WeightedMomentOracle) {
  // Distribution (0.7, 0.2, 0.1); observed token has probability 0.2. The
  // standardized score uses probability-weighted moments of log-probs:
  //   mu = sum p_v log p_v, sigma^2 = sum p_v (log p_v)^2 - mu^2
  // giving mu = -0.8018185525, sigma = 0.7031264535, z = -1.1486118264.
  const double l7 = std::log(0.7), l2 = std::log(0.2), l1 = std::log(0.1);
  const double mu = 0.7 * l7 + 0.2 * l2 + 0.1 * l1;
  const double second = 0.7 * l7 * l7 + 0.2 * l2 * l2 + 0.1 * l1 * l1;
  const double sigma = std::sqrt(second - mu * mu);
  const double want_z = (l2 - mu) / sigma;

  SkewBackend b;
  const std::vector<token_id> toks{0, 1};  // one conditioned position, token 1
  const double got = mia_minkpp(b, toks, 100.0);
  EXPECT_NEAR(got, want_z, 1e-12);
  EXPECT_NEAR(got, -1.1486118264, 1e-9);
  EXPECT_NEAR(mu, -0.8018185525, 1e-9);
}

TEST(MiaMinkpp, DegenerateDistributionsScoreZero) {
  // Uniform: sigma_i = 0 at every position, so every z_i is defined as 0.
  UniformBackend u(8);
  EXPECT_DOUBLE_EQ(mia_minkpp(u, std::vector<token_id>{1, 2, 3}, 20.0), 0.0);
  // Deterministic model: the only in-support token carries all the mass, so
  // the distribution is degenerate too (and the observed z = 0 is trivially
  // the maximum over candidates).
  ChainBackend c;
  EXPECT_DOUBLE_EQ(mia_minkpp(c, std::vector<token_id>{0, 1, 2}, 100.0), 0.0);
}

TEST(MiaMinkpp, RequiresFullLogits) {
  class NoLogits : public ModelBackend {
   public:
    VocabInfo vocab() const override { return {4, false}; }
    std::vector<double> next_token_logits(std::span<const token_id>) const override {
      throw unsupported_backend("x");
    }
  } b;
  EXPECT_THROW(mia_minkpp(b, std::vector<token_id>{0, 1}, 20.0), unsupported_backend);
}

TEST(MiaDcpdd, HandArithmetic) {
  // logprobs [-1, -2], log-frequencies [-3, -1] -> mean(2, -1) = 0.5 exactly.
  std::vector<token_id> tokens{9, 0, 1};
  std::vector<double> lps{0.0, -1.0, -2.0};
  const auto scored = make_scored_document(tokens, lps);
  const auto logf = [](token_id id) { return id == 0 ? -3.0 : -1.0; };
  EXPECT_DOUBLE_EQ(mia_dcpdd_with_logf(scored, logf), 0.5);

  // Perfect calibration: model logprobs equal to log-frequencies -> 0.
  const auto calibrated = [&](token_id) { return -1.5; };
  const auto flat = make_scored_document(tokens, {0.0, -1.5, -1.5});
  EXPECT_DOUBLE_EQ(mia_dcpdd_with_logf(flat, calibrated), 0.0);
}

TEST(FrequencyTable, CountsAndFloor) {
  const std::vector<std::string> corpus{"aab", "ba"};
  const auto t = FrequencyTable::from_corpus(corpus, 256);
  EXPECT_EQ(t.total, 5u);
  EXPECT_DOUBLE_EQ(t.frequency('a'), 3.0 / 5.0);
  EXPECT_DOUBLE_EQ(t.frequency('b'), 2.0 / 5.0);
  // Unseen token floors at 1 / (total + |V|).
  EXPECT_DOUBLE_EQ(t.frequency('z'), 1.0 / (5.0 + 256.0));
  EXPECT_THROW(t.frequency(300), invalid_argument);
}

TEST(FrequencyTable, MemorizedRareTokenContributesLargePositive) {
  const auto t = FrequencyTable::from_corpus(std::vector<std::string>{"aaaa"}, 256);
  const auto scored = make_scored_document({static_cast<token_id>('a'), static_cast<token_id>('z')},
                                           {0.0, 0.0});  // probability 1 on 'z'
  const double score = mia_dcpdd(scored, t);
  EXPECT_DOUBLE_EQ(score, -std::log(1.0 / (4.0 + 256.0)));
  EXPECT_GT(score, 5.0);
}

TEST(FrequencyTable, JsonRoundTripAndValidation) {
  const auto t = FrequencyTable::from_corpus(std::vector<std::string>{"hello world"}, 256);
  const auto j = t.to_json();
  const auto back = FrequencyTable::from_json(j);
  EXPECT_EQ(back.total, t.total);
  EXPECT_EQ(back.counts, t.counts);

  auto bad = j;
  bad["total"] = 999;
  EXPECT_THROW(FrequencyTable::from_json(bad), invalid_argument);
  EXPECT_THROW(FrequencyTable::from_json(nlohmann::json::object()), invalid_argument);
}

TEST(EvaluateMias, IdenticalSetsGiveExactlyHalf) {
  NGramModel model(3, 0.1, 256);
  std::mt19937_64 rng(7);
  model.train_document(std::string_view(random_text(rng, 800)));
  std::vector<Document> docs;
  for (int i = 0; i < 5; ++i) docs.push_back({"d" + std::to_string(i), random_text(rng, 60), ""});
  MiaParams params;
  params.freqs = FrequencyTable::from_corpus(std::vector<std::string>{random_text(rng, 500)});
  const auto table = evaluate_mias(model, docs, docs, kAllMiaMethods, params);
  ASSERT_EQ(table.size(), 5u);
  for (const auto& [name, auroc] : table) EXPECT_DOUBLE_EQ(auroc, 0.5) << name;
}

TEST(EvaluateMias, CleanSeparationGivesAurocOne) {
  std::mt19937_64 rng(19);
  std::vector<Document> members, nonmembers;
  std::vector<std::string> member_texts;
  for (int i = 0; i < 8; ++i) {
    member_texts.push_back(random_text(rng, 120));
    members.push_back({"m" + std::to_string(i), member_texts.back(), ""});
    nonmembers.push_back({"n" + std::to_string(i), random_text(rng, 120), ""});
  }
  NGramModel model(5, 0.1, 256);
  for (int rep = 0; rep < 5; ++rep) model.train_corpus(member_texts);
  MiaParams params;
  const MiaMethod methods[] = {MiaMethod::ppl, MiaMethod::mink};
  const auto table = evaluate_mias(model, members, nonmembers, methods, params);
  EXPECT_DOUBLE_EQ(table.at("ppl"), 1.0);
  EXPECT_DOUBLE_EQ(table.at("mink"), 1.0);
}

TEST(EvaluateMias, SkipPolicyAndValidation) {
  NGramModel model(3, 0.1, 256);
  std::vector<Document> members{{"ok", "long enough text", ""}, {"short", "x", ""}};
  std::vector<Document> nonmembers{{"n0", "another usable text", ""}};
  MiaParams params;
  const MiaMethod methods[] = {MiaMethod::ppl};
  const auto table = evaluate_mias(model, members, nonmembers, methods, params);
  EXPECT_EQ(table.size(), 1u);  // ran despite one skipped member

  const auto scores = score_documents(model, members, MiaMethod::ppl, params);
  ASSERT_EQ(scores.size(), 1u);
  EXPECT_EQ(scores[0].doc_id, "ok");

  EXPECT_THROW(evaluate_mias(model, {}, nonmembers, methods, params), invalid_argument);
  EXPECT_THROW(score_documents(model, members, MiaMethod::dcpdd_simplified, params),
               invalid_argument);  // no frequency table provided
}

TEST(MiaMethodNames, RoundTrip) {
  EXPECT_STREQ(to_string(MiaMethod::dcpdd_simplified), "dcpdd-simplified");
  EXPECT_EQ(mia_method_from_string("minkpp"), MiaMethod::minkpp);
  EXPECT_EQ(mia_method_from_string("dcpdd"), MiaMethod::dcpdd_simplified);
  EXPECT_THROW(mia_method_from_string("nope"), invalid_argument);
}

}  // namespace
}  // namespace dwmark
