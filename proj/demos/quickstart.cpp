// Copyright (c) 2026 dwmark contributors
// SPDX-License-Identifier: Apache-2.0
//
// In-process tour of the toolkit: synthesize a watermarked rephrase set,
// split it into a public release and a private vault, contaminate a training
// corpus with the public versions, and prove dataset membership with the
// paired perplexity test — then show that a clean model stays quiet.
//
//   cmake --build build && ./build/demos/quickstart

#include <cstdio>

#include "dwmark/core.hpp"
#include "dwmark/detect.hpp"
#include "dwmark/markov.hpp"
#include "dwmark/pipeline.hpp"
#include "dwmark/toylm.hpp"
#include "dwmark/watermark.hpp"

int main() {
  using namespace dwmark;

  // 1. A deterministic background corpus and a generator trained on it.
  //    The generator plays the role of the rephrasing model.
  const MarkovSource source(2026);
  const auto background = source.documents(400, 2048, "bg", 0);
  NGramModel generator(3, 0.5);
  for (const auto& d : background) generator.train_document(d.text);
  std::printf("background corpus: %zu documents\n", background.size());

  // 2. Synthesize the rephrase set: for each base document, one public and
  //    m = 2 private versions, every version under its own fresh key.
  std::vector<std::string> prompts;
  for (std::size_t i = 0; i < 24; ++i) prompts.push_back(source.generate(16, 5000 + i));
  const WatermarkParams params{/*gamma=*/0.5, /*delta=*/2.0, /*context_width=*/1};
  const SamplerConfig sampler{SamplerKind::temperature, 1.0, 0};
  const auto synth = synthesize_rephrase_manifest(generator, prompts, /*keys_per_doc=*/3,
                                                  params, sampler, /*doc_length=*/200,
                                                  /*seed=*/7);
  const DatasetManifest& manifest = synth.manifest;
  std::printf("rephrase set: %zu documents, m=%zu, %zu keys\n", manifest.entries.size(),
              manifest.m_private(), manifest.keys.size());

  // 3. Each version carries its own watermark and nobody else's.
  const Document& sample = manifest.entries[0].public_version;
  const auto own = watermark_z_test(*manifest.find_key(sample.key_id),
                                    bytes_to_tokens(sample.text), params);
  const auto wrong = watermark_z_test(*manifest.find_key(manifest.entries[1].public_version.key_id),
                                      bytes_to_tokens(sample.text), params);
  std::printf("watermark z on %s: %.2f with its key, %.2f with another key\n",
              sample.doc_id.c_str(), own.z, wrong.z);

  // 4. Split: the public release carries no key material and no private text.
  const auto split = split_manifest(manifest);
  std::printf("public release: %zu bytes (secrets present: %s)\n", split.public_release.size(),
              split.public_release.find("secret_hex") == std::string::npos ? "no" : "yes");

  // 5. A data collector scrapes the public versions into their training set.
  const auto corpus = build_contaminated_corpus(background, manifest, /*duplication=*/1,
                                                /*alpha=*/1.0, /*seed=*/3);
  std::printf("contaminated corpus: %zu documents, %.3f%% contaminated bytes\n",
              corpus.documents.size(), 100.0 * corpus.contamination_fraction());
  NGramModel suspect(5, 0.1);
  suspect.train_corpus(corpus.texts());

  // 6. Membership test: public perplexity drops below the private average on
  //    the suspect model, and the paired test calls it.
  DetectorConfig det;
  const auto verdict = stamp_test(suspect, manifest, det, /*threads=*/4);
  std::printf("suspect model:  t=%.2f, p=%.3g  -> %s\n", verdict.test.statistic,
              verdict.test.p_one_sided,
              verdict.test.p_one_sided < 0.01 ? "dataset was trained on" : "no evidence");

  // 7. The same test against a model that never saw the release stays quiet.
  NGramModel clean(5, 0.1);
  {
    std::vector<std::string> texts;
    for (const auto& d : background) texts.push_back(d.text);
    clean.train_corpus(texts);
  }
  const auto control = stamp_test(clean, manifest, det, /*threads=*/4);
  std::printf("clean control:  t=%.2f, p=%.3g  -> %s\n", control.test.statistic,
              control.test.p_one_sided,
              control.test.p_one_sided < 0.01 ? "dataset was trained on" : "no evidence");
  return 0;
}
