// Copyright (c) 2026 dwmark contributors
// SPDX-License-Identifier: Apache-2.0
//
// Core domain types: watermark keys and parameters, documents, rephrase
// manifests, deterministic key generation, manifest validation, and the
// split into a public release plus a private key vault.
//
// Manifest JSON schema (format_version 1):
//   {
//     "format_version": 1,
//     "name": "...",
//     "params": {"gamma": 0.5, "delta": 2.0, "context_width": 1},
//     "entries": [
//       {"doc_id": "d0",
//        "public":  {"doc_id": "d0#public", "key_id": "k0000", "text": "..."},
//        "private": [{"doc_id": "d0#private0", "key_id": "k0001", "text": "..."},
//                    ...]}
//     ],
//     "keys": [{"id": "k0000", "secret_hex": "<32 hex chars, 128 bits>"}]
//   }
// Serialization is canonical: nlohmann keeps object keys sorted and we always
// dump with indent 2, so identical manifests produce identical bytes. The
// public release is the same schema minus "keys" and minus every "private"
// array; it must never contain a key secret.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "dwmark/common.hpp"

namespace dwmark {

// ---------------------------------------------------------------------------
// Keys and parameters
// ---------------------------------------------------------------------------

// 128-bit watermark secret, kept as two little-endian 64-bit halves.
struct Key128 {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;
  friend bool operator==(const Key128&, const Key128&) = default;
  friend auto operator<=>(const Key128&, const Key128&) = default;
};

inline std::string key128_to_hex(const Key128& k) {
  std::uint8_t bytes[16];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<std::uint8_t>(k.lo >> (8 * i));
  for (int i = 0; i < 8; ++i) bytes[8 + i] = static_cast<std::uint8_t>(k.hi >> (8 * i));
  return hex_encode(bytes);
}

inline Key128 key128_from_hex(std::string_view hex) {
  if (hex.size() != 32) throw invalid_argument("key secret must be 32 hex chars (128 bits)");
  const auto bytes = hex_decode(hex);
  Key128 k;
  for (int i = 0; i < 8; ++i) k.lo |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  for (int i = 0; i < 8; ++i) k.hi |= static_cast<std::uint64_t>(bytes[8 + i]) << (8 * i);
  return k;
}

struct WatermarkKey {
  std::string id;  // opaque label, unique within a manifest
  Key128 secret;
  friend bool operator==(const WatermarkKey&, const WatermarkKey&) = default;
};

// Green-list parameters: fraction gamma of the vocabulary is green given the
// previous context_width tokens, and green logits get +delta before sampling.
struct WatermarkParams {
  double gamma = 0.5;
  double delta = 1.0;
  int context_width = 1;
  friend bool operator==(const WatermarkParams&, const WatermarkParams&) = default;
};

// Secondary preset: wider context window with a stronger boost.
inline WatermarkParams wide_context_preset() { return WatermarkParams{0.5, 2.0, 2}; }

inline void validate_params_or_throw(const WatermarkParams& p) {
  if (!(p.gamma > 0.0 && p.gamma < 1.0))
    throw invalid_argument("params: gamma must lie in (0, 1)");
  if (!(p.delta >= 0.0) || !std::isfinite(p.delta))
    throw invalid_argument("params: delta must be finite and >= 0");
  if (p.context_width < 1) throw invalid_argument("params: context_width must be >= 1");
}

// Deterministic key generation: `count` pairwise-distinct 128-bit keys from a
// 64-bit seed. Ids are k0000, k0001, ... in generation order.
inline std::vector<WatermarkKey> keygen(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<WatermarkKey> keys;
  keys.reserve(count);
  std::set<Key128> seen;
  for (std::size_t i = 0; i < count; ++i) {
    Key128 k;
    do {
      k.lo = rng();
      k.hi = rng();
    } while (!seen.insert(k).second);
    char id[24];
    std::snprintf(id, sizeof id, "k%04zu", i);
    keys.push_back(WatermarkKey{id, k});
  }
  return keys;
}

// ---------------------------------------------------------------------------
// Documents and manifests
// ---------------------------------------------------------------------------

struct Document {
  std::string doc_id;
  std::string text;        // UTF-8; must not contain NUL (reserved separator)
  std::string key_id;      // label of the key this text was generated under ("" = none)
  friend bool operator==(const Document&, const Document&) = default;
};

// One source document rephrased m+1 times: a single public version plus m
// withheld private versions, each generated under its own key.
struct RephraseSet {
  std::string doc_id;
  Document public_version;
  std::vector<Document> private_versions;
  friend bool operator==(const RephraseSet&, const RephraseSet&) = default;
};

struct DatasetManifest {
  std::string name;
  WatermarkParams params;
  std::vector<RephraseSet> entries;
  std::vector<WatermarkKey> keys;  // key table; empty in a public release

  // Number of private versions per entry (0 for an empty manifest).
  std::size_t m_private() const {
    return entries.empty() ? 0 : entries.front().private_versions.size();
  }

  const WatermarkKey* find_key(std::string_view id) const {
    for (const auto& k : keys)
      if (k.id == id) return &k;
    return nullptr;
  }

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

inline constexpr int kManifestFormatVersion = 1;

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
  std::string code;    // stable machine-readable label, e.g. "doc.text_empty"
  std::string detail;  // human-readable context
};

// Structural integrity check. Returns all violations found (empty = valid)
// instead of throwing, so callers can report them in bulk.
inline std::vector<Violation> validate_manifest(const DatasetManifest& m) {
  std::vector<Violation> v;
  auto add = [&](std::string code, std::string detail) {
    v.push_back({std::move(code), std::move(detail)});
  };

  if (!(m.params.gamma > 0.0 && m.params.gamma < 1.0))
    add("params.gamma", "gamma must lie in (0, 1)");
  if (!(m.params.delta >= 0.0) || !std::isfinite(m.params.delta))
    add("params.delta", "delta must be finite and >= 0");
  if (m.params.context_width < 1)
    add("params.context_width", "context_width must be >= 1");

  // Key table: unique ids, pairwise-distinct secrets.
  std::set<std::string> key_ids;
  std::set<Key128> secrets;
  for (const auto& k : m.keys) {
    if (!key_ids.insert(k.id).second) add("key.duplicate_id", k.id);
    if (!secrets.insert(k.secret).second) add("key.duplicate_secret", k.id);
  }
  const bool have_keys = !m.keys.empty();

  std::set<std::string> entry_ids;
  std::set<std::string> version_ids;
  std::optional<std::size_t> m_count;
  for (const auto& e : m.entries) {
    if (!entry_ids.insert(e.doc_id).second) add("entry.duplicate_id", e.doc_id);
    if (m_count && *m_count != e.private_versions.size())
      add("entry.m_mismatch", e.doc_id);
    m_count = m_count ? m_count : std::optional(e.private_versions.size());
    if (e.private_versions.empty()) add("entry.no_private_versions", e.doc_id);

    std::set<std::string> entry_key_ids;
    auto check_doc = [&](const Document& d) {
      if (!version_ids.insert(d.doc_id).second) add("doc.duplicate_id", d.doc_id);
      if (d.text.empty()) add("doc.text_empty", d.doc_id);
      if (d.text.find('\0') != std::string::npos) add("doc.text_nul", d.doc_id);
      else if (!utf8_valid(d.text)) add("doc.text_not_utf8", d.doc_id);
      if (!d.key_id.empty()) {
        if (!entry_key_ids.insert(d.key_id).second)
          add("entry.key_reuse_within_entry", e.doc_id + "/" + d.key_id);
        if (have_keys && !key_ids.count(d.key_id)) add("doc.key_unresolved", d.doc_id);
      }
    };
    check_doc(e.public_version);
    for (const auto& p : e.private_versions) check_doc(p);
  }
  return v;
}

// ---------------------------------------------------------------------------
// JSON serialization
// ---------------------------------------------------------------------------

inline nlohmann::json document_to_json(const Document& d) {
  return nlohmann::json{{"doc_id", d.doc_id}, {"key_id", d.key_id}, {"text", d.text}};
}

inline Document document_from_json(const nlohmann::json& j) {
  Document d;
  try {
    d.doc_id = j.at("doc_id").get<std::string>();
    d.text = j.at("text").get<std::string>();
    d.key_id = j.value("key_id", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw manifest_error(std::string("bad document record: ") + e.what());
  }
  return d;
}

// include_secrets=false produces the public-release view (no key table, no
// private versions).
inline nlohmann::json manifest_to_json(const DatasetManifest& m, bool include_secrets = true) {
  nlohmann::json j;
  j["format_version"] = kManifestFormatVersion;
  j["name"] = m.name;
  j["params"] = {{"gamma", m.params.gamma},
                 {"delta", m.params.delta},
                 {"context_width", m.params.context_width}};
  j["entries"] = nlohmann::json::array();
  for (const auto& e : m.entries) {
    nlohmann::json je;
    je["doc_id"] = e.doc_id;
    je["public"] = document_to_json(e.public_version);
    if (include_secrets) {
      je["private"] = nlohmann::json::array();
      for (const auto& p : e.private_versions) je["private"].push_back(document_to_json(p));
    }
    j["entries"].push_back(std::move(je));
  }
  if (include_secrets) {
    j["keys"] = nlohmann::json::array();
    for (const auto& k : m.keys)
      j["keys"].push_back({{"id", k.id}, {"secret_hex", key128_to_hex(k.secret)}});
  }
  return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  try {
    if (j.at("format_version").get<int>() != kManifestFormatVersion)
      throw manifest_error("unsupported manifest format_version");
    m.name = j.value("name", std::string{});
    const auto& p = j.at("params");
    m.params.gamma = p.at("gamma").get<double>();
    m.params.delta = p.at("delta").get<double>();
    m.params.context_width = p.at("context_width").get<int>();
    for (const auto& je : j.at("entries")) {
      RephraseSet e;
      e.doc_id = je.at("doc_id").get<std::string>();
      e.public_version = document_from_json(je.at("public"));
      if (je.contains("private"))
        for (const auto& jp : je.at("private")) e.private_versions.push_back(document_from_json(jp));
      m.entries.push_back(std::move(e));
    }
    if (j.contains("keys"))
      for (const auto& jk : j.at("keys"))
        m.keys.push_back(WatermarkKey{jk.at("id").get<std::string>(),
                                      key128_from_hex(jk.at("secret_hex").get<std::string>())});
  } catch (const manifest_error&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw manifest_error(std::string("bad manifest: ") + e.what());
  } catch (const invalid_argument& e) {
    throw manifest_error(std::string("bad manifest: ") + e.what());
  }
  return m;
}

inline std::string manifest_to_string(const DatasetManifest& m, bool include_secrets = true) {
  return manifest_to_json(m, include_secrets).dump(2);
}

inline DatasetManifest manifest_from_string(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw manifest_error(std::string("manifest is not valid JSON: ") + e.what());
  }
  return manifest_from_json(j);
}

// ---------------------------------------------------------------------------
// Split / join
// ---------------------------------------------------------------------------

// The two file images produced from one manifest: what gets published, and
// what stays behind. Joining the vault back reproduces the manifest exactly.
struct ReleaseSplit {
  std::string public_release;  // no keys, no private versions
  std::string private_vault;   // the complete manifest
};

inline ReleaseSplit split_manifest(const DatasetManifest& m) {
  return ReleaseSplit{manifest_to_string(m, /*include_secrets=*/false),
                      manifest_to_string(m, /*include_secrets=*/true)};
}

inline DatasetManifest join_vault(std::string_view vault_text) {
  return manifest_from_string(vault_text);
}

// ---------------------------------------------------------------------------
// Content hashing
// ---------------------------------------------------------------------------

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int md_len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &md_len, EVP_sha256(), nullptr) != 1)
    throw error("sha256: digest failed");
  return hex_encode(std::span<const std::uint8_t>(md, md_len));
}

// Content identity of a manifest: SHA-256 over its canonical full JSON dump.
inline std::string manifest_content_hash(const DatasetManifest& m) {
  return sha256_hex(manifest_to_string(m, /*include_secrets=*/true));
}

}  // namespace dwmark
