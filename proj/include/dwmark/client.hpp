// Copyright (c) 2026 dwmark contributors
// SPDX-License-Identifier: Apache-2.0
//
// Remote ModelBackend speaking the wire protocol in server.hpp. Every request
// uses a fresh connection, so concurrent calls are isolated from each other.
// Server-side validation errors surface as the same exception types a local
// backend would throw: 400 -> invalid_argument, 501 -> unsupported_backend,
// transport problems and everything else -> backend_error.

#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "dwmark/backend.hpp"
#include "dwmark/common.hpp"

namespace dwmark {

class RemoteBackend final : public ModelBackend {
 public:
  // base_url like "http://127.0.0.1:8043". Fetches vocabulary info eagerly so
  // an unreachable server fails fast.
  explicit RemoteBackend(std::string base_url) : base_url_(std::move(base_url)) {
    const auto v = get("/v1/vocab");
    info_.size = v.at("size").get<std::size_t>();
    info_.full_logits = v.value("full_logits", false);
    if (info_.size < 2) throw backend_error("protocol error: vocab size < 2");
  }

  VocabInfo vocab() const override { return info_; }

  std::vector<double> next_token_logits(std::span<const token_id> context) const override {
    if (!info_.full_logits)
      throw unsupported_backend("remote backend does not expose full logits");
    const auto r = post("/v1/logits",
                        {{"context", std::vector<token_id>(context.begin(), context.end())}});
    const auto& arr = r.at("logits");
    if (!arr.is_array() || arr.size() != info_.size)
      throw backend_error("protocol error: logits size mismatch");
    std::vector<double> logits;
    logits.reserve(arr.size());
    for (const auto& e : arr) {
      if (!e.is_number()) throw backend_error("protocol error: non-numeric logit");
      logits.push_back(e.get<double>());
    }
    return logits;
  }

  ScoredDocument score_sequence(std::span<const token_id> tokens) const override {
    std::vector<token_id> toks(tokens.begin(), tokens.end());
    const auto r = post("/v1/score", {{"tokens", toks}});
    const auto& arr = r.at("logprobs");
    if (!arr.is_array() || arr.size() != toks.size())
      throw backend_error("protocol error: logprobs size mismatch");
    std::vector<double> lps;
    lps.reserve(arr.size());
    for (const auto& e : arr) {
      if (e.is_null())
        lps.push_back(std::numeric_limits<double>::quiet_NaN());
      else if (e.is_number())
        lps.push_back(e.get<double>());
      else
        throw backend_error("protocol error: non-numeric log-probability");
    }
    for (std::size_t i = 1; i < lps.size(); ++i)
      if (std::isnan(lps[i])) throw backend_error("protocol error: null conditioned log-probability");
    // Shared assembly: identical logprobs give bit-identical nll/ppl to a
    // local backend's.
    return make_scored_document(std::move(toks), std::move(lps));
  }

 private:
  using json = nlohmann::json;

  json get(const std::string& path) const {
    httplib::Client cli(base_url_);
    configure(cli);
    return unwrap(cli.Get(path));
  }

  json post(const std::string& path, const json& body) const {
    httplib::Client cli(base_url_);
    configure(cli);
    return unwrap(cli.Post(path, body.dump(), "application/json"));
  }

  static void configure(httplib::Client& cli) {
    cli.set_connection_timeout(5, 0);
    cli.set_read_timeout(120, 0);
  }

  static json unwrap(httplib::Result result) {
    if (!result)
      throw backend_error("backend-unavailable: " + httplib::to_string(result.error()));
    std::string message;
    json parsed;
    try {
      parsed = json::parse(result->body);
      if (parsed.contains("error")) message = parsed.at("error").get<std::string>();
    } catch (const json::exception&) {
      if (result->status == 200) throw backend_error("protocol error: response is not JSON");
    }
    if (result->status == 200) return parsed;
    if (message.empty()) message = "http status " + std::to_string(result->status);
    if (result->status == 400) throw invalid_argument(message);
    if (result->status == 501) throw unsupported_backend(message);
    throw backend_error(message);
  }

  std::string base_url_;
  VocabInfo info_;
};

}  // namespace dwmark
