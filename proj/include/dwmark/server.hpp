// Copyright (c) 2026 dwmark contributors
// SPDX-License-Identifier: Apache-2.0
//
// HTTP + JSON wire protocol for serving a ModelBackend:
//
//   GET  /v1/vocab            -> {"size": int, "full_logits": bool}
//   POST /v1/logits {context} -> {"logits": [float64 x size]}
//   POST /v1/score  {tokens}  -> {"logprobs": [null, float64 ...]}
//
// Numbers are IEEE-754 doubles as JSON numbers; the JSON writer emits
// shortest-round-trip decimals, so values survive the wire bit-exactly. The
// leading null in "logprobs" is the unconditioned first position. Non-finite
// values anywhere else are a protocol error: the server refuses to emit them.
//
// Status mapping: 400 invalid request, 501 capability not supported,
// 500 internal failure. Error bodies are {"error": message}.

#pragma once

#include <atomic>
#include <string>
#include <thread>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "dwmark/backend.hpp"
#include "dwmark/common.hpp"

namespace dwmark {

class BackendServer {
 public:
  explicit BackendServer(const ModelBackend& backend) : backend_(backend) { install_routes(); }

  BackendServer(const BackendServer&) = delete;
  BackendServer& operator=(const BackendServer&) = delete;

  ~BackendServer() { stop(); }

  // Binds to an OS-assigned port and serves from a background thread.
  // Returns the bound port once the server is accepting connections.
  int start_async(const std::string& host = "127.0.0.1") {
    const int port = server_.bind_to_any_port(host);
    if (port <= 0) throw error("server: could not bind to " + host);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port;
  }

  // Serves on a fixed port in the calling thread (used by the CLI). Returns
  // when stop() is called or the listener fails.
  bool serve_blocking(const std::string& host, int port) { return server_.listen(host, port); }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  using json = nlohmann::json;

  template <typename Fn>
  static void respond(httplib::Response& res, Fn&& fn) {
    try {
      res.set_content(fn().dump(), "application/json");
    } catch (const unsupported_backend& e) {
      fail(res, 501, e.what());
    } catch (const invalid_argument& e) {
      fail(res, 400, e.what());
    } catch (const json::exception& e) {
      fail(res, 400, std::string("malformed request: ") + e.what());
    } catch (const std::exception& e) {
      fail(res, 500, e.what());
    }
  }

  static void fail(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", message}}.dump(), "application/json");
  }

  static std::vector<token_id> parse_ids(const std::string& body, const char* field) {
    return json::parse(body).at(field).get<std::vector<token_id>>();
  }

  void install_routes() {
    server_.Get("/v1/vocab", [this](const httplib::Request&, httplib::Response& res) {
      respond(res, [&] {
        const auto v = backend_.vocab();
        return json{{"size", v.size}, {"full_logits", v.full_logits}};
      });
    });

    server_.Post("/v1/logits", [this](const httplib::Request& req, httplib::Response& res) {
      respond(res, [&] {
        if (!backend_.vocab().full_logits)
          throw unsupported_backend("backend does not expose full logits");
        const auto context = parse_ids(req.body, "context");
        const auto logits = backend_.next_token_logits(context);
        for (double l : logits)
          if (!std::isfinite(l)) throw error("backend produced a non-finite logit");
        return json{{"logits", logits}};
      });
    });

    server_.Post("/v1/score", [this](const httplib::Request& req, httplib::Response& res) {
      respond(res, [&] {
        const auto tokens = parse_ids(req.body, "tokens");
        const auto doc = backend_.score_sequence(tokens);
        for (std::size_t i = 1; i < doc.logprobs.size(); ++i)
          if (!std::isfinite(doc.logprobs[i]))
            throw error("backend produced a non-finite log-probability");
        // NaN serializes as null — exactly the unconditioned sentinel.
        return json{{"logprobs", doc.logprobs}};
      });
    });
  }

  const ModelBackend& backend_;
  httplib::Server server_;
  std::thread thread_;
};

}  // namespace dwmark
