// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "ckplug/errors.hpp"
#include "ckplug/server.hpp"

namespace ckplug {

namespace {

using nlohmann::json;

std::string canonical_ws(const std::string& s) {
  std::istringstream in(s);
  std::string word, out;
  while (in >> word) {
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

// Expects an error response with the given status and protocol code.
std::string expect_error(const httplib::Result& res, int status, const std::string& code) {
  if (!res) return "no response: " + httplib::to_string(res.error());
  if (res->status != status) return "expected HTTP " + std::to_string(status) + ", got " + std::to_string(res->status);
  const json body = json::parse(res->body, nullptr, false);
  if (!body.is_object() || !body.contains("error") || !body["error"].is_object() ||
      !body["error"].contains("code") || !body["error"]["code"].is_string() ||
      !body["error"].contains("message") || !body["error"]["message"].is_string()) {
    return "error body does not match {\"error\": {\"code\", \"message\"}}";
  }
  if (body["error"]["code"] != code) return "expected code " + code + ", got " + body["error"]["code"].get<std::string>();
  return {};
}

}  // namespace

std::vector<ConformanceCheck> run_conformance(const std::string& base_url, const std::string& sample_text) {
  std::vector<ConformanceCheck> checks;
  auto check = [&checks](const std::string& name, const std::function<std::string()>& body) {
    ConformanceCheck c{name, false, {}};
    try {
      c.detail = body();
      c.passed = c.detail.empty();
      if (c.passed) c.detail = "ok";
    } catch (const std::exception& e) {
      c.detail = e.what();
    }
    checks.push_back(std::move(c));
  };

  RemoteBackend remote(base_url, RetryPolicy{1, std::chrono::milliseconds(0)});
  httplib::Client raw(base_url);
  raw.set_connection_timeout(std::chrono::seconds(5));

  ModelMeta meta;
  check("meta: schema and consistency", [&]() -> std::string {
    auto res = raw.Get("/v1/meta");
    if (!res) return "no response: " + httplib::to_string(res.error());
    if (res->status != 200) return "HTTP " + std::to_string(res->status);
    const json j = json::parse(res->body, nullptr, false);
    if (!j.is_object()) return "body is not a JSON object";
    if (!j.contains("vocab_size") || !j["vocab_size"].is_number_integer()) return "vocab_size missing or not an integer";
    if (!j.contains("eos_token_id") || !j["eos_token_id"].is_number_integer()) return "eos_token_id missing or not an integer";
    if (!j.contains("model_name") || !j["model_name"].is_string()) return "model_name missing or not a string";
    if (!j.contains("max_context_tokens") || !j["max_context_tokens"].is_number_integer()) {
      return "max_context_tokens missing or not an integer";
    }
    meta = remote.meta();
    if (meta.vocab_size == 0) return "vocab_size must be positive";
    if (meta.eos_token_id >= meta.vocab_size) return "eos_token_id must be below vocab_size";
    if (meta.max_context_tokens == 0) return "max_context_tokens must be positive";
    return {};
  });
  check("meta: constant across calls", [&]() -> std::string {
    auto a = raw.Get("/v1/meta");
    auto b = raw.Get("/v1/meta");
    if (!a || !b) return "no response";
    return json::parse(a->body) == json::parse(b->body) ? "" : "meta changed between calls";
  });
  check("encode: empty text", [&]() -> std::string {
    return remote.encode("").empty() ? "" : "encode(\"\") must be []";
  });
  std::vector<TokenId> sample_ids;
  check("encode/decode: round trip", [&]() -> std::string {
    sample_ids = remote.encode(sample_text);
    if (sample_ids.empty()) return "sample text encoded to no ids";
    for (TokenId id : sample_ids) {
      if (id >= meta.vocab_size) return "encode returned id " + std::to_string(id) + " >= vocab_size";
    }
    const std::string back = remote.decode(sample_ids);
    if (canonical_ws(back) != canonical_ws(sample_text)) return "decode(encode(s)) = '" + back + "'";
    return remote.decode(std::vector<TokenId>{}).empty() ? "" : "decode([]) must be \"\"";
  });
  check("logits: full finite vector", [&]() -> std::string {
    const LogitVector v = remote.next_logits(sample_ids);
    if (v.size() != meta.vocab_size) return "expected vocab_size logits";
    return {};
  });
  check("logits: repeat-call determinism (1e-5)", [&]() -> std::string {
    const LogitVector a = remote.next_logits(sample_ids);
    const LogitVector b = remote.next_logits(sample_ids);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.values[i] - b.values[i]));
    return worst <= 1e-5 ? "" : "max abs difference " + std::to_string(worst);
  });
  check("error: malformed body -> bad_request", [&]() -> std::string {
    return expect_error(raw.Post("/v1/logits", "{not json", "application/json"), 400, "bad_request");
  });
  check("error: missing field -> bad_request", [&]() -> std::string {
    return expect_error(raw.Post("/v1/encode", "{}", "application/json"), 400, "bad_request");
  });
  check("error: out-of-range id -> bad_request", [&]() -> std::string {
    const json body{{"ids", {meta.vocab_size}}};
    return expect_error(raw.Post("/v1/decode", body.dump(), "application/json"), 400, "bad_request");
  });
  check("error: oversized prefix -> context_overflow", [&]() -> std::string {
    const json body{{"ids", std::vector<TokenId>(meta.max_context_tokens + 1, meta.eos_token_id)}};
    return expect_error(raw.Post("/v1/logits", body.dump(), "application/json"), 413, "context_overflow");
  });
  check("client: context_overflow surfaces as BackendError", [&]() -> std::string {
    try {
      remote.next_logits(std::vector<TokenId>(meta.max_context_tokens + 1, meta.eos_token_id));
    } catch (const BackendError& e) {
      return e.code() == "context_overflow" ? "" : "got code " + e.code();
    }
    return "no error raised";
  });
  return checks;
}

}  // namespace ckplug
