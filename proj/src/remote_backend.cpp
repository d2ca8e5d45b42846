// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>

#include <cmath>
#include <thread>

#include "ckplug/backend.hpp"
#include "ckplug/errors.hpp"

namespace ckplug {

namespace {

using nlohmann::json;

struct SplitUrl {
  std::string origin;  // scheme://host:port
  std::string path_prefix;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw InvalidArgument("remote backend: URL needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, ""};
  std::string prefix = url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, slash), prefix};
}

BackendError error_from_response(const httplib::Result& res) {
  std::string code = res->status >= 500 ? "internal" : "bad_request";
  std::string message = "HTTP " + std::to_string(res->status);
  const json body = json::parse(res->body, nullptr, /*allow_exceptions=*/false);
  if (body.is_object() && body.contains("error") && body["error"].is_object()) {
    code = body["error"].value("code", code);
    message = body["error"].value("message", message);
  }
  return BackendError(code, message);
}

}  // namespace

RemoteBackend::RemoteBackend(std::string base_url, RetryPolicy retry)
    : base_url_(std::move(base_url)), retry_(retry) {
  if (retry_.attempts < 1) throw InvalidArgument("remote backend: retry attempts must be >= 1");
  const SplitUrl parts = split_url(base_url_);
  client_ = std::make_unique<httplib::Client>(parts.origin);
  client_->set_connection_timeout(std::chrono::seconds(5));
  client_->set_read_timeout(std::chrono::seconds(120));
  client_->set_keep_alive(true);
}

RemoteBackend::~RemoteBackend() = default;

json RemoteBackend::get(const std::string& path) const { return post(path, json()); }

// A null body means GET.
json RemoteBackend::post(const std::string& path, const json& body) const {
  const std::string full = split_url(base_url_).path_prefix + path;
  std::string last_code = "unreachable";
  std::string last_message;
  auto backoff = retry_.initial_backoff;
  for (int attempt = 0; attempt < retry_.attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Result res = [&] {
      std::lock_guard<std::mutex> lock(mu_);
      if (body.is_null()) return client_->Get(full);
      return client_->Post(full, body.dump(), "application/json");
    }();
    if (!res) {
      last_code = "unreachable";
      last_message = base_url_ + full + ": " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      const BackendError err = error_from_response(res);
      last_code = err.code();
      last_message = err.what();
      continue;
    }
    if (res->status >= 400) throw error_from_response(res);
    json parsed = json::parse(res->body, nullptr, /*allow_exceptions=*/false);
    if (parsed.is_discarded()) throw BackendError("internal", full + ": response is not JSON");
    return parsed;
  }
  throw BackendError(last_code, last_message + " (after " + std::to_string(retry_.attempts) + " attempts)");
}

ModelMeta RemoteBackend::meta() const {
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (meta_) return *meta_;
  }
  const json j = get("/v1/meta");
  ModelMeta m;
  try {
    m.vocab_size = j.at("vocab_size").get<std::size_t>();
    m.eos_token_id = j.at("eos_token_id").get<TokenId>();
    m.model_name = j.at("model_name").get<std::string>();
    m.max_context_tokens = j.at("max_context_tokens").get<std::size_t>();
  } catch (const json::exception& e) {
    throw BackendError("internal", std::string("/v1/meta: ") + e.what());
  }
  if (m.vocab_size == 0 || m.eos_token_id >= m.vocab_size) {
    throw BackendError("internal", "/v1/meta: inconsistent vocab_size/eos_token_id");
  }
  std::lock_guard<std::mutex> lock(mu_);
  if (!meta_) meta_ = m;
  return *meta_;
}

std::vector<TokenId> RemoteBackend::encode(std::string_view text) const {
  const json j = post("/v1/encode", json{{"text", std::string(text)}});
  try {
    return j.at("ids").get<std::vector<TokenId>>();
  } catch (const json::exception& e) {
    throw BackendError("internal", std::string("/v1/encode: ") + e.what());
  }
}

std::string RemoteBackend::decode(std::span<const TokenId> ids) const {
  const json j = post("/v1/decode", json{{"ids", std::vector<TokenId>(ids.begin(), ids.end())}});
  try {
    return j.at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError("internal", std::string("/v1/decode: ") + e.what());
  }
}

LogitVector RemoteBackend::next_logits(std::span<const TokenId> prefix) const {
  const std::size_t vocab = meta().vocab_size;
  const json j = post("/v1/logits", json{{"ids", std::vector<TokenId>(prefix.begin(), prefix.end())}});
  LogitVector out;
  try {
    out.values = j.at("logits").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw BackendError("internal", std::string("/v1/logits: ") + e.what());
  }
  if (out.size() != vocab) {
    throw BackendError("internal", "/v1/logits: expected " + std::to_string(vocab) + " logits, got " +
                                       std::to_string(out.size()));
  }
  for (double v : out.values) {
    if (!std::isfinite(v)) throw BackendError("internal", "/v1/logits: non-finite logit");
  }
  return out;
}

std::unique_ptr<Backend> make_backend(std::string_view selector) {
  if (selector.starts_with("toy:")) {
    return std::make_unique<ToyBackend>(load_toy_spec(std::string(selector.substr(4))));
  }
  if (selector.starts_with("remote:")) {
    return std::make_unique<RemoteBackend>(std::string(selector.substr(7)));
  }
  throw InvalidArgument("backend selector must be toy:<spec-path> or remote:<base-url>, got '" +
                        std::string(selector) + "'");
}

}  // namespace ckplug
