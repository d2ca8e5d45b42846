// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#include "ckplug/server.hpp"

#include <httplib.h>

#include "ckplug/errors.hpp"

namespace ckplug {

namespace {

using nlohmann::json;

int status_for(const std::string& code) {
  if (code == "context_overflow") return 413;
  if (code == "bad_request") return 400;
  return 500;
}

void send_error(httplib::Response& res, const std::string& code, const std::string& message) {
  res.status = status_for(code);
  res.set_content(json{{"error", {{"code", code}, {"message", message}}}}.dump(), "application/json");
}

void send_json(httplib::Response& res, const json& body) {
  res.status = 200;
  res.set_content(body.dump(), "application/json");
}

// Parses the request body and runs `fn`; every failure becomes a protocol error.
template <typename Fn>
void handle(const httplib::Request& req, httplib::Response& res, Fn&& fn) {
  try {
    json body;
    if (req.method == "POST") {
      body = json::parse(req.body, nullptr, /*allow_exceptions=*/false);
      if (body.is_discarded() || !body.is_object()) {
        send_error(res, "bad_request", "request body must be a JSON object");
        return;
      }
    }
    send_json(res, fn(body));
  } catch (const BackendError& e) {
    send_error(res, e.code() == "unreachable" ? "internal" : e.code(), e.what());
  } catch (const json::exception& e) {
    send_error(res, "bad_request", e.what());
  } catch (const std::exception& e) {
    send_error(res, "internal", e.what());
  }
}

std::vector<TokenId> read_ids(const json& body, const ModelMeta& meta) {
  if (!body.contains("ids") || !body["ids"].is_array()) throw BackendError("bad_request", "missing \"ids\" array");
  std::vector<TokenId> ids;
  ids.reserve(body["ids"].size());
  for (const json& v : body["ids"]) {
    if (!v.is_number_integer() || v.get<long long>() < 0 ||
        static_cast<unsigned long long>(v.get<long long>()) >= meta.vocab_size) {
      throw BackendError("bad_request", "ids must be integers in [0, vocab_size)");
    }
    ids.push_back(v.get<TokenId>());
  }
  return ids;
}

}  // namespace

LogitsServer::LogitsServer(const Backend& backend)
    : backend_(backend), server_(std::make_unique<httplib::Server>()) {
  httplib::Server& srv = *server_;
  srv.Get("/v1/meta", [this](const httplib::Request& req, httplib::Response& res) {
    handle(req, res, [this](const json&) {
      const ModelMeta m = backend_.meta();
      return json{{"vocab_size", m.vocab_size},
                  {"eos_token_id", m.eos_token_id},
                  {"model_name", m.model_name},
                  {"max_context_tokens", m.max_context_tokens}};
    });
  });
  srv.Post("/v1/encode", [this](const httplib::Request& req, httplib::Response& res) {
    handle(req, res, [this](const json& body) {
      if (!body.contains("text") || !body["text"].is_string()) {
        throw BackendError("bad_request", "missing \"text\" string");
      }
      return json{{"ids", backend_.encode(body["text"].get<std::string>())}};
    });
  });
  srv.Post("/v1/decode", [this](const httplib::Request& req, httplib::Response& res) {
    handle(req, res, [this](const json& body) {
      return json{{"text", backend_.decode(read_ids(body, backend_.meta()))}};
    });
  });
  srv.Post("/v1/logits", [this](const httplib::Request& req, httplib::Response& res) {
    handle(req, res, [this](const json& body) {
      const ModelMeta meta = backend_.meta();
      const std::vector<TokenId> ids = read_ids(body, meta);
      if (ids.size() > meta.max_context_tokens) {
        throw BackendError("context_overflow", std::to_string(ids.size()) + " ids exceed max_context_tokens=" +
                                                   std::to_string(meta.max_context_tokens));
      }
      return json{{"logits", backend_.next_logits(ids).values}};
    });
  });
}

LogitsServer::~LogitsServer() { stop(); }

int LogitsServer::bind_any_port(const std::string& host) { return server_->bind_to_any_port(host); }

bool LogitsServer::bind(const std::string& host, int port) { return server_->bind_to_port(host, port); }

bool LogitsServer::run() { return server_->listen_after_bind(); }

void LogitsServer::wait_until_ready() const { server_->wait_until_ready(); }

void LogitsServer::stop() {
  if (server_) server_->stop();
}

}  // namespace ckplug
