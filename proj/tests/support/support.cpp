// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <set>
#include <sstream>

#include "ckplug/errors.hpp"

namespace ckplug::testing {

namespace fs = std::filesystem;

fs::path data_path(const std::string& relative) { return fs::path(CKPLUG_DATA_DIR) / relative; }

fs::path scratch_dir(const std::string& name) {
  static std::atomic<int> counter{0};
  const fs::path dir = fs::temp_directory_path() /
                       ("ckplug-" + name + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

LogitVector random_logits(std::mt19937_64& rng, std::size_t n, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  LogitVector v;
  v.values.resize(n);
  for (double& x : v.values) x = normal(rng);
  return v;
}

namespace {

std::set<TokenId> top_k_with_ties(const std::vector<double>& v, std::size_t k) {
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double kth = sorted[std::min(k, sorted.size()) - 1];
  std::set<TokenId> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] >= kth) out.insert(static_cast<TokenId>(i));
  }
  return out;
}

bool contains(const std::string& hay, const std::string& needle) {
  if (needle.empty()) return false;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    bool eq = true;
    for (std::size_t j = 0; j < needle.size() && eq; ++j) eq = hay[i + j] == needle[j];
    if (eq) return true;
  }
  return false;
}

}  // namespace

std::vector<TokenId> brute_force_head(const std::vector<double>& a, const std::vector<double>& b, std::size_t k) {
  std::set<TokenId> u = top_k_with_ties(a, k);
  for (TokenId id : top_k_with_ties(b, k)) u.insert(id);
  return {u.begin(), u.end()};
}

OracleCapture brute_force_capture(const std::vector<std::vector<Candidate>>& steps, const std::string& s_cont,
                                  const std::string& s_para, const std::function<std::string(TokenId)>& decode) {
  // Every common substring of length >= 3, then keep the ones no longer common
  // substring contains.
  std::vector<std::string> common;
  for (std::size_t i = 0; i < s_cont.size(); ++i) {
    for (std::size_t len = 3; i + len <= s_cont.size(); ++len) {
      const std::string sub = s_cont.substr(i, len);
      if (contains(s_para, sub)) common.push_back(sub);
    }
  }
  std::vector<std::string> maximal;
  for (const std::string& c : common) {
    bool inside_longer = false;
    for (const std::string& d : common) {
      if (d.size() > c.size() && contains(d, c)) inside_longer = true;
    }
    if (!inside_longer) maximal.push_back(c);
  }

  OracleCapture out;
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const std::vector<Candidate>& step = steps[t];
    if (step.empty()) continue;
    std::size_t best = 0;
    for (std::size_t j = 1; j < step.size(); ++j) {
      if (step[j].prob > step[best].prob || (step[j].prob == step[best].prob && step[j].id < step[best].id)) best = j;
    }
    const std::string top = decode(step[best].id);
    if (!contains(s_cont, top) && !contains(s_para, top)) continue;

    std::vector<bool> used(step.size(), false);
    for (std::size_t r = 0; r < step.size(); ++r) {
      std::size_t k = step.size();
      for (std::size_t j = 0; j < step.size(); ++j) {
        if (used[j]) continue;
        if (k == step.size() || step[j].prob > step[k].prob || (step[j].prob == step[k].prob && step[j].id < step[k].id)) {
          k = j;
        }
      }
      used[k] = true;
      const std::string tok = decode(step[k].id);
      bool in_common = false;
      for (const std::string& c : maximal) {
        if (contains(c, tok)) in_common = true;
      }
      if (!out.p_cont && !out.p_para && in_common) break;
      if (!out.p_cont && contains(s_cont, tok)) {
        out.p_cont = step[k].prob;
        if (!out.position) out.position = t;
      }
      if (!out.p_para && contains(s_para, tok)) {
        out.p_para = step[k].prob;
        if (!out.position) out.position = t;
      }
    }
  }
  return out;
}

CaptureCase random_capture_case(std::mt19937_64& rng) {
  static const std::string kAlphabet = "abcd";
  auto uniform = [&rng](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  auto word = [&](std::size_t lo, std::size_t hi) {
    std::string s;
    for (std::size_t i = uniform(lo, hi); i > 0; --i) s.push_back(kAlphabet[uniform(0, kAlphabet.size() - 1)]);
    return s;
  };

  CaptureCase c;
  const std::size_t vocab = uniform(2, 64);
  for (std::size_t i = 0; i < vocab; ++i) c.vocab.push_back(i == 0 ? std::string() : word(1, 4));
  c.s_cont = word(3, 10);
  c.s_para = uniform(0, 2) == 0 ? c.s_cont.substr(0, uniform(0, c.s_cont.size())) + word(1, 6) : word(3, 10);
  if (uniform(0, 3) == 0) c.s_para += " " + word(1, 4);

  const std::size_t length = uniform(0, 12);
  for (std::size_t t = 0; t < length; ++t) {
    std::vector<Candidate> step;
    for (TokenId id = 0; id < vocab; ++id) {
      if (uniform(0, 3) == 0) continue;
      step.push_back({id, static_cast<double>(uniform(0, 8)) / 8.0});
    }
    std::shuffle(step.begin(), step.end(), rng);
    c.steps.push_back(std::move(step));
  }
  return c;
}

FunctionBackend::FunctionBackend(std::vector<std::string> vocabulary, TokenId eos, LogitsFn fn)
    : vocab_(std::move(vocabulary)), eos_(eos), fn_(std::move(fn)) {}

ModelMeta FunctionBackend::meta() const { return {vocab_.size(), eos_, "function", 1 << 20}; }

std::vector<TokenId> FunctionBackend::encode(std::string_view text) const {
  std::vector<TokenId> out;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) {
    auto it = std::find(vocab_.begin(), vocab_.end(), w);
    if (it == vocab_.end()) throw BackendError("bad_request", "unknown word " + w);
    out.push_back(static_cast<TokenId>(it - vocab_.begin()));
  }
  return out;
}

std::string FunctionBackend::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id >= vocab_.size()) throw BackendError("bad_request", "id out of range");
    if (!out.empty()) out.push_back(' ');
    out += vocab_[id];
  }
  return out;
}

LogitVector FunctionBackend::next_logits(std::span<const TokenId> prefix) const { return fn_(prefix); }

ServedBackend::ServedBackend(const Backend& backend) : server_(backend) {
  port_ = server_.bind_any_port("127.0.0.1");
  if (port_ < 0) throw Error("test server: cannot bind");
  thread_ = std::thread([this] { server_.run(); });
  server_.wait_until_ready();
}

ServedBackend::~ServedBackend() {
  server_.stop();
  thread_.join();
}

}  // namespace ckplug::testing
