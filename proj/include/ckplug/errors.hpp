// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace ckplug {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed numeric or textual input (NaN logits, invalid distributions, bad records).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A parameter outside its documented domain (alpha, k, grid values).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Vectors that must share a vocabulary size do not.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Misuse of a stateful object, e.g. stepping a finished session.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Failure reported by (or while reaching) a logits backend. `code()` is one of
/// the wire protocol codes: context_overflow, bad_request, internal, unreachable.
class BackendError : public Error {
 public:
  BackendError(std::string code, const std::string& message)
      : Error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace ckplug
