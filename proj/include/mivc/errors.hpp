// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace mivc {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Array dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Caller violated an operation's contract (wrong kind, empty bag, bad flag).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Input data is missing, malformed, or inconsistent.
class DataError : public Error {
 public:
  using Error::Error;
};

enum class LoadErrorKind {
  kMissingFile,
  kBadMagic,
  kBadVersion,
  kTruncated,
  kCountMismatch,
  kShapeMismatch,
  kNonFinite,
  kParse,
  kValidation,
};

const char* to_string(LoadErrorKind kind);

/// A file failed to load; `kind()` tells which check rejected it.
class LoadError : public DataError {
 public:
  LoadError(LoadErrorKind kind, const std::string& what)
      : DataError(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  LoadErrorKind kind() const noexcept { return kind_; }

 private:
  LoadErrorKind kind_;
};

}  // namespace mivc
