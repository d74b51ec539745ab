// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bpcgen {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller passed data that violates an operation's precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Inconsistent shapes or hyperparameters in a model or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure (open, write, missing file).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line), detail_(what) {}

  std::size_t line() const noexcept { return line_; }
  /// The message without the line prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

/// A NaN or infinity appeared in a forward pass or a loss.
class NumericFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace bpcgen
