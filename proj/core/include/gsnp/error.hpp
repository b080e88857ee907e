// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gsnp {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user-provided configuration or command-line input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Missing, malformed or inconsistent data (graphs, task files, checkpoints).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A record in a text file could not be parsed.
class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Operand shapes do not agree; always a programming error.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or an invalid numeric domain.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace gsnp
