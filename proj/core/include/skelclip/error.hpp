#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace skelclip {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed text input. `line()` is 1-based, or 0 when no line applies.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Malformed binary tensor or checkpoint data.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Shapes or dimensions that do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values (layouts, options, hyperparameters).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace skelclip
