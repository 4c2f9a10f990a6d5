#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ftbert {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes do not agree for the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN or infinity where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Carries the 1-based line number of the offending row.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace ftbert
