#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace heatcast {

// Root of every error thrown by the library. The CLI maps subclasses to exit
// codes, so new failure kinds should derive from the closest existing class.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numeric precondition violated (empty input, probability out of range, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  // 1-based line number in the source file.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

class DesignError : public Error {
 public:
  using Error::Error;
};

class WeightingError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace heatcast
