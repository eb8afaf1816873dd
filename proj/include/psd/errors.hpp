#pragma once

#include <stdexcept>
#include <string>

namespace psd {

// Base for every error raised by the library. The CLI maps the concrete
// subclasses onto its exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument or evaluation outside a function's domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Non-conformable matrix or vector shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Overflow, failed factorization, or a degenerate linear system.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}

  [[nodiscard]] std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Configuration is well-formed but inconsistent or carries unknown keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Every optimizer restart failed.
class OptimizationError : public Error {
 public:
  using Error::Error;
};

}  // namespace psd
