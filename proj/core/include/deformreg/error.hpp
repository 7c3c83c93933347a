#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace deformreg {

// Base of every exception thrown by the library. The CLI maps subclasses
// onto exit codes, so keep the hierarchy shallow.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor/image/field dimensions that do not fit an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated file contents. offset() is the byte (or line, for
// text formats) position at which parsing gave up.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// Invalid configuration documents or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Divergence, non-finite losses and similar failures of an optimization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace deformreg
