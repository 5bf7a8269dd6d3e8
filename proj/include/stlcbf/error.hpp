#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stlcbf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed formula text. `offset` is the byte offset into the input.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A formula or parameter violates a precondition of a rewrite, synthesis or
/// controller operation.
class SpecError : public Error {
 public:
  using Error::Error;
};

/// Scenario or CSV input could not be loaded or validated.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite state or derivative encountered while integrating.
class IntegrationError : public Error {
 public:
  using Error::Error;
};

#define STLCBF_THROW_UNLESS(cond, ExType, msg) \
  do {                                         \
    if (!(cond)) throw ExType(msg);            \
  } while (false)

}  // namespace stlcbf
