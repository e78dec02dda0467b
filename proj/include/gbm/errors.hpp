#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gbm {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain (nonpositive state, sigma <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values produced during integration or training.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, long step = -1)
      : Error(what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

/// Shape or bookkeeping mismatch (dimensions, stale caches, header vs payload).
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary input; carries the byte offset where parsing stopped.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Checkpoint could not be loaded.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// Requested operation is not supported for the given input (e.g. dimension).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gbm
