#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace talent {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data violates a documented invariant (ranges, uniqueness, shapes).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Binary container is corrupt or truncated.
class FormatError : public ValidationError {
 public:
  FormatError(std::size_t offset, const std::string& what)
      : ValidationError(what + " (byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Raised by clients/providers for a single failed call.
class TransportError : public Error {
 public:
  using Error::Error;
};

// A retried operation exhausted its attempts.
class RetryableError : public Error {
 public:
  RetryableError(int attempts, const std::string& what)
      : Error(what + " (after " + std::to_string(attempts) + " attempts)"), attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

// API misuse, e.g. backward() without a recorded forward().
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(int epoch, const std::string& what)
      : Error("non-finite loss at epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace talent
