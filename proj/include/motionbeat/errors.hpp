#pragma once

#include <stdexcept>
#include <string>

namespace motionbeat {

// Raised when an argument violates an operation's precondition.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A beat interval received no frames during pooling.
class EmptyBeatError : public DomainError {
 public:
  explicit EmptyBeatError(int beat)
      : DomainError("beat " + std::to_string(beat) + " contains no frames"), beat_(beat) {}
  int beat() const noexcept { return beat_; }

 private:
  int beat_;
};

class ShapeError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Invalid run configuration or CLI input (maps to exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values encountered during optimization.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace motionbeat
