#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace unroll {

/// Root of every exception thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Input is valid but carries no information to work with (e.g. a zero matrix).
class DegenerateInputError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Non-finite values, failed factorizations, iteration budgets exhausted.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what, double residual = -1.0)
      : Error(what), residual_(residual) {}

  /// Final residual of the failed iteration, or a negative value when not applicable.
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Malformed or truncated URK1 container.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::size_t line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  /// 1-based line number, 0 when the error is not tied to a line.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Training diverged; carries the (1-based) epoch where the loss went non-finite.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::size_t epoch)
      : Error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace unroll
