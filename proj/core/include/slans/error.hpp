#pragma once

#include <stdexcept>
#include <string>

namespace slans {

/// Base class for every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI's JSON error output.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class InvalidParameter : public Error {
 public:
  explicit InvalidParameter(const std::string& message) : Error("invalid-parameter", message) {}
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& message) : Error("dimension-mismatch", message) {}
};

class SingularMatrix : public Error {
 public:
  SingularMatrix(const std::string& message, long pivot)
      : Error("singular-matrix", message), pivot_(pivot) {}

  /// Column of the first zero pivot, or -1 when the factorization could not
  /// locate it.
  long pivot() const noexcept { return pivot_; }

 private:
  long pivot_;
};

class SpaceMismatch : public Error {
 public:
  explicit SpaceMismatch(const std::string& message) : Error("space-mismatch", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config-error", message) {}
};

class RegimeViolation : public Error {
 public:
  explicit RegimeViolation(const std::string& message) : Error("regime-violation", message) {}
};

class StepFailure : public Error {
 public:
  StepFailure(const std::string& message, int step) : Error("step-failure", message), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io-error", message) {}
};

}  // namespace slans
