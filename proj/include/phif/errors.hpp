#pragma once

#include <stdexcept>
#include <string>

namespace phif {

/// Raised when a block that must be SPD produces a non-positive pivot.
class SpdError : public std::runtime_error {
public:
  SpdError(const std::string& what, long pivot, int level = -1, long group = -1)
      : std::runtime_error(what), pivot_(pivot), level_(level), group_(group) {}

  long pivot() const noexcept { return pivot_; }
  int level() const noexcept { return level_; }
  long group() const noexcept { return group_; }

private:
  long pivot_;
  int level_;
  long group_;
};

/// Bad input to a numerical routine (dimension mismatch, index out of range, ...).
class InvalidArgument : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Iterative method failed: no convergence, NaN/Inf, indefinite preconditioner.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent run configuration.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace phif
