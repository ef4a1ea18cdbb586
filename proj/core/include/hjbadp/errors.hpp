#pragma once

#include <stdexcept>
#include <string>

namespace hjbadp {

// Invalid configuration or model parameters supplied by the caller.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Vehicle parameters that make the dynamics undefined (vx == 0 and friends).
struct SingularModelError : ConfigError {
  using ConfigError::ConfigError;
};

// Vector or matrix size does not match the operation's contract.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// API misuse: stale cache, non-scalar output where a scalar is required,
// empty trace, mismatched gradient shapes.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Base for runtime numerical failures.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite loss or gradient during optimization.
struct DivergenceError : NumericError {
  using NumericError::NumericError;
};

// Non-finite state produced by integration.
struct BlowupError : NumericError {
  using NumericError::NumericError;
};

// Factorization or solve failed on an ill-conditioned system.
struct ConditioningError : NumericError {
  using NumericError::NumericError;
};

// Degenerate normalization (zero spread in a reference signal).
struct DegenerateNormalizationError : NumericError {
  using NumericError::NumericError;
};

}  // namespace hjbadp
