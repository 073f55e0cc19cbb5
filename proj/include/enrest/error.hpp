#pragma once

#include <stdexcept>

namespace enrest {

// Bad user input: malformed config files, unknown keys, invalid CLI usage.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File and serialization failures.
struct IOError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required (loss, gradients).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape, dtype or argument violations in tensor operations.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Misuse of the autodiff tape (backing up twice, reading grads too early).
struct TapeError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace enrest
