#pragma once

#include <stdexcept>
#include <string>

namespace dgz {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dimension disagreement between operands.
struct ShapeError : Error {
  using Error::Error;
};

// A precondition of an operation was violated by the caller.
struct ContractError : Error {
  using Error::Error;
};

// Non-finite values, failed factorizations, poisoned gradients.
struct NumericError : Error {
  using Error::Error;
};

struct NotPsdError : NumericError {
  using NumericError::NumericError;
};

// Malformed files: bad magic, truncated payload, out-of-range indices.
struct FormatError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// Divergence during an optimization stage; message names the epoch.
struct TrainingError : Error {
  using Error::Error;
};

}  // namespace dgz
