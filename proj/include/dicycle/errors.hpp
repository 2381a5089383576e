#pragma once

#include <stdexcept>
#include <string>

namespace dicycle {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Incompatible tensor shapes.
struct DimensionError : Error {
  using Error::Error;
};

// Bad hyperparameter or malformed configuration.
struct ConfigError : Error {
  using Error::Error;
};

// API misuse (non-scalar loss, repeated backward, optimizer state mismatch).
struct ContractError : Error {
  using Error::Error;
};

// Bad input data (out-of-range ids, invalid labels).
struct DataError : Error {
  using Error::Error;
};

// Structurally valid input on which the operation is undefined
// (e.g. fully masked attention).
struct DegenerateInputError : Error {
  using Error::Error;
};

// Input file does not match the expected schema.
struct SchemaError : Error {
  using Error::Error;
};

// Metric undefined on the given examples (single class, no eligible user).
struct UndefinedMetricError : Error {
  using Error::Error;
};

}  // namespace dicycle
