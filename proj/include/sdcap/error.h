#pragma once

#include <stdexcept>
#include <string>

namespace sdcap {

// Base for every error the library raises. The CLI maps NumericError to exit
// code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration: duplicate parameter names, bad budgets, bad flags.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Shape or index mismatch.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or value.
class NumericError : public Error {
 public:
  using Error::Error;
};

// API misuse, e.g. a backward pass without a recorded forward pass.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input files.
class LoadError : public Error {
 public:
  using Error::Error;
};

// A callback broke its contract (e.g. a step function returned a vector that
// is not a probability distribution).
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace sdcap
