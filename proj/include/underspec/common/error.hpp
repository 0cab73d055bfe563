#pragma once

#include <stdexcept>
#include <string>

namespace underspec {

// Bad arguments or violated preconditions. Maps to CLI exit code 1.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Integration blow-up, solver non-convergence, near-pole evaluation and the
// like. Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs that are well-formed but carry no usable information (all-zero
// observations, constant rank vectors, zero direction vectors).
class DegenerateInputError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace underspec
