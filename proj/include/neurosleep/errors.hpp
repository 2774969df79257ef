#pragma once

#include <stdexcept>
#include <string>

namespace neurosleep {

// Malformed file, stream or tensor contents.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller supplied an argument outside the documented domain.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A metric is mathematically undefined for the given input (zero energy, constant series, ...).
class MetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Non-finite value produced during optimisation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Broken internal invariant (shape mismatch between components, etc.).
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace neurosleep
