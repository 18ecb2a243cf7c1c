#pragma once

#include <stdexcept>
#include <string>

namespace pdca {

/// Invalid problem data or an inconsistent constraint system.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed instance or solution text. The message carries line:column.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure inside a decomposition backend.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The iterate carries no usable leading eigenpair.
class ExtractionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Gap requested against a zero reference value.
class UndefinedGapError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace pdca
