#pragma once

#include <stdexcept>
#include <string>

namespace potts {

// Input outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// A root equation has no solution for the requested parameters.
struct NoSolutionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The requested object does not exist in this temperature regime.
struct RegimeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SizeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Grid too coarse to resolve a feature that is known to exist.
struct ResolutionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Singular or otherwise ill-posed linear system.
struct StructuralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A property that theory guarantees was violated numerically.
struct InvariantError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace potts
