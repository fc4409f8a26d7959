#pragma once

#include <stdexcept>
#include <string>

namespace ciltlab {

// Error taxonomy. Validation failures exit the CLI with code 2,
// numerical-convergence failures with code 3.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : ValidationError {
  using ValidationError::ValidationError;
};
struct CompactificationError : ValidationError {
  using ValidationError::ValidationError;
};
struct UnsupportedSurface : ValidationError {
  using ValidationError::ValidationError;
};
struct GeometryError : ValidationError {
  using ValidationError::ValidationError;
};
struct SingularityError : ValidationError {
  using ValidationError::ValidationError;
};
struct NeutralityError : ValidationError {
  using ValidationError::ValidationError;
};
struct ResolutionError : ValidationError {
  using ValidationError::ValidationError;
};
struct PathError : ValidationError {
  using ValidationError::ValidationError;
};

struct QuadratureError : NumericalError {
  using NumericalError::NumericalError;
};
struct NonConvergence : NumericalError {
  using NumericalError::NumericalError;
};
struct FactorizationError : NumericalError {
  using NumericalError::NumericalError;
};
struct DivergenceError : NumericalError {
  using NumericalError::NumericalError;
};

}  // namespace ciltlab
