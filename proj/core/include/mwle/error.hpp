#pragma once

#include <stdexcept>
#include <string>

namespace mwle {

// Parameter or argument outside its admissible region.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A numerical routine missed its accuracy target or produced a non-finite value.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A mixture component lost (numerically) all of its weight during fitting.
class ComponentCollapseError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// A matrix needed for covariance estimation is singular or badly conditioned.
class SingularMatrixError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace mwle
