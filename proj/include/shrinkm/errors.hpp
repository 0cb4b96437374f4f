#ifndef SHRINKM_ERRORS_HPP
#define SHRINKM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace shrinkm {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A matrix that must be positive definite failed to factorize.
class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (shape, n <= p, non-finite entries).
class DataError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace shrinkm

#endif  // SHRINKM_ERRORS_HPP
