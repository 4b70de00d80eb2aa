#pragma once

#include <stdexcept>
#include <string>

namespace tvae {

/// Argument outside the mathematical domain of a primitive (log of a
/// non-positive number, lgamma at zero, ...). The message names the primitive.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Caller broke a precondition: shape mismatch, non-scalar loss, missing labels.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced a non-finite value where a finite one is required.
class NumericFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file or configuration.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tvae
