#pragma once

#include <stdexcept>
#include <string>

namespace egreg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A tuning parameter or size exceeds what the data supports (d > r, u > d, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A scalar parameter is outside its admissible range (lambda <= 0, rho >= 1, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// An input violates a documented precondition (uncentered data, non-orthonormal basis).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Matrix shapes do not conform.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Standardization requested on a column with zero variance.
class DegenerateColumnError : public Error {
 public:
  DegenerateColumnError(const std::string& what, long column)
      : Error(what), column_(column) {}
  long column() const noexcept { return column_; }

 private:
  long column_;
};

/// The matrix has no singular value above the rank tolerance.
class RankError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of a closed-form function (z >= 0 for m(z)).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Limiting NIECE risk evaluated inside the divergence band around gamma = 1.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file; the message carries the source and line number.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Bad command-line usage or a configuration that fails its schema.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace egreg
