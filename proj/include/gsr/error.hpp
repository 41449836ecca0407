#pragma once

#include <stdexcept>
#include <string>

namespace gsr {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Input text does not follow the expected format.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Input is well-formed but violates an invariant (bad geometry, dimension
/// mismatch, out-of-range parameter).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A point could not be located inside the mesh.
class LocationError : public Error {
 public:
  using Error::Error;
};

/// The flux map has no usable plasma (no interior maximum, empty plasma
/// region, or boundary flux above the axis flux).
class DegeneratePlasmaError : public Error {
 public:
  using Error::Error;
};

/// An iteration did not reach its tolerance within the allowed count.
class NonConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A linear system that must be nonsingular is not.
class SingularSystemError : public Error {
 public:
  SingularSystemError(const std::string& what, int rank)
      : Error(what), rank_(rank) {}
  int rank() const { return rank_; }

 private:
  int rank_;
};

}  // namespace gsr
