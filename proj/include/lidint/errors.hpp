#pragma once

#include <stdexcept>
#include <string>

namespace lidint {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input failed a precondition (bad value, bad shape parameter, bad flag).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Two arrays that must share a shape do not.
class ShapeMismatchError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// An operation over masked pixels received a mask with no pixels set.
class EmptyMaskError : public Error {
 public:
  using Error::Error;
};

/// A metric over annotations received an empty (or zero-weight) set.
class EmptyAnnotationsError : public Error {
 public:
  using Error::Error;
};

/// An iterative solve hit its iteration cap far from the requested tolerance.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_ = 0.0;
};

/// Balanced resampling requires every judgement class to be present.
class MissingClassError : public Error {
 public:
  using Error::Error;
};

/// Triangulation needs at least two points.
class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

/// A correlation over a constant marginal is undefined.
class DegenerateVarianceError : public Error {
 public:
  using Error::Error;
};

/// An objective evaluated to NaN/Inf; indicates a bug, not a recoverable state.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A text artifact (CSV row, JSON line, manifest entry) failed to parse.
/// Carries the 1-based line or row number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line = -1) : Error(what), line_(line) {}
  long line() const { return line_; }

 private:
  long line_ = -1;
};

}  // namespace lidint
