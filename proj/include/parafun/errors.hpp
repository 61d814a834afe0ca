#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace parafun {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A caller-supplied argument is outside the operation's domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The requested time scheme cannot integrate the given flow.
class UnsupportedScheme : public Error {
 public:
  using Error::Error;
};

/// Floating point failure: singular system, NaN/Inf, overflow.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Numeric failure localized to one coarse interval of a time grid.
class IntervalError : public NumericError {
 public:
  IntervalError(std::size_t interval, const std::string& what)
      : NumericError("interval " + std::to_string(interval) + ": " + what),
        interval_(interval) {}

  std::size_t interval() const noexcept { return interval_; }

 private:
  std::size_t interval_;
};

/// An iteration left its stability region.
class DivergenceError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// The operator is not symmetric positive definite along the iteration.
class NotSpdError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Descent stopped making progress.
class StallError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Malformed input file.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace parafun
