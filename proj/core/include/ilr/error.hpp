#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ilr {

// Every error raised by the library derives from Error. The CLI maps the
// families below onto exit codes: ArgumentError -> 1, DataError -> 2,
// NumericalError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller passed something outside an operation's preconditions.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Input data problems: unreadable files, malformed CSV, bad model payloads.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Model file errors. The three kinds are distinct so callers can tell a
// stale file from a corrupt one.
class FormatVersionError : public DataError {
 public:
  using DataError::DataError;
};

class MalformedPayloadError : public DataError {
 public:
  using DataError::DataError;
};

class InvariantViolationError : public DataError {
 public:
  using DataError::DataError;
};

// Numerical failures: domain errors, failed factorizations, broken
// invariants inside the inference loop.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DomainError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DecompositionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InternalInvariantError : public NumericalError {
 public:
  InternalInvariantError(const std::string& what, std::ptrdiff_t component = -1)
      : NumericalError(what), component_(component) {}
  // Index of the offending component, or -1 when not component specific.
  std::ptrdiff_t component() const noexcept { return component_; }

 private:
  std::ptrdiff_t component_;
};

}  // namespace ilr
