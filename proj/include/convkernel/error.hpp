#pragma once

#include <stdexcept>
#include <string>

namespace convkernel {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied something outside an operation's domain (shape, range, file content).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A file could not be opened, read, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver failed (non-convergence, breakdown, NaN).
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Internal consistency check failed; indicates a bug rather than bad input.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace convkernel
