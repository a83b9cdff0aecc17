#pragma once

#include <stdexcept>
#include <string>

namespace sc2t {

// Base class for all library errors. The CLI maps the subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument, precondition violation or shape mismatch.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed or missing input data (CSV, corpus, model file).
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values produced or consumed by numeric code.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace sc2t
