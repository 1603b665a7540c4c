#pragma once

#include <stdexcept>
#include <string>

namespace reprocs {

// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input file (sequence, checkpoint, config, PGM).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Least squares restricted to a support whose columns are numerically dependent.
class IllConditionedSupport : public Error {
 public:
  IllConditionedSupport() : Error("ill-conditioned support") {}
};

}  // namespace reprocs
