#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace ebhb {

// Base for every error the library raises. The CLI maps DomainError to exit
// code 2 and NumericError (and FitError) to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violated: bad parameter, invalid input data.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A numerical procedure failed to deliver a result of the required accuracy.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Model fit failed (singular design, degenerate data).
class FitError : public NumericError {
 public:
  using NumericError::NumericError;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw DomainError(what);
}

inline void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) throw DomainError(std::string(name) + " must be finite");
}

inline void require_positive(double v, const char* name) {
  if (!std::isfinite(v) || !(v > 0.0))
    throw DomainError(std::string(name) + " must be a positive finite number");
}

}  // namespace detail
}  // namespace ebhb
