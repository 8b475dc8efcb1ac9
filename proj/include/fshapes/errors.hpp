#pragma once

#include <stdexcept>
#include <string>

namespace fshapes {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Input violates a structural invariant (index range, lengths, NaN, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: divergence, singular mass, non-finite objective.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, int step) : NumericalError(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

class SingularMassError : public NumericalError {
 public:
  SingularMassError(const std::string& what, long vertex) : NumericalError(what), vertex_(vertex) {}
  long vertex() const { return vertex_; }

 private:
  long vertex_;
};

}  // namespace fshapes
