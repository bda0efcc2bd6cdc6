#pragma once

#include <stdexcept>
#include <string>

namespace ptqrm {

// Base of everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters or run configuration (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Any numerical failure (CLI exit code 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Eigenvector matrix too ill-conditioned to trust (near an exceptional point).
class DefectiveMatrix : public NumericalError {
 public:
  DefectiveMatrix(const std::string& what, double cond)
      : NumericalError(what), cond_(cond) {}
  double cond() const noexcept { return cond_; }

 private:
  double cond_;
};

class PoleDenominator : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SeriesNotConverged : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoBracket : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SelectionAmbiguous : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class TruncationTail : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class PhaseAlignmentFailed : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class AtEP : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class GapClosed : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace ptqrm
