#pragma once

#include <stdexcept>
#include <string>

namespace gradflow {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Two fields (or a field and an operator) live on different grids.
class SizeMismatch : public Error {
 public:
  using Error::Error;
};

/// An H^-1 product was requested for a field that is not mean-zero.
class MeanNotZero : public Error {
 public:
  using Error::Error;
};

/// E + C (or E_1 + C for baseline SAV) is not positive.
class EnergyShiftViolation : public Error {
 public:
  using Error::Error;
};

class NegativeDiscriminant : public Error {
 public:
  using Error::Error;
};

/// Conjugate gradients did not reach the requested residual.
class SolverStall : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or |phi|_inf above the blowup threshold.
class NumericalBlowup : public Error {
 public:
  NumericalBlowup(const std::string& what, long step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace gradflow
