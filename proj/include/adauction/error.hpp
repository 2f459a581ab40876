#pragma once

#include <stdexcept>
#include <string>

namespace adauction {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Virtual values are undefined for PointMass / FiniteDiscrete laws without ironing.
class DiscreteUnsupported : public Error {
 public:
  using Error::Error;
};

class OutOfSupport : public Error {
 public:
  using Error::Error;
};

class IrregularDistribution : public Error {
 public:
  using Error::Error;
};

class StateOffGrid : public Error {
 public:
  using Error::Error;
};

class ZeroStateUndefined : public Error {
 public:
  using Error::Error;
};

class NotConverged : public Error {
 public:
  NotConverged(double residual, int iterations)
      : Error("value iteration did not converge: residual " + std::to_string(residual) +
              " after " + std::to_string(iterations) + " sweeps"),
        residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class TooLarge : public Error {
 public:
  using Error::Error;
};

class IrregularInstance : public Error {
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

}  // namespace adauction
