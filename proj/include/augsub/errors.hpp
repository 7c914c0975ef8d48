#pragma once

#include <stdexcept>
#include <string>

namespace augsub {

/// Invalid input or configuration (unsupported degree, non-nested spaces, bad CLI flags).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Base class for failures inside a numerical kernel.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The operator turned out not to be SPD: non-positive pivot or curvature.
class SolverBreakdown : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// An iteration ran out of steps before reaching its tolerance.
class NotConverged : public NumericalError {
 public:
  NotConverged(const std::string& what, double achieved)
      : NumericalError(what + " (achieved " + std::to_string(achieved) + ")"),
        achieved_(achieved) {}

  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

/// A Rayleigh-Ritz basis collapsed below the requested number of directions.
class DegenerateBasis : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace augsub
