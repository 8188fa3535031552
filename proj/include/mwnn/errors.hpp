#pragma once

#include <stdexcept>
#include <string>

namespace mwnn {

/// Precondition violated by a caller-supplied argument (shape, range, rank).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The four-block frame needs n >= r + r'.
class GeometryError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

class DecompositionError : public std::runtime_error {
 public:
  DecompositionError(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Raised when the error-bound denominator is not positive for the given delta.
class InfeasibleBoundError : public std::domain_error {
 public:
  InfeasibleBoundError(const std::string& what, double delta)
      : std::domain_error(what), delta_(delta) {}

  double delta() const noexcept { return delta_; }

 private:
  double delta_;
};

}  // namespace mwnn
