#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fieldforge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument to an operation (out-of-range id, non-positive quantity, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Invalid geometry description or a mesh that violates its invariants.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Target edge length too coarse to resolve the smallest geometric feature.
class FeatureResolutionError : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

/// Missing coefficient, unknown tag and similar job-configuration problems.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class UnsupportedVersionError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver ran out of iterations. Carries the best residual reached.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, double best_residual, std::size_t iterations)
      : Error(what), best_residual_(best_residual), iterations_(iterations) {}
  double best_residual() const noexcept { return best_residual_; }
  std::size_t iterations() const noexcept { return iterations_; }

 private:
  double best_residual_;
  std::size_t iterations_;
};

/// Least-squares fit could not be posed (degenerate abscissae, too few points).
class FitError : public Error {
 public:
  using Error::Error;
};

/// Dressed eigenstates could not be matched to bare Fock states.
class StrongMixingError : public Error {
 public:
  using Error::Error;
};

}  // namespace fieldforge
