#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace bma {

/// Argument outside the mathematical domain of a function (e.g. sd <= 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Caller violated an interface contract (size mismatch, empty input, ...).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// No model carries positive probability.
class DegenerateWeightsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A response function produced a non-finite value.
class ModelEvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A likelihood was requested on points outside the model's domain.
class DomainViolationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dataset points not covered by any model, or a query no model predicts.
class CoverageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cholesky failed for every jitter on the ladder.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::vector<double> jitters)
      : std::runtime_error(what), jitter_ladder(std::move(jitters)) {}
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}

  std::vector<double> jitter_ladder;
};

/// MCMC could not start (initial point has zero posterior density).
class InitializationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// MCMC never produced a finite-posterior proposal during burn-in.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Laplace approximation: Hessian at the mode is not negative definite.
class CurvatureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mode search did not converge.
class OptimizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration or input file; `where` names the field or line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& where, const std::string& what)
      : std::runtime_error(where + ": " + what), location(where), message(what) {}

  std::string location;
  std::string message;
};

}  // namespace bma
