#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace iterfilt {

/// Base class of every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent dimensions between a model, its parameters and the data.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A natural-scale value outside the domain of its coordinate transform.
class DomainError : public Error {
 public:
  DomainError(std::string coordinate, const std::string& what)
      : Error(what), coordinate_(std::move(coordinate)) {}

  const std::string& coordinate() const noexcept { return coordinate_; }

 private:
  std::string coordinate_;
};

/// Invalid configuration of an algorithmic object (kernel, schedule, ...).
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Base class for failures of the numerical procedures themselves. The CLI
/// maps every subclass to the "numerical failure" exit code.
class NumericalError : public Error {
 public:
  NumericalError(std::size_t step, const std::string& what) : Error(what), step_(step) {}

  /// Time index n at which the failure occurred (0 = initialization).
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// A user callback produced a non-finite (or negative density) value.
class ModelEvaluationError : public NumericalError {
 public:
  ModelEvaluationError(std::size_t step, std::string callback);

  const std::string& callback() const noexcept { return callback_; }

 private:
  std::string callback_;
};

/// Every particle weight at a step was zero (or the weights were unusable).
class DegeneracyError : public NumericalError {
 public:
  DegeneracyError(std::size_t step, double max_log_weight);

  double max_log_weight() const noexcept { return max_log_weight_; }

 private:
  double max_log_weight_;
};

/// A Monte Carlo prediction variance could not be inverted.
class SingularVarianceError : public NumericalError {
 public:
  SingularVarianceError(std::size_t step, double condition_number);

  double condition_number() const noexcept { return condition_number_; }

 private:
  double condition_number_;
};

}  // namespace iterfilt
