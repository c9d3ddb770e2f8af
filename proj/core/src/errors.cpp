#include "iterfilt/errors.hpp"

#include <sstream>

namespace iterfilt {

namespace {

std::string describe_evaluation(std::size_t step, const std::string& callback) {
  std::ostringstream os;
  os << "model callback '" << callback << "' returned a non-finite or invalid value at step " << step;
  return os.str();
}

std::string describe_degeneracy(std::size_t step, double max_log_weight) {
  std::ostringstream os;
  os << "particle filter degenerated at step " << step << ": all weights are zero (max log-weight "
     << max_log_weight << ")";
  return os.str();
}

std::string describe_singular(std::size_t step, double condition_number) {
  std::ostringstream os;
  os << "prediction variance at step " << step << " is singular (condition number " << condition_number
     << ")";
  return os.str();
}

}  // namespace

ModelEvaluationError::ModelEvaluationError(std::size_t step, std::string callback)
    : NumericalError(step, describe_evaluation(step, callback)), callback_(std::move(callback)) {}

DegeneracyError::DegeneracyError(std::size_t step, double max_log_weight)
    : NumericalError(step, describe_degeneracy(step, max_log_weight)), max_log_weight_(max_log_weight) {}

SingularVarianceError::SingularVarianceError(std::size_t step, double condition_number)
    : NumericalError(step, describe_singular(step, condition_number)),
      condition_number_(condition_number) {}

}  // namespace iterfilt
