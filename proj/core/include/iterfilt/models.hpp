#pragma once

#include "iterfilt/model.hpp"

#include <Eigen/Core>

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace iterfilt::models {

/// A model over its full named parameter vector, with default
/// natural-scale values.
struct ModelEntry {
  ModelSpec spec;
  Eigen::VectorXd defaults;
};

/// Scalar linear-Gaussian model:
///   x_0 ~ N(m0, p0),  x_n = a x_{n-1} + N(0, q),  y_n = x_n + N(0, r).
/// Parameters a (identity), q (log), r (log), m0 (identity), p0 (log).
ModelEntry scalar_lgss();

/// Ornstein-Uhlenbeck process dx = -lambda (x - mu) dt + sigma dW sampled
/// exactly between observation times, observed with N(0, r) noise and
/// started from its stationary law. Parameters lambda (log), mu (identity),
/// sigma (log), r (log).
ModelEntry ou_discretized();

using ModelFactory = std::function<ModelEntry()>;

/// Name -> factory lookup. Pre-populated with "lgss" and "ou-discretized".
class ModelRegistry {
 public:
  ModelRegistry();

  static ModelRegistry& global();

  void add(const std::string& name, ModelFactory factory);
  bool contains(const std::string& name) const;
  /// Throws ConfigurationError for an unknown name.
  ModelEntry make(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, ModelFactory> factories_;
};

}  // namespace iterfilt::models
